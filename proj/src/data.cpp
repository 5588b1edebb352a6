#include "fedbaf/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fedbaf {

Dataset Dataset::subset(const std::vector<Eigen::Index>& idx) const {
  Dataset out;
  out.num_classes = num_classes;
  out.features.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
  out.labels.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(idx[i]);
    out.labels[static_cast<Eigen::Index>(i)] = labels[idx[i]];
  }
  return out;
}

Eigen::MatrixXd make_class_means(int num_classes, int dim, double scale, std::uint64_t seed) {
  RngStream rng(seed);
  Eigen::MatrixXd means(num_classes, dim);
  for (int c = 0; c < num_classes; ++c)
    for (int d = 0; d < dim; ++d) means(c, d) = scale * rng.gaussian();
  return means;
}

Dataset gen_from_means(const Eigen::MatrixXd& means, int n_per_class, double spread,
                       std::uint64_t seed) {
  RngStream rng(seed);
  const int num_classes = static_cast<int>(means.rows());
  const int dim = static_cast<int>(means.cols());
  Dataset out;
  out.num_classes = num_classes;
  out.features.resize(static_cast<Eigen::Index>(num_classes) * n_per_class, dim);
  out.labels.resize(static_cast<Eigen::Index>(num_classes) * n_per_class);
  Eigen::Index row = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int i = 0; i < n_per_class; ++i, ++row) {
      for (int d = 0; d < dim; ++d)
        out.features(row, d) = means(c, d) + spread * rng.gaussian();
      out.labels[row] = c;
    }
  }
  return out;
}

Dataset gen_gaussian_mixture(int num_classes, int dim, int n_per_class, double spread,
                             std::uint64_t seed) {
  if (num_classes < 1 || dim < 1 || n_per_class < 1 || spread <= 0.0)
    throw std::invalid_argument("gen_gaussian_mixture: parameters must be positive");
  RngStream rng(seed);
  Eigen::MatrixXd means = make_class_means(num_classes, dim, 1.0, rng.child({1}).seed());
  return gen_from_means(means, n_per_class, spread, rng.child({2}).seed());
}

Dataset load_csv(const std::string& path, int num_classes) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_csv: cannot open " + path);

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  int lineno = 0;
  Eigen::Index dim = -1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        double v = std::stod(cell, &used);
        if (used != cell.size() && cell.find_first_not_of(" \t\r", used) != std::string::npos)
          throw std::invalid_argument(cell);
        fields.push_back(v);
      } catch (const std::exception&) {
        throw std::runtime_error("load_csv: malformed value '" + cell + "' at line " +
                                 std::to_string(lineno));
      }
    }
    if (fields.size() < 2)
      throw std::runtime_error("load_csv: need at least one feature and a label at line " +
                               std::to_string(lineno));
    double label_field = fields.back();
    fields.pop_back();
    int label = static_cast<int>(std::llround(label_field));
    if (std::abs(label_field - label) > 1e-9 || label < 0 || label >= num_classes)
      throw std::runtime_error("load_csv: label out of range [0," +
                               std::to_string(num_classes) + ") at line " +
                               std::to_string(lineno));
    if (dim < 0) dim = static_cast<Eigen::Index>(fields.size());
    if (static_cast<Eigen::Index>(fields.size()) != dim)
      throw std::runtime_error("load_csv: inconsistent column count at line " +
                               std::to_string(lineno));
    rows.push_back(std::move(fields));
    labels.push_back(label);
  }
  if (rows.empty()) throw std::runtime_error("load_csv: empty file " + path);

  Dataset out;
  out.num_classes = num_classes;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), dim);
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index d = 0; d < dim; ++d)
      out.features(static_cast<Eigen::Index>(i), d) = rows[i][static_cast<std::size_t>(d)];
    out.labels[static_cast<Eigen::Index>(i)] = labels[i];
  }
  return out;
}

Dataset corrupt_labels(const Dataset& data, std::uint64_t seed) {
  if (data.size() < 2) throw std::invalid_argument("corrupt_labels: need at least 2 samples");
  RngStream rng(seed);
  std::vector<int> perm(static_cast<std::size_t>(data.size()));
  for (Eigen::Index i = 0; i < data.size(); ++i) perm[static_cast<std::size_t>(i)] = data.labels[i];
  rng.shuffle(perm);
  Dataset out = data;
  for (Eigen::Index i = 0; i < data.size(); ++i) out.labels[i] = perm[static_cast<std::size_t>(i)];
  return out;
}

namespace {

std::vector<std::vector<Eigen::Index>> indices_by_class(const Dataset& data) {
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(data.num_classes));
  for (Eigen::Index i = 0; i < data.size(); ++i)
    by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
  return by_class;
}

Dataset filter_by_mask(const Dataset& data, const ClassMask& mask) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < data.size(); ++i)
    if (mask.allows(data.labels[i])) keep.push_back(i);
  return data.subset(keep);
}

}  // namespace

Partition make_partition(const Dataset& train, const Dataset& test, int num_clients,
                         PartitionMode mode, double class_fraction, std::uint64_t seed) {
  if (num_clients < 1) throw std::invalid_argument("make_partition: num_clients must be >= 1");
  const int C = train.num_classes;
  RngStream rng(seed);

  Partition out;
  out.global_test = test;
  out.client_shards.resize(static_cast<std::size_t>(num_clients));

  auto by_class = indices_by_class(train);
  for (auto& cls : by_class) rng.shuffle(cls);

  if (mode == PartitionMode::kIid) {
    // Deal each class round-robin across clients: per-client per-class
    // counts differ by at most one.
    std::vector<std::vector<Eigen::Index>> assigned(static_cast<std::size_t>(num_clients));
    for (int c = 0; c < C; ++c) {
      const auto& cls = by_class[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < cls.size(); ++i)
        assigned[i % static_cast<std::size_t>(num_clients)].push_back(cls[i]);
    }
    for (int k = 0; k < num_clients; ++k) {
      auto& shard = out.client_shards[static_cast<std::size_t>(k)];
      shard.train = train.subset(assigned[static_cast<std::size_t>(k)]);
      shard.mask = ClassMask::all(C);
      shard.local_test = test;
    }
    return out;
  }

  // Non-IID: client k holds classes {(k*s + j) mod C : j < s}, s = ceil(frac*C).
  const int s = static_cast<int>(std::ceil(class_fraction * C));
  if (s < 1) throw std::invalid_argument("make_partition: class_fraction * num_classes < 1");
  std::vector<std::vector<int>> client_classes(static_cast<std::size_t>(num_clients));
  std::vector<std::vector<int>> holders(static_cast<std::size_t>(C));
  std::vector<bool> covered(static_cast<std::size_t>(C), false);
  for (int k = 0; k < num_clients; ++k) {
    for (int j = 0; j < s; ++j) {
      int c = (k * s + j) % C;
      client_classes[static_cast<std::size_t>(k)].push_back(c);
      holders[static_cast<std::size_t>(c)].push_back(k);
      covered[static_cast<std::size_t>(c)] = true;
    }
  }
  for (int c = 0; c < C; ++c)
    if (!covered[static_cast<std::size_t>(c)])
      throw std::invalid_argument("make_partition: rotation scheme leaves class " +
                                  std::to_string(c) + " unassigned; add clients");

  // Deal each class's samples round-robin among its holders, then truncate
  // each client's classes to the minimum per-class count it received.
  std::vector<std::vector<std::vector<Eigen::Index>>> per_client_class(
      static_cast<std::size_t>(num_clients));
  for (auto& v : per_client_class) v.resize(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) {
    const auto& cls = by_class[static_cast<std::size_t>(c)];
    const auto& h = holders[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < cls.size(); ++i) {
      int k = h[i % h.size()];
      per_client_class[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)].push_back(cls[i]);
    }
  }

  for (int k = 0; k < num_clients; ++k) {
    const auto& classes = client_classes[static_cast<std::size_t>(k)];
    std::size_t min_count = SIZE_MAX;
    for (int c : classes)
      min_count = std::min(min_count,
                           per_client_class[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)].size());
    if (min_count == 0)
      throw std::invalid_argument("make_partition: a client received zero samples for one of its classes");

    std::vector<Eigen::Index> idx;
    for (int c : classes) {
      auto& v = per_client_class[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
      idx.insert(idx.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(min_count));
    }

    auto& shard = out.client_shards[static_cast<std::size_t>(k)];
    shard.mask.present.assign(static_cast<std::size_t>(C), false);
    for (int c : classes) shard.mask.present[static_cast<std::size_t>(c)] = true;
    shard.train = train.subset(idx);
    shard.local_test = filter_by_mask(test, shard.mask);
  }
  return out;
}

bool AttackPlan::is_malicious(int client_id) const {
  return std::find(malicious_ids.begin(), malicious_ids.end(), client_id) != malicious_ids.end();
}

AttackPlan make_attack_plan(double zeta, double lambda, int num_clients, std::uint64_t seed) {
  if (zeta < 0.0 || zeta > 1.0) throw std::invalid_argument("make_attack_plan: zeta in [0,1]");
  if (lambda < 1.0) throw std::invalid_argument("make_attack_plan: lambda must be >= 1");
  AttackPlan plan;
  plan.zeta = zeta;
  plan.lambda = lambda;
  int m = static_cast<int>(std::lround(zeta * num_clients));
  std::vector<int> ids(static_cast<std::size_t>(num_clients));
  std::iota(ids.begin(), ids.end(), 0);
  RngStream rng(seed);
  rng.shuffle(ids);
  plan.malicious_ids.assign(ids.begin(), ids.begin() + m);
  std::sort(plan.malicious_ids.begin(), plan.malicious_ids.end());
  return plan;
}

std::string partition_summary_json(const Partition& partition, const AttackPlan& plan) {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t k = 0; k < partition.client_shards.size(); ++k) {
    const auto& shard = partition.client_shards[k];
    std::vector<int> classes;
    for (std::size_t c = 0; c < shard.mask.present.size(); ++c)
      if (shard.mask.present[c]) classes.push_back(static_cast<int>(c));
    j.push_back({{"client", static_cast<int>(k)},
                 {"n_train", shard.train.size()},
                 {"n_local_test", shard.local_test.size()},
                 {"classes", classes},
                 {"malicious", plan.is_malicious(static_cast<int>(k))}});
  }
  return j.dump(2);
}

}  // namespace fedbaf
