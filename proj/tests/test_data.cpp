#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "fedbaf/data.hpp"

using namespace fedbaf;

namespace {

std::vector<int> class_counts(const Dataset& d) {
  std::vector<int> counts(d.num_classes, 0);
  for (Eigen::Index i = 0; i < d.size(); ++i) ++counts[d.labels[i]];
  return counts;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  Dataset a = gen_gaussian_mixture(4, 6, 25, 1.0, 31);
  Dataset b = gen_gaussian_mixture(4, 6, 25, 1.0, 31);
  Dataset c = gen_gaussian_mixture(4, 6, 25, 1.0, 32);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.features != c.features);
}

TEST_CASE("mixture has balanced classes and the right shape") {
  Dataset d = gen_gaussian_mixture(5, 8, 30, 1.0, 7);
  CHECK(d.size() == 150);
  CHECK(d.dim() == 8);
  for (int c : class_counts(d)) CHECK(c == 30);
}

TEST_CASE("spread approaching zero collapses each class onto its mean") {
  Eigen::MatrixXd means = make_class_means(3, 4, 2.0, 5);
  Dataset d = gen_from_means(means, 10, 1e-12, 6);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    Eigen::VectorXd mean = means.row(d.labels[i]).transpose();
    CHECK((d.features.row(i).transpose() - mean).norm() < 1e-9);
  }
}

TEST_CASE("csv loading round-trips values and rejects bad rows") {
  namespace fs = std::filesystem;
  fs::path p = fs::temp_directory_path() / "fedbaf_data_test.csv";
  {
    std::ofstream f(p);
    f << "0.5,-1.25,0\n1.0,2.0,1\n-3.5,0.0,1\n";
  }
  Dataset d = load_csv(p.string(), 2);
  CHECK(d.size() == 3);
  CHECK(d.dim() == 2);
  CHECK(d.features(0, 1) == -1.25);
  CHECK(d.labels[2] == 1);

  {
    std::ofstream f(p);
    f << "0.5,1.0,0\n0.5,oops,1\n";
  }
  CHECK_THROWS_WITH_AS(load_csv(p.string(), 2), doctest::Contains("line 2"), std::runtime_error);

  {
    std::ofstream f(p);
    f << "0.5,1.0,7\n";
  }
  CHECK_THROWS_AS(load_csv(p.string(), 2), std::runtime_error);
  fs::remove(p);
}

TEST_CASE("iid partition spreads every class near-uniformly") {
  Dataset train = gen_gaussian_mixture(4, 5, 30, 1.0, 11);  // 120 samples
  Dataset test = gen_gaussian_mixture(4, 5, 10, 1.0, 12);
  Partition p = make_partition(train, test, 6, PartitionMode::kIid, 1.0, 13);
  REQUIRE(p.client_shards.size() == 6);

  Eigen::Index total = 0;
  for (const auto& shard : p.client_shards) {
    total += shard.train.size();
    auto counts = class_counts(shard.train);
    CHECK(shard.mask.count_present() == 4);
    // 30 samples of each class over 6 clients: 5 per class per client.
    for (int c : counts) CHECK(std::abs(c - 5) <= 1);
  }
  CHECK(total == train.size());
}

TEST_CASE("noniid partition gives each client exactly its class share") {
  // 10 classes, fraction 0.2 -> 2 classes per client.
  Dataset train = gen_gaussian_mixture(10, 4, 20, 1.0, 21);
  Dataset test = gen_gaussian_mixture(10, 4, 5, 1.0, 22);
  Partition p = make_partition(train, test, 10, PartitionMode::kNonIid, 0.2, 23);

  std::vector<int> class_cover(10, 0);
  Eigen::Index total = 0;
  for (const auto& shard : p.client_shards) {
    CHECK(shard.mask.count_present() == 2);
    std::set<int> seen;
    for (Eigen::Index i = 0; i < shard.train.size(); ++i) {
      int y = shard.train.labels[i];
      CHECK(shard.mask.allows(y));
      seen.insert(y);
    }
    CHECK(seen.size() == 2);
    for (int c : seen) ++class_cover[c];
    for (Eigen::Index i = 0; i < shard.local_test.size(); ++i)
      CHECK(shard.mask.allows(shard.local_test.labels[i]));
    total += shard.train.size();
  }
  for (int cover : class_cover) CHECK(cover == 2);  // each class held by 2 clients
  CHECK(total == train.size());
}

TEST_CASE("partition shards are disjoint and conserve samples") {
  Dataset train = gen_gaussian_mixture(4, 3, 24, 1.0, 31);
  Dataset test = gen_gaussian_mixture(4, 3, 8, 1.0, 32);
  for (auto mode : {PartitionMode::kIid, PartitionMode::kNonIid}) {
    Partition p = make_partition(train, test, 4, mode, 0.5, 33);
    std::map<std::vector<double>, int> seen;
    Eigen::Index total = 0;
    for (const auto& shard : p.client_shards) {
      total += shard.train.size();
      for (Eigen::Index i = 0; i < shard.train.size(); ++i) {
        std::vector<double> row(shard.train.features.row(i).begin(),
                                shard.train.features.row(i).end());
        ++seen[row];
      }
    }
    CHECK(total == train.size());
    for (const auto& [row, count] : seen) CHECK(count == 1);
  }
}

TEST_CASE("label corruption permutes the label multiset") {
  Dataset d = gen_gaussian_mixture(5, 3, 40, 1.0, 41);
  Dataset c = corrupt_labels(d, 99);
  CHECK(c.features == d.features);
  CHECK(class_counts(c) == class_counts(d));
  CHECK(c.labels != d.labels);
}

TEST_CASE("two-sample corruption either swaps or keeps both labels") {
  Dataset d;
  d.features = Eigen::MatrixXd::Zero(2, 1);
  d.labels = Eigen::VectorXi(2);
  d.labels << 0, 1;
  d.num_classes = 2;
  int swapped = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    Dataset c = corrupt_labels(d, s);
    bool swap = c.labels[0] == 1 && c.labels[1] == 0;
    bool keep = c.labels[0] == 0 && c.labels[1] == 1;
    REQUIRE((swap || keep));
    if (swap) ++swapped;
  }
  // Uniform permutation of two elements: about half of seeds swap.
  CHECK(swapped > 60);
  CHECK(swapped < 140);
}

TEST_CASE("attack plan picks a fixed fraction of clients") {
  AttackPlan p = make_attack_plan(0.5, 5.0, 10, 17);
  CHECK(p.malicious_ids.size() == 5);
  CHECK(std::is_sorted(p.malicious_ids.begin(), p.malicious_ids.end()));
  for (int id : p.malicious_ids) {
    CHECK(id >= 0);
    CHECK(id < 10);
    CHECK(p.is_malicious(id));
  }
  CHECK(make_attack_plan(0.0, 1.0, 10, 17).malicious_ids.empty());

  // Across many seeds every client should be selected sometimes.
  std::vector<int> hits(10, 0);
  for (std::uint64_t s = 0; s < 300; ++s)
    for (int id : make_attack_plan(0.1, 2.0, 10, s).malicious_ids) ++hits[id];
  for (int h : hits) CHECK(h > 5);
}

TEST_CASE("corruption rate over many seeds matches the plan fraction") {
  int malicious_total = 0;
  const int seeds = 1000;
  for (std::uint64_t s = 0; s < seeds; ++s)
    malicious_total += static_cast<int>(make_attack_plan(0.1, 2.0, 10, s).malicious_ids.size());
  double frac = malicious_total / (10.0 * seeds);
  CHECK(frac == doctest::Approx(0.1).epsilon(0.02));
}
