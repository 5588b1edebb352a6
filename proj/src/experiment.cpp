#include "fedbaf/experiment.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedbaf/checkpoint.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace fedbaf {
namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

BuiltData build_dataset(const ExperimentConfig& config) {
  BuiltData out;
  const auto& d = config.data;
  if (d.kind == "csv") {
    out.train = load_csv(d.csv_train, d.num_classes);
    out.test = load_csv(d.csv_test, d.num_classes);
    return out;
  }
  out.means = make_class_means(d.num_classes, d.dim, d.mean_scale, d.mean_seed);
  out.means.array() += d.mean_offset;
  RngStream rng(d.seed);
  out.train = gen_from_means(out.means, d.n_per_class, d.spread, rng.child({1}).seed());
  out.test = gen_from_means(out.means, d.test_n_per_class, d.spread, rng.child({2}).seed());
  return out;
}

std::shared_ptr<const ModelSchema> build_schema(const ExperimentConfig& config) {
  int dim = config.data.dim;
  int classes = config.data.num_classes;
  if (config.data.kind == "csv") {
    // Dimensions come from the file itself.
    Dataset d = load_csv(config.data.csv_train, classes);
    dim = static_cast<int>(d.dim());
  }
  if (config.model.kind == "linear") return linear_schema(dim, classes);
  return mlp_schema(dim, config.model.hidden, classes);
}

Partition build_partition(const ExperimentConfig& config, const BuiltData& data) {
  PartitionMode mode =
      config.partition.mode == "noniid" ? PartitionMode::kNonIid : PartitionMode::kIid;
  return make_partition(data.train, data.test, config.partition.num_clients, mode,
                        config.partition.class_fraction, config.partition.seed);
}

AttackPlan build_attack_plan(const ExperimentConfig& config) {
  return make_attack_plan(config.attack.zeta, config.attack.zeta > 0.0 ? config.attack.lambda : 1.0,
                          config.partition.num_clients, config.attack.seed);
}

namespace {

FederationRunSpec make_run_spec(const ExperimentConfig& config, const Partition& partition,
                                const AttackPlan& attack, const Dataset& pooled,
                                std::shared_ptr<const ModelSchema> schema,
                                std::optional<ParamVector>& foundation,
                                std::uint64_t master_seed) {
  FederationRunSpec spec;
  spec.partition = &partition;
  spec.attack = attack;
  spec.schema = std::move(schema);
  spec.rounds = config.training.rounds;
  spec.epochs = config.training.epochs;
  spec.lr = config.training.lr;
  spec.batch_size = config.training.batch;
  spec.participation = config.training.participation;
  spec.non_iid_masking = config.partition.mode == "noniid";
  spec.master_seed = master_seed;
  spec.retain_rounds = config.run.retain_client_models;
  spec.chi_diagnostic = config.run.chi_diagnostic;
  spec.pooled_train = &pooled;

  spec.strategy.kind =
      config.strategy.algorithm == "fedprox" ? BaseAlgorithm::kFedProx : BaseAlgorithm::kFedAvg;
  spec.strategy.mu = config.strategy.mu;
  spec.strategy.fedprox_server_term = config.strategy.fedprox_server_term;

  if (config.strategy.foundation == "fedbaf") {
    spec.mode = FoundationMode::kFedBaF;
    foundation = load_checkpoint(config.strategy.foundation_checkpoint);
    FedBaFParams fb;
    fb.psi = config.strategy.psi;
    fb.foundation = *foundation;
    fb.static_alpha = config.strategy.static_alpha;
    spec.strategy.fedbaf = std::move(fb);
    spec.foundation = foundation;
  } else if (config.strategy.foundation == "weight_init") {
    spec.mode = FoundationMode::kWeightInit;
    foundation = load_checkpoint(config.strategy.foundation_checkpoint);
    spec.foundation = foundation;
  }
  return spec;
}

}  // namespace

RunResult execute_run(const ExperimentConfig& config, std::optional<std::uint64_t> seed_override) {
  validate_config(config);
  BuiltData data = build_dataset(config);
  Partition partition = build_partition(config, data);
  AttackPlan attack = build_attack_plan(config);
  auto schema = build_schema(config);
  std::optional<ParamVector> foundation;
  std::uint64_t seed = seed_override.value_or(config.run.master_seed);
  FederationRunSpec spec =
      make_run_spec(config, partition, attack, data.train, schema, foundation, seed);
  return run_experiment(spec);
}

PretrainOutcome cmd_pretrain(const ExperimentConfig& config, const std::string& out_override) {
  validate_config(config, /*require_checkpoint=*/false);
  const auto& d = config.data;
  const auto& p = config.pretrain;
  if (d.kind != "gaussian")
    throw ConfigError("pretrain: only the gaussian generator is supported for pre-training");

  Eigen::MatrixXd means = make_class_means(d.num_classes, d.dim, d.mean_scale, d.mean_seed);
  means.array() += d.mean_offset;
  RngStream rng(p.seed);
  if (p.mean_jitter > 0.0) {
    RngStream jitter = rng.child({0x71});
    for (Eigen::Index i = 0; i < means.rows(); ++i)
      for (Eigen::Index j = 0; j < means.cols(); ++j)
        means(i, j) += p.mean_jitter * jitter.gaussian();
  }
  Dataset train = gen_from_means(means, p.n_per_class, p.spread, rng.child({1}).seed());
  Dataset test = gen_from_means(means, std::max(1, p.n_per_class / 2), p.spread,
                                rng.child({2}).seed());

  auto schema = build_schema(config);
  RngStream init_rng = rng.child({0x1717});
  ParamVector w = init_weights(schema, init_rng);
  for (int e = 0; e < p.epochs; ++e) {
    RngStream epoch_rng = rng.child({0xE0, static_cast<std::uint64_t>(e)});
    w = sgd_epoch(w, train, p.lr, p.batch, epoch_rng);
  }

  PretrainOutcome out;
  out.checkpoint_path = out_override.empty() ? p.out : out_override;
  fs::path path(out.checkpoint_path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_checkpoint(out.checkpoint_path, w);
  out.train_acc = evaluate(w, train);
  out.test_acc = evaluate(w, test);
  return out;
}

namespace {

int rounds_to_threshold(const std::vector<RoundRecord>& records, double threshold) {
  for (const auto& r : records)
    if (r.global_acc >= threshold) return r.t;
  return -1;
}

void persist_trial(const ExperimentConfig& config, const RunResult& result, const fs::path& dir,
                   std::uint64_t seed, bool debug_alpha) {
  fs::create_directories(dir / "checkpoints");
  write_file(dir / "config.snapshot", serialize_config(config));
  write_file(dir / "rounds.csv", round_log_csv(result.records, debug_alpha));

  AttackPlan attack = build_attack_plan(config);
  BuiltData data = build_dataset(config);
  Partition partition = build_partition(config, data);
  write_file(dir / "partition.json", partition_summary_json(partition, attack));

  save_checkpoint((dir / "checkpoints" / "initial.fbaf").string(), result.initial);
  save_checkpoint((dir / "checkpoints" / "final.fbaf").string(), result.final_model);
  if (config.run.checkpoint_every > 0) {
    for (std::size_t r = 0; r < result.retained.size(); ++r) {
      if (static_cast<int>(r) % config.run.checkpoint_every != 0) continue;
      char name[64];
      std::snprintf(name, sizeof(name), "round_%04d_global.fbaf", static_cast<int>(r));
      save_checkpoint((dir / "checkpoints" / name).string(), result.retained[r].w_after);
    }
  }
  if (config.run.retain_client_models) {
    for (std::size_t r = 0; r < result.retained.size(); ++r) {
      const auto& rr = result.retained[r];
      char name[64];
      std::snprintf(name, sizeof(name), "round_%04zu_prime.fbaf", r);
      save_checkpoint((dir / "checkpoints" / name).string(), rr.w_prime);
      std::snprintf(name, sizeof(name), "round_%04zu_global.fbaf", r);
      save_checkpoint((dir / "checkpoints" / name).string(), rr.w_after);
      for (const auto& [id, wk] : rr.client_models) {
        std::snprintf(name, sizeof(name), "round_%04zu_client_%03d.fbaf", r, id);
        save_checkpoint((dir / "checkpoints" / name).string(), wk);
      }
    }
  }

  nlohmann::json summary;
  summary["seed"] = seed;
  summary["rounds"] = result.records.size();
  summary["tau0"] = result.tau0;
  if (!result.records.empty()) {
    summary["final_global_acc"] = result.records.back().global_acc;
    double best = 0.0;
    for (const auto& r : result.records) best = std::max(best, r.global_acc);
    summary["best_global_acc"] = best;
    summary["final_local_acc_honest"] = result.records.back().local_acc_honest;
  }
  write_file(dir / "summary.json", summary.dump(2));
}

}  // namespace

RunOutcome cmd_run(const ExperimentConfig& config, const std::string& out_dir, int trials,
                   std::optional<std::uint64_t> seed_override, bool debug_alpha_override) {
  validate_config(config);
  if (trials < 1) throw ConfigError("run: trials must be >= 1");
  RunOutcome out;
  out.out_dir = out_dir.empty() ? config.run.out_dir : out_dir;
  fs::create_directories(out.out_dir);

  std::uint64_t base_seed = seed_override.value_or(config.run.master_seed);
  bool debug_alpha = config.run.debug_alpha || debug_alpha_override;

  nlohmann::json per_trial = nlohmann::json::array();
  for (int trial = 0; trial < trials; ++trial) {
    std::uint64_t seed = base_seed + static_cast<std::uint64_t>(trial);
    ExperimentConfig trial_config = config;
    trial_config.run.master_seed = seed;
    RunResult result = execute_run(trial_config, seed);

    fs::path dir = trials == 1 ? fs::path(out.out_dir)
                               : fs::path(out.out_dir) / ("trial_" + std::to_string(trial));
    persist_trial(trial_config, result, dir, seed, debug_alpha);

    TrialOutcome t;
    t.seed = seed;
    t.dir = dir.string();
    if (!result.records.empty()) {
      t.final_acc = result.records.back().global_acc;
      for (const auto& r : result.records) t.best_acc = std::max(t.best_acc, r.global_acc);
    }
    out.trials.push_back(t);
    per_trial.push_back({{"seed", seed}, {"final_acc", t.final_acc}, {"best_acc", t.best_acc}});
    out.best_final_acc = std::max(out.best_final_acc, t.final_acc);
  }

  if (trials > 1) {
    nlohmann::json summary;
    summary["trials"] = per_trial;
    summary["best_final_acc"] = out.best_final_acc;
    write_file(fs::path(out.out_dir) / "summary.json", summary.dump(2));
  }
  return out;
}

namespace {

std::string dataset_hash(const Dataset& train, const Dataset& test) {
  auto crc_of = [](const Dataset& d) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(d.features.data()),
                static_cast<uInt>(sizeof(double) * static_cast<std::size_t>(d.features.size())));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(d.labels.data()),
                static_cast<uInt>(sizeof(int) * static_cast<std::size_t>(d.labels.size())));
    return crc;
  };
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%08lx%08lx", crc_of(train), crc_of(test));
  return buf;
}

}  // namespace

ComparisonReport cmd_compare(const std::vector<ExperimentConfig>& configs, double threshold,
                             int trials, const std::string& out_dir) {
  if (configs.empty()) throw ConfigError("compare: need at least one arm");
  for (const auto& c : configs) validate_config(c);
  for (std::size_t i = 1; i < configs.size(); ++i) {
    const auto& a = configs[0];
    const auto& b = configs[i];
    if (!(a.data == b.data) || !(a.partition == b.partition) || !(a.attack == b.attack) ||
        a.run.master_seed != b.run.master_seed)
      throw ConfigError("compare: arms must share data, partition, attack, and master seeds");
  }

  ComparisonReport report;
  report.threshold = threshold;
  {
    BuiltData data = build_dataset(configs[0]);
    report.data_hash = dataset_hash(data.train, data.test);
  }

  nlohmann::json arms_json = nlohmann::json::array();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& config = configs[i];
    ComparisonArm arm;
    arm.label = config.strategy.foundation + "/" + config.strategy.algorithm;
    arm.rounds_to_threshold = -1;

    for (int trial = 0; trial < trials; ++trial) {
      std::uint64_t seed = config.run.master_seed + static_cast<std::uint64_t>(trial);
      RunResult result = execute_run(config, seed);
      if (result.records.empty()) continue;
      double final_acc = result.records.back().global_acc;
      if (final_acc >= arm.final_acc) {
        arm.final_acc = final_acc;
        arm.local_acc_honest = result.records.back().local_acc_honest;
      }
      for (const auto& r : result.records) arm.best_acc = std::max(arm.best_acc, r.global_acc);
      int rt = rounds_to_threshold(result.records, threshold);
      if (rt >= 0 && (arm.rounds_to_threshold < 0 || rt < arm.rounds_to_threshold))
        arm.rounds_to_threshold = rt;

      if (trial == 0) {
        // MAC accounting from the first trial's round-0 participant sizes.
        BuiltData data = build_dataset(config);
        Partition partition = build_partition(config, data);
        auto schema = build_schema(config);
        RngStream master(seed);
        RngStream sample_rng = master.child({0x5A, 0});
        auto sampled =
            sample_clients(config.partition.num_clients, config.training.participation, sample_rng);
        std::vector<Eigen::Index> sizes;
        for (int id : sampled)
          sizes.push_back(partition.client_shards[static_cast<std::size_t>(id)].train.size());
        int rt_for_mac = rt >= 0 ? rt + 1 : config.training.rounds;
        arm.mac = mac_report(*schema, sizes, config.training.epochs, rt_for_mac);
      }
    }

    arms_json.push_back({{"label", arm.label},
                         {"final_acc", arm.final_acc},
                         {"best_acc", arm.best_acc},
                         {"local_acc_honest", arm.local_acc_honest},
                         {"rounds_to_threshold", arm.rounds_to_threshold},
                         {"tmac", arm.mac.tmac},
                         {"mace", arm.mac.mace}});
    report.arms.push_back(std::move(arm));
  }

  std::ostringstream text;
  text << "arm                      final   best    local(h)  rounds->" << threshold << "  TMAC\n";
  for (const auto& arm : report.arms) {
    char line[256];
    std::snprintf(line, sizeof(line), "%-24s %-7.4f %-7.4f %-9.4f %-11s %llu\n", arm.label.c_str(),
                  arm.final_acc, arm.best_acc, arm.local_acc_honest,
                  arm.rounds_to_threshold >= 0 ? std::to_string(arm.rounds_to_threshold).c_str()
                                               : "not reached",
                  static_cast<unsigned long long>(arm.mac.tmac));
    text << line;
  }
  report.text = text.str();

  nlohmann::json j;
  j["threshold"] = threshold;
  j["data_hash"] = report.data_hash;
  j["arms"] = arms_json;
  report.json = j.dump(2);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "compare.json", report.json);
    write_file(fs::path(out_dir) / "compare.txt", report.text);
  }
  return report;
}

std::vector<RoundRecord> parse_round_log_csv(const std::string& text) {
  std::vector<RoundRecord> out;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    RoundRecord r;
    std::istringstream row(line);
    std::string cell;
    auto next = [&]() {
      if (!std::getline(row, cell, ',')) throw std::runtime_error("rounds.csv: short row");
      return std::stod(cell);
    };
    r.t = static_cast<int>(next());
    r.tau = next();
    r.alpha_tau = next();
    r.global_acc = next();
    r.local_acc_honest = next();
    r.local_acc_all = next();
    r.norm_w = next();
    r.norm_delta = next();
    r.dist_found = next();
    r.tau_numerator = r.tau * std::sqrt(static_cast<double>(r.t) + 1.0);
    out.push_back(r);
  }
  return out;
}

LoadedRun load_run(const std::string& run_dir) {
  fs::path dir(run_dir);
  if (!fs::exists(dir / "config.snapshot") || !fs::exists(dir / "rounds.csv"))
    throw AnalysisPreconditionError("analyze: " + run_dir +
                                    " does not look like a run directory (missing "
                                    "config.snapshot or rounds.csv)");
  LoadedRun run;
  run.config = parse_config(read_file(dir / "config.snapshot"));
  run.records = parse_round_log_csv(read_file(dir / "rounds.csv"));
  run.final_model = load_checkpoint((dir / "checkpoints" / "final.fbaf").string());
  run.initial = load_checkpoint((dir / "checkpoints" / "initial.fbaf").string());

  if (run.config.run.retain_client_models) {
    for (std::size_t r = 0; r < run.records.size(); ++r) {
      RetainedRound rr;
      char name[64];
      std::snprintf(name, sizeof(name), "round_%04zu_prime.fbaf", r);
      rr.w_prime = load_checkpoint((dir / "checkpoints" / name).string());
      std::snprintf(name, sizeof(name), "round_%04zu_global.fbaf", r);
      rr.w_after = load_checkpoint((dir / "checkpoints" / name).string());
      rr.w_before = r == 0 ? run.initial : run.retained.back().w_after;
      for (int id = 0; id < run.config.partition.num_clients; ++id) {
        std::snprintf(name, sizeof(name), "round_%04zu_client_%03d.fbaf", r, id);
        fs::path p = dir / "checkpoints" / name;
        if (fs::exists(p)) rr.client_models.push_back({id, load_checkpoint(p.string())});
      }
      run.retained.push_back(std::move(rr));
    }
  }
  return run;
}

std::string cmd_analyze(const std::string& run_dir, const std::vector<std::string>& checks,
                        const std::string& paired_run_dir) {
  LoadedRun run = load_run(run_dir);
  nlohmann::json report = nlohmann::json::array();

  std::optional<ParamVector> foundation;
  if (run.config.strategy.foundation != "none")
    foundation = load_checkpoint(run.config.strategy.foundation_checkpoint);

  std::optional<OptimumProxy> proxy;
  auto need_w_star = [&]() -> const OptimumProxy& {
    if (!proxy) {
      BuiltData data = build_dataset(run.config);
      proxy = train_optimum_proxy(build_schema(run.config), data.train, run.config.training.lr,
                                  20000, 1e-4, run.config.run.master_seed ^ 0x57A5);
      if (proxy->grad_norm >= 1e-4)
        throw AnalysisPreconditionError(
            "analyze: the centralized reference optimum stalled at gradient norm " +
            std::to_string(proxy->grad_norm) +
            "; the objective must reach gradient norm < 1e-4 (use a smooth model and "
            "non-separable data)");
    }
    return *proxy;
  };

  for (const auto& check : checks) {
    if (check == "prop1") {
      if (!foundation)
        throw AnalysisPreconditionError("analyze: prop1 needs a foundation checkpoint");
      if (run.retained.empty())
        throw AnalysisPreconditionError(
            "analyze: prop1 needs retained rounds; rerun with retain_client_models = true");
      const auto& proxy_ref = need_w_star();
      nlohmann::json rows = nlohmann::json::array();
      int satisfied = 0, applicable = 0;
      for (std::size_t r = 0; r < run.retained.size(); ++r) {
        double tau = run.records[r].tau;
        if (tau <= 0.0 || run.records[r].alpha_tau <= 0.0) continue;
        double alpha = run.records[r].alpha_tau / tau;
        AlphaBound bound =
            prop1_alpha_bound(run.retained[r].w_prime, *foundation, proxy_ref.w_star, tau);
        bool within = bound.unconstrained || alpha < bound.bound;
        if (!within) continue;
        ++applicable;
        bool improved = prop1_improvement_check(run.retained[r].w_prime, *foundation,
                                                proxy_ref.w_star, alpha, tau);
        if (improved) ++satisfied;
        rows.push_back({{"t", run.records[r].t},
                        {"beta", bound.beta},
                        {"gamma", bound.gamma},
                        {"unconstrained", bound.unconstrained},
                        {"improved", improved}});
      }
      report.push_back({{"check", "prop1"},
                        {"applicable_rounds", applicable},
                        {"improved_rounds", satisfied},
                        {"pass", applicable == satisfied},
                        {"rounds", rows}});
    } else if (check == "prop2") {
      if (!foundation)
        throw AnalysisPreconditionError("analyze: prop2 needs a foundation checkpoint");
      if (run.retained.empty() || run.retained.front().client_models.empty())
        throw AnalysisPreconditionError(
            "analyze: prop2 needs retained client models; rerun with retain_client_models = true");
      const auto& proxy_ref = need_w_star();
      auto rows = prop2_bound_check(run.records, run.retained, proxy_ref.w_star, *foundation);
      bool all_hold = true;
      nlohmann::json jrows = nlohmann::json::array();
      for (const auto& row : rows) {
        all_hold = all_hold && row.holds;
        jrows.push_back({{"t", row.t},
                         {"lhs", row.lhs},
                         {"rhs", row.rhs},
                         {"delta_t", row.delta_t},
                         {"holds", row.holds},
                         {"proximity", row.proximity}});
      }
      report.push_back({{"check", "prop2"},
                        {"w_star_grad_norm", proxy_ref.grad_norm},
                        {"pass", all_hold},
                        {"rounds", jrows}});
    } else if (check == "dist") {
      if (!foundation)
        throw AnalysisPreconditionError("analyze: dist needs a foundation checkpoint");
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& r : run.records)
        rows.push_back({{"t", r.t}, {"dist", r.dist_found}});
      DistResult final_dist = dist_metric(run.final_model, *foundation);
      report.push_back({{"check", "dist"},
                        {"final_dist", final_dist.dist},
                        {"excluded_elements", final_dist.excluded},
                        {"rounds", rows}});
    } else if (check == "noise") {
      if (!foundation)
        throw AnalysisPreconditionError("analyze: noise needs a foundation checkpoint");
      BuiltData data = build_dataset(run.config);
      std::vector<double> rates = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.27, 1.6, 2.0};
      auto curve =
          noise_robustness(*foundation, rates, data.test, run.config.run.master_seed ^ 0x401);
      nlohmann::json jcurve = nlohmann::json::array();
      for (const auto& [rate, acc] : curve) jcurve.push_back({{"rate", rate}, {"accuracy", acc}});
      report.push_back({{"check", "noise"}, {"curve", jcurve}});
    } else if (check == "extraction") {
      if (!foundation)
        throw AnalysisPreconditionError("analyze: extraction needs a foundation checkpoint");
      if (run.retained.empty())
        throw AnalysisPreconditionError(
            "analyze: extraction needs retained rounds; rerun with retain_client_models = true");
      if (paired_run_dir.empty())
        throw AnalysisPreconditionError(
            "analyze: extraction needs --paired-run pointing at the static-alpha twin");
      LoadedRun paired = load_run(paired_run_dir);
      if (paired.retained.empty())
        throw AnalysisPreconditionError("analyze: paired run has no retained rounds");
      const LoadedRun& static_run = paired.config.strategy.static_alpha ? paired : run;
      const LoadedRun& random_run = paired.config.strategy.static_alpha ? run : paired;
      auto static_result = extraction_attack(
          adversary_view(static_run.records, static_run.retained), *foundation);
      auto random_result = extraction_attack(
          adversary_view(random_run.records, random_run.retained), *foundation);
      report.push_back({{"check", "extraction"},
                        {"recovery_error_static", static_result.recovery_error},
                        {"recovery_error_random", random_result.recovery_error},
                        {"pass", static_result.recovery_error < 1e-4 &&
                                     random_result.recovery_error > 0.5}});
    } else if (check == "chi") {
      if (!foundation)
        throw AnalysisPreconditionError("analyze: chi needs a foundation checkpoint");
      if (run.retained.empty())
        throw AnalysisPreconditionError(
            "analyze: chi needs retained rounds; rerun with retain_client_models = true");
      BuiltData data = build_dataset(run.config);
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t r = 0; r < run.retained.size(); ++r) {
        LossGrad lg =
            loss_and_grad(run.retained[r].w_before, data.train.features, data.train.labels);
        ChiDiag d = chi_diagnostic(run.retained[r].w_prime, *foundation,
                                   run.records[r].alpha_tau, lg.grad);
        rows.push_back({{"t", run.records[r].t},
                        {"chi_norm2", d.chi_norm2},
                        {"inner_grad_chi", d.inner_grad_chi},
                        {"inner_sign", d.inner_grad_chi > 0 ? 1 : (d.inner_grad_chi < 0 ? -1 : 0)}});
      }
      report.push_back({{"check", "chi"}, {"rounds", rows}});
    } else if (check == "mac") {
      BuiltData data = build_dataset(run.config);
      Partition partition = build_partition(run.config, data);
      auto schema = build_schema(run.config);
      RngStream master(run.config.run.master_seed);
      RngStream sample_rng = master.child({0x5A, 0});
      auto sampled = sample_clients(run.config.partition.num_clients,
                                    run.config.training.participation, sample_rng);
      std::vector<Eigen::Index> sizes;
      for (int id : sampled)
        sizes.push_back(partition.client_shards[static_cast<std::size_t>(id)].train.size());
      MacReport mac = mac_report(*schema, sizes, run.config.training.epochs,
                                 static_cast<int>(run.records.size()));
      report.push_back({{"check", "mac"},
                        {"macs_per_sample", mac.macs_per_sample},
                        {"mean_macs", mac.mean_macs},
                        {"median_n", mac.median_n},
                        {"mace", mac.mace},
                        {"tmac", mac.tmac}});
    } else {
      throw AnalysisPreconditionError("analyze: unknown check '" + check + "'");
    }
  }
  std::string json = report.dump(2);
  fs::create_directories(fs::path(run_dir) / "analysis");
  write_file(fs::path(run_dir) / "analysis" / "report.json", json);
  return json;
}

}  // namespace fedbaf
