#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedbaf/analysis.hpp"
#include "fedbaf/config.hpp"
#include "fedbaf/federation.hpp"

namespace fedbaf {

/// Raised when a run aborts mid-flight (NaN loss, tau_0 = 0); the CLI maps
/// it to exit code 3. Analysis preconditions map to code 4.
struct AnalysisPreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BuiltData {
  Dataset train;
  Dataset test;
  Eigen::MatrixXd means;  // empty for csv data
};

BuiltData build_dataset(const ExperimentConfig& config);
std::shared_ptr<const ModelSchema> build_schema(const ExperimentConfig& config);
Partition build_partition(const ExperimentConfig& config, const BuiltData& data);
AttackPlan build_attack_plan(const ExperimentConfig& config);

/// One deterministic trial; seed_override replaces [run] master_seed.
RunResult execute_run(const ExperimentConfig& config,
                      std::optional<std::uint64_t> seed_override = std::nullopt);

struct PretrainOutcome {
  std::string checkpoint_path;
  double train_acc = 0.0;
  double test_acc = 0.0;
};

PretrainOutcome cmd_pretrain(const ExperimentConfig& config, const std::string& out_override = "");

struct TrialOutcome {
  std::uint64_t seed = 0;
  double final_acc = 0.0;
  double best_acc = 0.0;
  int rounds_to_threshold = -1;  // -1 when never reached
  std::string dir;
};

struct RunOutcome {
  std::vector<TrialOutcome> trials;
  double best_final_acc = 0.0;
  std::string out_dir;
};

/// Executes `trials` runs varying only the master seed, persisting each
/// trial's rounds.csv, checkpoints and summary under out_dir.
RunOutcome cmd_run(const ExperimentConfig& config, const std::string& out_dir, int trials = 1,
                   std::optional<std::uint64_t> seed_override = std::nullopt,
                   bool debug_alpha_override = false);

struct ComparisonArm {
  std::string label;
  double final_acc = 0.0;      // best of trials
  double best_acc = 0.0;       // best round accuracy, best of trials
  double local_acc_honest = 0.0;
  int rounds_to_threshold = -1;
  MacReport mac;
};

struct ComparisonReport {
  std::vector<ComparisonArm> arms;
  double threshold = 0.0;
  std::string data_hash;
  std::string text;  // human-readable table
  std::string json;
};

ComparisonReport cmd_compare(const std::vector<ExperimentConfig>& configs, double threshold,
                             int trials, const std::string& out_dir);

/// Artifacts reloaded from a completed run directory.
struct LoadedRun {
  ExperimentConfig config;
  std::vector<RoundRecord> records;
  std::vector<RetainedRound> retained;  // empty unless the run retained rounds
  ParamVector final_model;
  ParamVector initial;
};

LoadedRun load_run(const std::string& run_dir);

/// Executes the selected checks (prop1, prop2, dist, noise, extraction, chi,
/// mac) over a recorded run; extraction needs paired_run_dir pointing at the
/// static-alpha twin. Returns the report JSON.
std::string cmd_analyze(const std::string& run_dir, const std::vector<std::string>& checks,
                        const std::string& paired_run_dir = "");

std::vector<RoundRecord> parse_round_log_csv(const std::string& text);

}  // namespace fedbaf
