#pragma once

#include <cstdint>
#include <string>

#include "fedbaf/data.hpp"
#include "fedbaf/federation.hpp"

namespace fedbaf {

/// Raised for malformed or infeasible configuration; the CLI maps it to
/// exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataSpec {
  std::string kind = "gaussian";  // gaussian | csv
  int num_classes = 10;
  int dim = 20;
  int n_per_class = 100;
  int test_n_per_class = 50;
  double spread = 1.0;
  double mean_scale = 1.0;
  double mean_offset = 0.0;  // common shift added to every mean coordinate
  std::uint64_t mean_seed = 1;
  std::uint64_t seed = 2;
  std::string csv_train;
  std::string csv_test;

  bool operator==(const DataSpec&) const = default;
};

struct PartitionSpec {
  int num_clients = 10;
  std::string mode = "iid";  // iid | noniid
  double class_fraction = 0.2;
  std::uint64_t seed = 3;

  bool operator==(const PartitionSpec&) const = default;
};

struct ModelSpec {
  std::string kind = "mlp";  // linear | mlp
  int hidden = 32;

  bool operator==(const ModelSpec&) const = default;
};

struct TrainingSpec {
  int rounds = 30;
  int epochs = 1;
  double lr = 0.05;
  int batch = 32;
  double participation = 1.0;

  bool operator==(const TrainingSpec&) const = default;
};

struct StrategySpec {
  std::string algorithm = "fedavg";  // fedavg | fedprox
  double mu = 0.0;
  bool fedprox_server_term = false;
  std::string foundation = "none";  // none | fedbaf | weight_init
  double psi = 0.0;
  std::string foundation_checkpoint;
  bool static_alpha = false;

  bool operator==(const StrategySpec&) const = default;
};

struct AttackSpec {
  double zeta = 0.0;
  double lambda = 1.0;
  std::uint64_t seed = 4;

  bool operator==(const AttackSpec&) const = default;
};

struct PretrainSpec {
  int n_per_class = 100;
  double spread = 1.0;
  double mean_jitter = 0.0;  // Gaussian shift of the class means
  std::uint64_t seed = 5;
  int epochs = 50;
  double lr = 0.05;
  int batch = 32;
  std::string out = "foundation.fbaf";

  bool operator==(const PretrainSpec&) const = default;
};

struct RunSettings {
  std::uint64_t master_seed = 42;
  std::string out_dir = "out";
  bool retain_client_models = false;
  bool debug_alpha = false;
  bool chi_diagnostic = false;
  int checkpoint_every = 0;

  bool operator==(const RunSettings&) const = default;
};

struct ExperimentConfig {
  DataSpec data;
  PartitionSpec partition;
  ModelSpec model;
  TrainingSpec training;
  StrategySpec strategy;
  AttackSpec attack;
  PretrainSpec pretrain;
  RunSettings run;

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& config);

/// Feasibility checks beyond syntax: ranges, mode combinations, referenced
/// files. Throws ConfigError.
void validate_config(const ExperimentConfig& config, bool require_checkpoint = true);

}  // namespace fedbaf
