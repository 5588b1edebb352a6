#pragma once

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedbaf/data.hpp"
#include "fedbaf/model.hpp"
#include "fedbaf/param_vector.hpp"

namespace fedbaf {

struct FedBaFParams {
  double psi = 0.0;
  ParamVector foundation;
  bool static_alpha = false;  // reuse the round-0 draw every round (attack study)
};

enum class BaseAlgorithm { kFedAvg, kFedProx };

struct AggregationStrategy {
  BaseAlgorithm kind = BaseAlgorithm::kFedAvg;
  double mu = 0.0;                  // FedProx proximal coefficient
  bool fedprox_server_term = false; // apply the server-side -mu*(w_k - w_t) correction
  std::optional<FedBaFParams> fedbaf;
};

struct ChiDiag {
  double chi_norm2 = 0.0;       // ||chi_t||^2
  double inner_grad_chi = 0.0;  // grad F(w_t)^T chi_t
};

struct RoundRecord {
  int t = 0;
  std::vector<int> sampled;
  double tau = 0.0;
  double alpha = 0.0;      // redacted from exports unless debug_alpha
  double alpha_tau = 0.0;
  double global_acc = 0.0;
  double local_acc_honest = 0.0;
  double local_acc_all = 0.0;
  double norm_w = 0.0;
  double norm_delta = 0.0;       // ||w'_{t+1} - w_t||
  double tau_numerator = 0.0;    // tau_t * sqrt(t+1)
  double dist_found = std::numeric_limits<double>::quiet_NaN();
  std::optional<ChiDiag> chi;
};

/// Uniform subset of size max(floor(C*K), 1), without replacement.
std::vector<int> sample_clients(int total_clients, double participation, RngStream& rng);

struct ClientState {
  int id = 0;
  const ClientShard* shard = nullptr;
  bool honest = true;
  int local_epochs = 1;
  double mu = 0.0;  // FedProx proximal coefficient, 0 for FedAvg
};

/// Local training for one round: a copy of the global model trained for the
/// client's epoch count (scaled by lambda for malicious clients, who also
/// train on label-shuffled data).
ParamVector client_update(const ParamVector& global, const ClientState& client,
                          const AttackPlan& plan, double lr, int batch_size, RngStream rng,
                          bool use_mask);

/// Sample-count-weighted mean; FedProx optionally subtracts the weighted mean
/// of mu * (w_k - w_t) when the server-side term is selected.
ParamVector aggregate_base(const std::vector<std::pair<ParamVector, Eigen::Index>>& updates,
                           const ParamVector& global, const AggregationStrategy& strategy);

/// tau_t = || w'/||w'|| - w_t/||w_t|| || / sqrt(t+1), eps-guarded.
double compute_tau(const ParamVector& w_prime, const ParamVector& w_prev, int t);

/// alpha_t = (psi / tau0) * U(1, 2) from the server-private stream.
double draw_alpha(double psi, double tau0, RngStream& rng);

/// Line-by-line bias step: compatible layers (name+shape) move to
/// (w' + a*t*w_pre) / (1 + a*t); incompatible layers pass through unchanged.
/// Returns false in *any_compatible when the schemas share no layer.
ParamVector fedbaf_bias(const ParamVector& w_prime, const ParamVector& w_pre, double alpha_tau,
                        bool* any_compatible = nullptr);

enum class FoundationMode { kNone, kFedBaF, kWeightInit };

struct FederationRunSpec {
  const Partition* partition = nullptr;
  AttackPlan attack;
  AggregationStrategy strategy;
  FoundationMode mode = FoundationMode::kNone;
  std::optional<ParamVector> foundation;  // required for kFedBaF / kWeightInit
  std::shared_ptr<const ModelSchema> schema;
  int rounds = 0;
  int epochs = 1;
  double lr = 0.05;
  int batch_size = 32;
  double participation = 1.0;
  bool non_iid_masking = false;
  std::uint64_t master_seed = 0;
  bool retain_rounds = false;    // keep per-round client models and w'/w
  bool chi_diagnostic = false;   // needs foundation + pooled training data
  const Dataset* pooled_train = nullptr;  // for the chi full-batch gradient
  bool parallel_clients = true;
};

struct RetainedRound {
  ParamVector w_before;  // w_t
  ParamVector w_prime;   // w'_{t+1}
  ParamVector w_after;   // w_{t+1}
  std::vector<std::pair<int, ParamVector>> client_models;
};

struct RunResult {
  std::vector<RoundRecord> records;
  ParamVector initial;
  ParamVector final_model;
  double tau0 = 0.0;
  std::vector<RetainedRound> retained;
};

/// Thrown when round 0 produces tau_0 = 0: psi/tau_0 is undefined and the
/// experiment is considered broken rather than recoverable.
struct DegenerateRoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunResult run_experiment(const FederationRunSpec& spec);

/// chi_t = alpha_tau * (w'_{t+1} - (1 - alpha_tau) * w_pre), with the inner
/// product against the full-batch global gradient at w_t.
ChiDiag chi_diagnostic(const ParamVector& w_prime, const ParamVector& w_pre, double alpha_tau,
                       const ParamVector& grad_f);

/// CSV with header t,tau,alpha_tau,global_acc,local_acc_honest,local_acc_all,
/// norm_w,norm_delta,dist_found (alpha itself redacted unless debug_alpha).
std::string round_log_csv(const std::vector<RoundRecord>& records, bool debug_alpha = false);

}  // namespace fedbaf
