#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedbaf/data.hpp"
#include "fedbaf/model.hpp"
#include "fedbaf/param_vector.hpp"

namespace fedbaf {

struct RetainedRound;
struct RoundRecord;

/// Global-objective proxy optimum: centralized training on the pooled data
/// pushed to a small gradient norm.
struct OptimumProxy {
  ParamVector w_star;
  std::string algorithm;
  int iterations = 0;
  double final_loss = 0.0;
  double grad_norm = 0.0;
};

/// Full-batch gradient descent to grad-norm tolerance (default 1e-4), after a
/// seeded SGD warm start.
OptimumProxy train_optimum_proxy(std::shared_ptr<const ModelSchema> schema, const Dataset& data,
                                 double lr, int max_iters, double grad_tol, std::uint64_t seed);

struct AlphaBound {
  bool unconstrained = false;  // beta >= gamma: any alpha > 0 qualifies
  double bound = 0.0;          // 2*beta^2 / ((gamma^2 - beta^2) * tau) otherwise
  double beta = 0.0;           // ||w' - w*||
  double gamma = 0.0;          // ||w_pre - w*||
};

AlphaBound prop1_alpha_bound(const ParamVector& w_prime, const ParamVector& w_pre,
                             const ParamVector& w_star, double tau);

/// Whether the biased model is strictly closer to w* than the unbiased one.
bool prop1_improvement_check(const ParamVector& w_prime, const ParamVector& w_pre,
                             const ParamVector& w_star, double alpha, double tau);

struct Prop2Row {
  int t = 0;
  double lhs = 0.0;       // ||w_t - w*||
  double delta_t = 0.0;   // max_k ||w_t^k - w*||
  double rhs = 0.0;       // (delta_t + alpha*tau*gamma) / (1 + alpha*tau)
  bool holds = false;
  bool proximity = false;  // gamma <= delta_t
};

std::vector<Prop2Row> prop2_bound_check(const std::vector<RoundRecord>& records,
                                        const std::vector<RetainedRound>& retained,
                                        const ParamVector& w_star, const ParamVector& w_pre,
                                        double tol = 1e-9);

struct DistResult {
  double dist = 0.0;          // mean over counted elements of |w_j - p_j| / |w_j|
  std::size_t counted = 0;    // elements with |w_j| >= eps over compatible layers
  std::size_t excluded = 0;   // near-zero denominators skipped
};

DistResult dist_metric(const ParamVector& w_global, const ParamVector& w_pre, double eps = 1e-12);

/// Accuracy curve under per-layer Gaussian weight noise with
/// ||noise|| / ||w_layer|| equal to each error rate.
std::vector<std::pair<double, double>> noise_robustness(const ParamVector& w_pre,
                                                        const std::vector<double>& error_rates,
                                                        const Dataset& eval_set,
                                                        std::uint64_t seed);

struct ExtractionResult {
  double alpha_hat = 0.0;
  double recovery_error = 0.0;  // ||w_pre_hat - w_pre|| / ||w_pre||
  int round_used = 0;
};

/// Adversary view of one run: per-round tau, post-bias global w_{t+1}, and
/// pre-bias aggregate w'_{t+1}. Alpha is never part of the view.
struct AdversaryView {
  std::vector<double> tau;
  std::vector<ParamVector> w_global;
  std::vector<ParamVector> w_prime;
};

AdversaryView adversary_view(const std::vector<RoundRecord>& records,
                             const std::vector<RetainedRound>& retained);

/// Two-round residual attack: root-find the scalar alpha that makes the
/// reconstructed foundation weights agree across consecutive rounds, then
/// invert the bias step. Works when alpha was static; fails with per-round
/// random draws.
ExtractionResult extraction_attack(const AdversaryView& view, const ParamVector& true_w_pre);

/// Sanity ceiling: reconstruction with the true alpha handed to the adversary.
ExtractionResult extraction_with_known_alpha(const AdversaryView& view, double alpha,
                                             const ParamVector& true_w_pre, int round);

struct MacReport {
  std::uint64_t macs_per_sample = 0;  // per forward pass through the schema
  double mean_macs = 0.0;             // mean MACS over the sampled clients
  std::uint64_t median_n = 0;         // median samples per sampled client
  std::uint64_t m = 0;                // participants per round
  std::uint64_t mace = 0;             // m * median_n * mean_macs
  std::uint64_t tmac = 0;             // rounds_to_threshold * E * mace
  int rounds_to_threshold = 0;
};

MacReport mac_report(const ModelSchema& schema, const std::vector<Eigen::Index>& sampled_sizes,
                     int epochs, int rounds_to_threshold);

}  // namespace fedbaf
