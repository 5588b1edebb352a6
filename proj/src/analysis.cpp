#include "fedbaf/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fedbaf/federation.hpp"

namespace fedbaf {

OptimumProxy train_optimum_proxy(std::shared_ptr<const ModelSchema> schema, const Dataset& data,
                                 double lr, int max_iters, double grad_tol, std::uint64_t seed) {
  RngStream rng(seed);
  ParamVector w = init_weights(schema, rng);

  // SGD warm start, then full-batch descent with a crude adaptive step.
  for (int e = 0; e < 40; ++e) {
    RngStream epoch_rng = rng.child({0xE0, static_cast<std::uint64_t>(e)});
    w = sgd_epoch(w, data, lr, 32, epoch_rng);
  }

  OptimumProxy proxy;
  proxy.algorithm = "sgd-warmstart+full-batch-gd";
  double step = lr;
  LossGrad lg = loss_and_grad(w, data.features, data.labels);
  int it = 0;
  for (; it < max_iters; ++it) {
    if (norm2(lg.grad) < grad_tol) break;
    ParamVector w_try(w.schema_ptr(), w.values() - step * lg.grad.values());
    LossGrad lg_try = loss_and_grad(w_try, data.features, data.labels);
    if (lg_try.loss <= lg.loss) {
      w = std::move(w_try);
      lg = std::move(lg_try);
      step = std::min(step * 1.1, 50.0);
    } else {
      step *= 0.5;
      if (step < 1e-14) break;
    }
  }
  proxy.w_star = w;
  proxy.iterations = it;
  proxy.final_loss = lg.loss;
  proxy.grad_norm = norm2(lg.grad);
  return proxy;
}

AlphaBound prop1_alpha_bound(const ParamVector& w_prime, const ParamVector& w_pre,
                             const ParamVector& w_star, double tau) {
  AlphaBound out;
  out.beta = norm2(sub(w_prime, w_star));
  out.gamma = norm2(sub(w_pre, w_star));
  if (out.beta >= out.gamma) {
    out.unconstrained = true;
    return out;
  }
  out.bound = 2.0 * out.beta * out.beta /
              ((out.gamma * out.gamma - out.beta * out.beta) * tau);
  return out;
}

bool prop1_improvement_check(const ParamVector& w_prime, const ParamVector& w_pre,
                             const ParamVector& w_star, double alpha, double tau) {
  ParamVector biased = fedbaf_bias(w_prime, w_pre, alpha * tau);
  return norm2(sub(biased, w_star)) < norm2(sub(w_prime, w_star));
}

std::vector<Prop2Row> prop2_bound_check(const std::vector<RoundRecord>& records,
                                        const std::vector<RetainedRound>& retained,
                                        const ParamVector& w_star, const ParamVector& w_pre,
                                        double tol) {
  if (retained.size() != records.size())
    throw std::runtime_error(
        "prop2_bound_check: per-round client models missing; rerun with retain_client_models");
  double gamma = norm2(sub(w_pre, w_star));
  std::vector<Prop2Row> out;
  for (std::size_t r = 0; r < records.size(); ++r) {
    Prop2Row row;
    row.t = records[r].t;
    row.lhs = norm2(sub(retained[r].w_after, w_star));
    row.delta_t = 0.0;
    for (const auto& [id, wk] : retained[r].client_models)
      row.delta_t = std::max(row.delta_t, norm2(sub(wk, w_star)));
    double at = records[r].alpha_tau;
    row.rhs = (row.delta_t + at * gamma) / (1.0 + at);
    row.holds = row.lhs <= row.rhs + tol;
    row.proximity = gamma <= row.delta_t;
    out.push_back(row);
  }
  return out;
}

DistResult dist_metric(const ParamVector& w_global, const ParamVector& w_pre, double eps) {
  DistResult out;
  double sum = 0.0;
  const auto& schema = w_global.schema();
  for (std::size_t i = 0; i < schema.layers.size(); ++i) {
    const auto& layer = schema.layers[i];
    int j = w_pre.schema().find_layer(layer.name);
    if (j < 0 || !layer.same_shape(w_pre.schema().layers[static_cast<std::size_t>(j)])) continue;
    auto g = w_global.layer(i);
    auto p = w_pre.layer(static_cast<std::size_t>(j));
    for (Eigen::Index e = 0; e < g.size(); ++e) {
      if (std::abs(g[e]) < eps) {
        ++out.excluded;
        continue;
      }
      sum += std::abs(g[e] - p[e]) / std::abs(g[e]);
      ++out.counted;
    }
  }
  if (out.counted == 0 && out.excluded == 0)
    throw std::runtime_error("dist_metric: schemas share no compatible parameters");
  out.dist = out.counted > 0 ? sum / static_cast<double>(out.counted) : 0.0;
  return out;
}

std::vector<std::pair<double, double>> noise_robustness(const ParamVector& w_pre,
                                                        const std::vector<double>& error_rates,
                                                        const Dataset& eval_set,
                                                        std::uint64_t seed) {
  std::vector<std::pair<double, double>> curve;
  RngStream rng(seed);
  for (std::size_t r = 0; r < error_rates.size(); ++r) {
    double rate = error_rates[r];
    if (rate < 0.0) throw std::invalid_argument("noise_robustness: negative error rate");
    ParamVector noisy = w_pre;
    RngStream rate_rng = rng.child({static_cast<std::uint64_t>(r)});
    for (std::size_t i = 0; i < w_pre.schema().layers.size(); ++i) {
      auto seg = noisy.layer(i);
      Eigen::VectorXd g(seg.size());
      for (Eigen::Index e = 0; e < g.size(); ++e) g[e] = rate_rng.gaussian();
      double gn = g.norm();
      double target = rate * w_pre.layer(i).norm();
      if (gn > 0.0 && target > 0.0) seg += (target / gn) * g;
    }
    curve.push_back({rate, evaluate(noisy, eval_set)});
  }
  return curve;
}

AdversaryView adversary_view(const std::vector<RoundRecord>& records,
                             const std::vector<RetainedRound>& retained) {
  if (retained.size() != records.size())
    throw std::runtime_error("adversary_view: retained rounds missing; enable retention");
  AdversaryView view;
  for (std::size_t r = 0; r < records.size(); ++r) {
    view.tau.push_back(records[r].tau);
    view.w_global.push_back(retained[r].w_after);
    view.w_prime.push_back(retained[r].w_prime);
  }
  return view;
}

namespace {

ParamVector reconstruct_w_pre(const AdversaryView& view, double alpha, int t) {
  double at = alpha * view.tau[static_cast<std::size_t>(t)];
  Eigen::VectorXd w_hat =
      ((1.0 + at) * view.w_global[static_cast<std::size_t>(t)].values() -
       view.w_prime[static_cast<std::size_t>(t)].values()) /
      at;
  return ParamVector(view.w_global[static_cast<std::size_t>(t)].schema_ptr(), std::move(w_hat));
}

}  // namespace

ExtractionResult extraction_attack(const AdversaryView& view, const ParamVector& true_w_pre) {
  int t = -1;
  for (std::size_t r = 0; r + 1 < view.tau.size(); ++r) {
    if (view.tau[r] > 1e-12 && view.tau[r + 1] > 1e-12) {
      t = static_cast<int>(r);
      break;
    }
  }
  if (t < 0) throw std::runtime_error("extraction_attack: no consecutive rounds with tau > 0");

  // The residual between the two single-round reconstructions is affine in
  // x = 1/alpha: diff(x) = A + x*B. Bisection on the signed derivative of
  // ||diff||^2 finds the residual-norm minimizer.
  auto ts = static_cast<std::size_t>(t);
  Eigen::VectorXd A = view.w_global[ts].values() - view.w_global[ts + 1].values();
  Eigen::VectorXd B =
      (view.w_global[ts].values() - view.w_prime[ts].values()) / view.tau[ts] -
      (view.w_global[ts + 1].values() - view.w_prime[ts + 1].values()) / view.tau[ts + 1];

  auto g = [&](double x) { return A.dot(B) + x * B.squaredNorm(); };

  // alpha in (0, 10/tau_t] maps to x = 1/alpha in [tau_t/10, inf).
  double x_lo = view.tau[ts] / 10.0;
  double x_hi = std::max(1.0, 2.0 * x_lo);
  double alpha_hat;
  if (B.squaredNorm() <= 0.0 || g(x_lo) >= 0.0) {
    alpha_hat = 10.0 / view.tau[ts];  // minimizer at (or beyond) the boundary
  } else {
    while (g(x_hi) < 0.0 && x_hi < 1e18) x_hi *= 2.0;
    while (x_hi - x_lo > 1e-10 * std::max(1.0, x_hi)) {
      double mid = 0.5 * (x_lo + x_hi);
      if (g(mid) < 0.0)
        x_lo = mid;
      else
        x_hi = mid;
    }
    alpha_hat = 1.0 / (0.5 * (x_lo + x_hi));
  }

  ExtractionResult out;
  out.alpha_hat = alpha_hat;
  out.round_used = t;
  ParamVector w_hat = reconstruct_w_pre(view, alpha_hat, t);
  out.recovery_error = norm2(sub(w_hat, true_w_pre)) / norm2(true_w_pre);
  return out;
}

ExtractionResult extraction_with_known_alpha(const AdversaryView& view, double alpha,
                                             const ParamVector& true_w_pre, int round) {
  ExtractionResult out;
  out.alpha_hat = alpha;
  out.round_used = round;
  ParamVector w_hat = reconstruct_w_pre(view, alpha, round);
  out.recovery_error = norm2(sub(w_hat, true_w_pre)) / norm2(true_w_pre);
  return out;
}

MacReport mac_report(const ModelSchema& schema, const std::vector<Eigen::Index>& sampled_sizes,
                     int epochs, int rounds_to_threshold) {
  MacReport out;
  out.macs_per_sample = schema.macs_per_sample();
  out.m = sampled_sizes.size();
  if (out.m == 0) return out;

  double sum = 0.0;
  std::vector<std::uint64_t> sizes;
  for (auto n : sampled_sizes) {
    sum += static_cast<double>(out.macs_per_sample) * static_cast<double>(n);
    sizes.push_back(static_cast<std::uint64_t>(n));
  }
  out.mean_macs = sum / static_cast<double>(out.m);
  std::sort(sizes.begin(), sizes.end());
  out.median_n = sizes[(sizes.size() - 1) / 2];  // lower median keeps integers exact
  out.mace = static_cast<std::uint64_t>(
      std::llround(static_cast<double>(out.m) * static_cast<double>(out.median_n) * out.mean_macs));
  out.rounds_to_threshold = rounds_to_threshold;
  out.tmac = static_cast<std::uint64_t>(rounds_to_threshold) * static_cast<std::uint64_t>(epochs) *
             out.mace;
  return out;
}

}  // namespace fedbaf
