#include "fedbaf/federation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <iostream>
#include <numeric>

#include "fedbaf/analysis.hpp"

namespace fedbaf {

std::vector<int> sample_clients(int total_clients, double participation, RngStream& rng) {
  if (total_clients < 1) throw std::invalid_argument("sample_clients: need at least one client");
  if (participation <= 0.0 || participation > 1.0)
    throw std::invalid_argument("sample_clients: participation in (0, 1]");
  int m = std::max(static_cast<int>(std::floor(participation * total_clients)), 1);
  std::vector<int> ids(static_cast<std::size_t>(total_clients));
  std::iota(ids.begin(), ids.end(), 0);
  rng.shuffle(ids);
  ids.resize(static_cast<std::size_t>(m));
  std::sort(ids.begin(), ids.end());
  return ids;
}

ParamVector client_update(const ParamVector& global, const ClientState& client,
                          const AttackPlan& plan, double lr, int batch_size, RngStream rng,
                          bool use_mask) {
  if (!client.shard || client.shard->train.size() == 0)
    throw std::invalid_argument("client_update: client shard is empty");

  const bool malicious = plan.is_malicious(client.id);
  int epochs = client.local_epochs;
  if (malicious && epochs > 0)
    epochs = std::max(1, static_cast<int>(std::lround(plan.lambda * epochs)));

  Dataset corrupted;
  const Dataset* data = &client.shard->train;
  if (malicious) {
    corrupted = corrupt_labels(client.shard->train, rng.child({0xA77}).seed());
    data = &corrupted;
  }

  const ClassMask* mask = use_mask ? &client.shard->mask : nullptr;
  ProxTerm prox{client.mu, &global};
  const ProxTerm* prox_ptr = client.mu > 0.0 ? &prox : nullptr;

  ParamVector w = global;
  for (int e = 0; e < epochs; ++e) {
    RngStream epoch_rng = rng.child({0xE0, static_cast<std::uint64_t>(e)});
    w = sgd_epoch(w, *data, lr, batch_size, epoch_rng, mask, prox_ptr);
  }
  return w;
}

ParamVector aggregate_base(const std::vector<std::pair<ParamVector, Eigen::Index>>& updates,
                           const ParamVector& global, const AggregationStrategy& strategy) {
  if (updates.empty()) throw std::invalid_argument("aggregate_base: no updates");
  double total = 0.0;
  for (const auto& [w, n] : updates) {
    require_same_layout(w, global);
    total += static_cast<double>(n);
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(global.size());
  for (const auto& [w, n] : updates) acc += (static_cast<double>(n) / total) * w.values();
  if (strategy.kind == BaseAlgorithm::kFedProx && strategy.fedprox_server_term &&
      strategy.mu != 0.0) {
    Eigen::VectorXd drift = Eigen::VectorXd::Zero(global.size());
    for (const auto& [w, n] : updates)
      drift += (static_cast<double>(n) / total) * (w.values() - global.values());
    acc -= strategy.mu * drift;
  }
  return ParamVector(global.schema_ptr(), std::move(acc));
}

double compute_tau(const ParamVector& w_prime, const ParamVector& w_prev, int t) {
  ParamVector diff = sub(normalize(w_prime), normalize(w_prev));
  return norm2(diff) / std::sqrt(static_cast<double>(t) + 1.0);
}

double draw_alpha(double psi, double tau0, RngStream& rng) {
  if (tau0 <= 0.0) throw DegenerateRoundError("draw_alpha: tau_0 is zero (degenerate first round)");
  return (psi / tau0) * rng.uniform(1.0, 2.0);
}

ParamVector fedbaf_bias(const ParamVector& w_prime, const ParamVector& w_pre, double alpha_tau,
                        bool* any_compatible) {
  ParamVector out = w_prime;
  bool found = false;
  const auto& schema = w_prime.schema();
  for (std::size_t i = 0; i < schema.layers.size(); ++i) {
    const auto& layer = schema.layers[i];
    int j = w_pre.schema().find_layer(layer.name);
    if (j < 0 || !layer.same_shape(w_pre.schema().layers[static_cast<std::size_t>(j)])) continue;
    found = true;
    auto dst = out.layer(i);
    auto pre = w_pre.layer(static_cast<std::size_t>(j));
    dst = (dst + alpha_tau * pre) / (1.0 + alpha_tau);
  }
  if (any_compatible) *any_compatible = found;
  return out;
}

ChiDiag chi_diagnostic(const ParamVector& w_prime, const ParamVector& w_pre, double alpha_tau,
                       const ParamVector& grad_f) {
  Eigen::VectorXd chi =
      alpha_tau * (w_prime.values() - (1.0 - alpha_tau) * w_pre.values());
  ChiDiag d;
  d.chi_norm2 = chi.squaredNorm();
  d.inner_grad_chi = grad_f.values().dot(chi);
  return d;
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

RunResult run_experiment(const FederationRunSpec& spec) {
  if (!spec.partition) throw std::invalid_argument("run_experiment: partition is required");
  const Partition& partition = *spec.partition;
  const int K = static_cast<int>(partition.client_shards.size());
  const bool fedbaf_on = spec.mode == FoundationMode::kFedBaF;
  if ((fedbaf_on || spec.mode == FoundationMode::kWeightInit) && !spec.foundation)
    throw std::invalid_argument("run_experiment: foundation checkpoint required for this mode");

  RngStream master(spec.master_seed);
  RngStream init_rng = master.child({0x1717});
  RngStream alpha_rng = master.child({0xA1FA});  // server-private, never exported

  ParamVector w = init_weights(spec.schema, init_rng);
  if (spec.mode == FoundationMode::kWeightInit) {
    // Foundation weights on compatible layers, fresh random init elsewhere.
    for (std::size_t i = 0; i < spec.schema->layers.size(); ++i) {
      const auto& layer = spec.schema->layers[i];
      int j = spec.foundation->schema().find_layer(layer.name);
      if (j >= 0 && layer.same_shape(spec.foundation->schema().layers[static_cast<std::size_t>(j)]))
        w.layer(i) = spec.foundation->layer(static_cast<std::size_t>(j));
    }
  }

  RunResult result;
  result.initial = w;

  const std::optional<FedBaFParams>& fb = spec.strategy.fedbaf;
  double alpha0 = 0.0;
  bool warned_no_compat = false;
  bool layouts_match =
      spec.foundation && spec.foundation->schema().same_layout(*spec.schema);

  for (int t = 0; t < spec.rounds; ++t) {
    RngStream sample_rng = master.child({0x5A, static_cast<std::uint64_t>(t)});
    std::vector<int> sampled = sample_clients(K, spec.participation, sample_rng);

    // Client updates are independent; streams are keyed by (round, client)
    // so the result does not depend on the execution schedule.
    std::vector<std::pair<ParamVector, Eigen::Index>> updates(sampled.size());
    std::vector<double> local_acc(sampled.size(), 0.0);
    auto run_client = [&](std::size_t i) {
      int id = sampled[i];
      const ClientShard& shard = partition.client_shards[static_cast<std::size_t>(id)];
      ClientState state;
      state.id = id;
      state.shard = &shard;
      state.honest = !spec.attack.is_malicious(id);
      state.local_epochs = spec.epochs;
      state.mu = spec.strategy.kind == BaseAlgorithm::kFedProx && !spec.strategy.fedprox_server_term
                     ? spec.strategy.mu
                     : 0.0;
      RngStream client_rng =
          master.child({0xC7, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(id)});
      ParamVector local = client_update(w, state, spec.attack, spec.lr, spec.batch_size,
                                        client_rng, spec.non_iid_masking);
      const ClassMask* mask = spec.non_iid_masking ? &shard.mask : nullptr;
      local_acc[i] = shard.local_test.size() > 0 ? evaluate(local, shard.local_test, mask) : 0.0;
      updates[i] = {std::move(local), shard.train.size()};
    };
    if (spec.parallel_clients && sampled.size() > 1) {
      std::vector<std::future<void>> futures;
      futures.reserve(sampled.size());
      for (std::size_t i = 0; i < sampled.size(); ++i)
        futures.push_back(std::async(std::launch::async, run_client, i));
      for (auto& f : futures) f.get();
    } else {
      for (std::size_t i = 0; i < sampled.size(); ++i) run_client(i);
    }

    ParamVector w_prime = aggregate_base(updates, w, spec.strategy);

    RoundRecord rec;
    rec.t = t;
    rec.sampled = sampled;
    rec.norm_delta = norm2(sub(w_prime, w));

    std::vector<double> honest_accs, all_accs;
    for (std::size_t i = 0; i < sampled.size(); ++i) {
      all_accs.push_back(local_acc[i]);
      if (!spec.attack.is_malicious(sampled[i])) honest_accs.push_back(local_acc[i]);
    }
    rec.local_acc_honest = mean_of(honest_accs);
    rec.local_acc_all = mean_of(all_accs);

    ParamVector w_next = w_prime;
    if (fedbaf_on) {
      rec.tau = compute_tau(w_prime, w, t);
      rec.tau_numerator = rec.tau * std::sqrt(static_cast<double>(t) + 1.0);
      if (t == 0) {
        result.tau0 = rec.tau;
        if (result.tau0 <= 0.0)
          throw DegenerateRoundError(
              "run_experiment: tau_0 = 0 at round 0; clients returned the initial model");
      }
      double u_alpha = draw_alpha(fb->psi, result.tau0, alpha_rng);
      if (t == 0) alpha0 = u_alpha;
      rec.alpha = fb->static_alpha ? alpha0 : u_alpha;
      rec.alpha_tau = rec.alpha * rec.tau;

      bool compatible = false;
      w_next = fedbaf_bias(w_prime, fb->foundation, rec.alpha_tau, &compatible);
      if (!compatible && !warned_no_compat) {
        std::cerr << "warning: foundation model shares no compatible layers; "
                     "FedBaF degenerates to the base algorithm\n";
        warned_no_compat = true;
      }

      if (spec.chi_diagnostic && spec.pooled_train && layouts_match) {
        LossGrad lg = loss_and_grad(w, spec.pooled_train->features, spec.pooled_train->labels);
        rec.chi = chi_diagnostic(w_prime, fb->foundation, rec.alpha_tau, lg.grad);
      }
    }

    rec.norm_w = norm2(w_next);
    rec.global_acc = evaluate(w_next, partition.global_test);
    if (spec.foundation)
      rec.dist_found = dist_metric(w_next, *spec.foundation).dist;

    if (spec.retain_rounds) {
      RetainedRound rr;
      rr.w_before = w;
      rr.w_prime = w_prime;
      rr.w_after = w_next;
      for (std::size_t i = 0; i < sampled.size(); ++i)
        rr.client_models.push_back({sampled[i], updates[i].first});
      result.retained.push_back(std::move(rr));
    }

    result.records.push_back(std::move(rec));
    w = std::move(w_next);
  }
  result.final_model = w;
  return result;
}

std::string round_log_csv(const std::vector<RoundRecord>& records, bool debug_alpha) {
  std::string out = "t,tau,alpha_tau,global_acc,local_acc_honest,local_acc_all,norm_w,"
                    "norm_delta,dist_found";
  if (debug_alpha) out += ",alpha";
  out += "\n";
  char buf[512];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.t,
                  r.tau, r.alpha_tau, r.global_acc, r.local_acc_honest, r.local_acc_all, r.norm_w,
                  r.norm_delta, r.dist_found);
    out += buf;
    if (debug_alpha) {
      std::snprintf(buf, sizeof(buf), ",%.17g", r.alpha);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace fedbaf
