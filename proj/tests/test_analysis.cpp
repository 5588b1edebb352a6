#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "fedbaf/analysis.hpp"
#include "fedbaf/federation.hpp"

using namespace fedbaf;

namespace {

std::shared_ptr<const ModelSchema> vec_schema(int n) {
  auto s = std::make_shared<ModelSchema>();
  s->layers.push_back({"w", {static_cast<std::uint32_t>(n)}, static_cast<std::uint64_t>(n)});
  s->num_classes = 2;
  s->input_dim = n;
  return s;
}

ParamVector vec(std::shared_ptr<const ModelSchema> s, std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return ParamVector(std::move(s), v);
}

ParamVector random_vec(std::shared_ptr<const ModelSchema> s, RngStream& rng, double scale) {
  ParamVector v = ParamVector::zeros(s);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.values()[i] = scale * rng.gaussian();
  return v;
}

}  // namespace

TEST_CASE("alpha bound matches the closed form when the aggregate is closer") {
  auto s = vec_schema(2);
  ParamVector w_star = vec(s, {0.0, 0.0});
  ParamVector w_prime = vec(s, {1.0, 0.0});  // beta = 1
  ParamVector w_pre = vec(s, {0.0, 2.0});    // gamma = 2
  AlphaBound b = prop1_alpha_bound(w_prime, w_pre, w_star, 1.0);
  CHECK_FALSE(b.unconstrained);
  CHECK(b.beta == doctest::Approx(1.0));
  CHECK(b.gamma == doctest::Approx(2.0));
  CHECK(b.bound == doctest::Approx(2.0 / 3.0));  // 2*1 / ((4-1)*1)

  // Halving tau doubles the admissible range.
  CHECK(prop1_alpha_bound(w_prime, w_pre, w_star, 0.5).bound == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("alpha is unconstrained when the foundation is at least as close") {
  auto s = vec_schema(2);
  ParamVector w_star = vec(s, {0.0, 0.0});
  ParamVector w_prime = vec(s, {3.0, 0.0});
  ParamVector w_pre = vec(s, {0.0, 1.0});
  AlphaBound b = prop1_alpha_bound(w_prime, w_pre, w_star, 1.0);
  CHECK(b.unconstrained);
  CHECK(prop1_improvement_check(w_prime, w_pre, w_star, 50.0, 1.0));
}

TEST_CASE("any alpha under the bound strictly improves, randomized in 10 dimensions") {
  // The guarantee is derived after dropping the cross term
  // <w' - w*, w_pre - w*>, so it covers configurations where that inner
  // product is non-positive; mirror that here by flipping the foundation
  // offset when the sampled geometry has a positive cross term.
  auto s = vec_schema(10);
  RngStream rng(17);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ParamVector w_star = random_vec(s, rng, 1.0);
    ParamVector d_prime = random_vec(s, rng, 0.3);
    ParamVector d_pre = random_vec(s, rng, 1.5);
    if (dot(d_prime, d_pre) > 0.0) d_pre = scale(d_pre, -1.0);
    ParamVector w_prime = add(w_star, d_prime);
    ParamVector w_pre = add(w_star, d_pre);
    double tau = rng.uniform(0.1, 2.0);
    AlphaBound b = prop1_alpha_bound(w_prime, w_pre, w_star, tau);
    double alpha =
        b.unconstrained ? rng.uniform(0.01, 10.0) : rng.uniform(0.0, 1.0) * 0.999 * b.bound;
    if (alpha <= 0.0) continue;
    CHECK(prop1_improvement_check(w_prime, w_pre, w_star, alpha, tau));
    ++checked;
  }
  CHECK(checked >= 95);
}

TEST_CASE("dist metric is zero on identical weights and scales as expected") {
  auto s = vec_schema(4);
  ParamVector w = vec(s, {1.0, -2.0, 0.5, 3.0});
  DistResult same = dist_metric(w, w);
  CHECK(same.dist == 0.0);
  CHECK(same.counted == 4);
  CHECK(same.excluded == 0);

  // w = c * w_pre elementwise gives |w - p|/|w| = |c - 1|/|c| everywhere.
  for (double c : {2.0, 0.5, -1.0}) {
    DistResult r = dist_metric(scale(w, c), w);
    CHECK(r.dist == doctest::Approx(std::abs(c - 1.0) / std::abs(c)));
  }
}

TEST_CASE("dist metric skips near-zero denominators") {
  auto s = vec_schema(3);
  ParamVector w = vec(s, {1.0, 0.0, 2.0});
  ParamVector p = vec(s, {2.0, 5.0, 1.0});
  DistResult r = dist_metric(w, p);
  CHECK(r.counted == 2);
  CHECK(r.excluded == 1);
  CHECK(r.dist == doctest::Approx((1.0 / 1.0 + 1.0 / 2.0) / 2.0));
}

TEST_CASE("dist metric refuses schemas with no shared layers") {
  auto schema = mlp_schema(3, 2, 2);
  auto other = linear_schema(3, 2);
  RngStream rng(23);
  ParamVector w = init_weights(schema, rng);
  ParamVector p = init_weights(other, rng);
  CHECK_THROWS_AS(dist_metric(w, p), std::runtime_error);
}

TEST_CASE("extraction recovers a synthetic static-alpha foundation almost exactly") {
  auto s = vec_schema(12);
  RngStream rng(29);
  ParamVector w_pre = random_vec(s, rng, 2.0);
  double alpha = 1.7;

  AdversaryView view;
  for (int t = 0; t < 3; ++t) {
    ParamVector w_prime = random_vec(s, rng, 1.0);
    double tau = 0.3 + 0.1 * t;
    view.tau.push_back(tau);
    view.w_prime.push_back(w_prime);
    view.w_global.push_back(fedbaf_bias(w_prime, w_pre, alpha * tau));
  }
  ExtractionResult r = extraction_attack(view, w_pre);
  CHECK(r.alpha_hat == doctest::Approx(alpha).epsilon(1e-6));
  CHECK(r.recovery_error < 1e-6);
}

TEST_CASE("extraction fails when alpha changes between rounds") {
  auto s = vec_schema(12);
  RngStream rng(31);
  ParamVector w_pre = random_vec(s, rng, 2.0);
  AdversaryView view;
  double alphas[3] = {0.8, 2.9, 1.4};
  for (int t = 0; t < 3; ++t) {
    ParamVector w_prime = random_vec(s, rng, 1.0);
    double tau = 0.4;
    view.tau.push_back(tau);
    view.w_prime.push_back(w_prime);
    view.w_global.push_back(fedbaf_bias(w_prime, w_pre, alphas[t] * tau));
  }
  ExtractionResult r = extraction_attack(view, w_pre);
  CHECK(r.recovery_error > 0.1);
}

TEST_CASE("knowing alpha exactly reconstructs the foundation") {
  auto s = vec_schema(8);
  RngStream rng(37);
  ParamVector w_pre = random_vec(s, rng, 2.0);
  double alpha = 0.9, tau = 0.5;
  AdversaryView view;
  ParamVector w_prime = random_vec(s, rng, 1.0);
  view.tau.push_back(tau);
  view.w_prime.push_back(w_prime);
  view.w_global.push_back(fedbaf_bias(w_prime, w_pre, alpha * tau));
  ExtractionResult r = extraction_with_known_alpha(view, alpha, w_pre, 0);
  CHECK(r.recovery_error < 1e-10);
}

TEST_CASE("noise robustness hits the exact relative error per layer and decays") {
  auto schema = mlp_schema(6, 12, 3);
  RngStream rng(41);
  ParamVector w = init_weights(schema, rng);
  Dataset d = gen_gaussian_mixture(3, 6, 60, 0.5, 42);
  for (int e = 0; e < 30; ++e) {
    RngStream epoch(200 + e);
    w = sgd_epoch(w, d, 0.1, 16, epoch);
  }
  auto curve = noise_robustness(w, {0.0, 0.5, 2.0}, d, 43);
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].first == 0.0);
  CHECK(curve[0].second == doctest::Approx(evaluate(w, d)));
  CHECK(curve[2].second < curve[0].second);
}

TEST_CASE("mac accounting follows the definitions") {
  // Two participants, per-sample cost 10, sizes 5 and 15: MACS are 50 and
  // 150, the mean is 100, the lower-median size is 10... with sizes {5, 15}
  // the lower median is 5; use {10, 10} for the worked example instead.
  auto s = vec_schema(1);
  ModelSchema schema = *s;
  schema.layers[0].macs_per_sample = 10;

  MacReport r = mac_report(schema, {10, 10}, 3, 2);
  CHECK(r.macs_per_sample == 10);
  CHECK(r.m == 2);
  CHECK(r.mean_macs == doctest::Approx(100.0));
  CHECK(r.median_n == 10);
  CHECK(r.mace == 2 * 10 * 100);      // m * median_n * mean MACS
  CHECK(r.tmac == 2 * 3 * r.mace);    // rounds * epochs * MACE

  MacReport odd = mac_report(schema, {4, 20, 6}, 1, 1);
  CHECK(odd.median_n == 6);  // lower median of {4, 6, 20}
  CHECK(odd.mean_macs == doctest::Approx((40 + 200 + 60) / 3.0));
}

TEST_CASE("the optimum proxy reaches a small gradient norm") {
  // A smooth convex objective (softmax regression) on overlapping classes has
  // an interior minimum the full-batch descent can actually reach.
  auto schema = linear_schema(4, 3);
  Dataset d = gen_gaussian_mixture(3, 4, 50, 1.2, 47);
  OptimumProxy p = train_optimum_proxy(schema, d, 0.1, 20000, 1e-4, 48);
  CHECK(p.grad_norm < 1e-4);
  CHECK(std::isfinite(p.final_loss));
  LossGrad lg = loss_and_grad(p.w_star, d.features, d.labels);
  CHECK(norm2(lg.grad) < 1e-4);
}

TEST_CASE("prop2 bound holds on a short real run") {
  Dataset train = gen_gaussian_mixture(3, 4, 45, 1.2, 51);
  Dataset test = gen_gaussian_mixture(3, 4, 12, 1.2, 52);
  Partition part = make_partition(train, test, 3, PartitionMode::kIid, 1.0, 53);
  auto schema = linear_schema(4, 3);

  RngStream frng(54);
  ParamVector found = init_weights(schema, frng);
  FederationRunSpec spec;
  spec.partition = &part;
  spec.schema = schema;
  spec.rounds = 6;
  spec.lr = 0.05;
  spec.batch_size = 8;
  spec.master_seed = 99;
  spec.retain_rounds = true;
  spec.mode = FoundationMode::kFedBaF;
  spec.foundation = found;
  FedBaFParams fb;
  fb.psi = 0.1;
  fb.foundation = found;
  spec.strategy.fedbaf = fb;

  RunResult run = run_experiment(spec);
  OptimumProxy proxy = train_optimum_proxy(schema, train, 0.1, 20000, 1e-4, 55);
  auto rows = prop2_bound_check(run.records, run.retained, proxy.w_star, found);
  REQUIRE(rows.size() == 6);
  for (const auto& row : rows) {
    CHECK(row.holds);
    CHECK(row.lhs <= row.rhs + 1e-9);
  }
}
