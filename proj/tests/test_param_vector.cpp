#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <memory>

#include "doctest.h"
#include "fedbaf/model.hpp"
#include "fedbaf/param_vector.hpp"
#include "fedbaf/rng.hpp"

using namespace fedbaf;

namespace {

std::shared_ptr<const ModelSchema> tiny_schema() {
  auto s = std::make_shared<ModelSchema>();
  s->layers.push_back({"a", {2}, 2});
  s->layers.push_back({"b", {3}, 3});
  s->num_classes = 2;
  s->input_dim = 2;
  return s;
}

ParamVector from(std::initializer_list<double> xs) {
  auto s = tiny_schema();
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return ParamVector(s, v);
}

}  // namespace

TEST_CASE("zeros and layer views") {
  auto s = tiny_schema();
  ParamVector z = ParamVector::zeros(s);
  CHECK(z.size() == 5);
  CHECK(z.layer("a").size() == 2);
  CHECK(z.layer("b").size() == 3);
  z.layer("b")[1] = 4.0;
  CHECK(z.values()[3] == 4.0);
}

TEST_CASE("norm of a 3-4 vector is 5") {
  ParamVector v = from({3.0, 4.0, 0.0, 0.0, 0.0});
  CHECK(norm2(v) == doctest::Approx(5.0));
}

TEST_CASE("add sub scale dot") {
  ParamVector a = from({1, 2, 3, 4, 5});
  ParamVector b = from({5, 4, 3, 2, 1});
  CHECK(add(a, b).values().isApproxToConstant(6.0));
  CHECK(sub(a, b).values()[0] == -4.0);
  CHECK(scale(a, 2.0).values()[4] == 10.0);
  CHECK(dot(a, b) == doctest::Approx(5 + 8 + 9 + 8 + 5));
}

TEST_CASE("normalize gives a unit vector") {
  ParamVector v = from({0, 0, 0, 3, 4});
  CHECK(norm2(normalize(v)) == doctest::Approx(1.0));
}

TEST_CASE("normalize of the zero vector is the zero vector") {
  auto z = ParamVector::zeros(tiny_schema());
  CHECK(norm2(normalize(z)) == 0.0);
}

TEST_CASE("linearity property: norm(c*v) == |c|*norm(v)") {
  RngStream rng(5);
  auto s = tiny_schema();
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd v(5);
    for (int i = 0; i < 5; ++i) v[i] = rng.gaussian();
    double c = rng.uniform(-3.0, 3.0);
    ParamVector p(s, v);
    CHECK(norm2(scale(p, c)) == doctest::Approx(std::abs(c) * norm2(p)));
  }
}

TEST_CASE("mismatched layouts are rejected") {
  auto s2 = std::make_shared<ModelSchema>();
  s2->layers.push_back({"a", {5}, 5});
  s2->num_classes = 2;
  s2->input_dim = 5;
  ParamVector a = ParamVector::zeros(tiny_schema());
  ParamVector b = ParamVector::zeros(s2);
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
}

TEST_CASE("all_finite flags NaN") {
  ParamVector v = from({1, 2, 3, 4, 5});
  CHECK(v.all_finite());
  v.values()[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(v.all_finite());
}
