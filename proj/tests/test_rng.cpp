#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "fedbaf/rng.hpp"

using fedbaf::RngStream;

TEST_CASE("same seed gives the same sequence") {
  RngStream a(1234), b(1234);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  RngStream a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i)
    if (a.next_u64() == b.next_u64()) ++same;
  CHECK(same == 0);
}

TEST_CASE("child streams depend on every tag") {
  RngStream root(42);
  RngStream a = root.child({7, 1});
  RngStream b = root.child({7, 2});
  RngStream c = root.child({8, 1});
  RngStream a2 = root.child({7, 1});
  CHECK(a.next_u64() == a2.next_u64());
  CHECK(a2.next_u64() != b.next_u64());
  CHECK(b.next_u64() != c.next_u64());
}

TEST_CASE("child derivation is independent of draw history") {
  RngStream a(42), b(42);
  a.next_u64();
  a.next_u64();
  CHECK(a.child({3}).next_u64() == b.child({3}).next_u64());
}

TEST_CASE("next_double stays in [0,1) with a sane mean") {
  RngStream rng(9);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double d = rng.next_double();
    REQUIRE(d >= 0.0);
    REQUIRE(d < 1.0);
    sum += d;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("uniform maps to the requested range") {
  RngStream rng(10);
  for (int i = 0; i < 1000; ++i) {
    double d = rng.uniform(1.0, 2.0);
    REQUIRE(d >= 1.0);
    REQUIRE(d < 2.0);
  }
}

TEST_CASE("gaussian moments") {
  RngStream rng(11);
  const int n = 50000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double g = rng.gaussian();
    sum += g;
    sq += g * g;
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(1.0).scale(0.03));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("next_below is unbiased enough across a small modulus") {
  RngStream rng(12);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[rng.next_below(7)];
  for (int c : counts) CHECK(c == doctest::Approx(n / 7.0).epsilon(0.05));
}

TEST_CASE("shuffle is a permutation and deterministic") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  RngStream a(77);
  a.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);

  std::vector<int> w(50);
  std::iota(w.begin(), w.end(), 0);
  RngStream b(77);
  b.shuffle(w);
  CHECK(v == w);
}
