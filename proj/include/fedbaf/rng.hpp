#pragma once

#include <cstdint>
#include <vector>

namespace fedbaf {

/// Deterministic counter-free RNG stream built on splitmix64 seeding of
/// xoshiro-style state. Sub-streams are derived by hashing the parent seed
/// with a list of tags, so (master_seed, round, client) always yields the
/// same stream regardless of evaluation order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  /// Derive an independent child stream from this stream's seed and tags.
  RngStream child(std::initializer_list<std::uint64_t> tags) const;

  std::uint64_t next_u64();

  /// Uniform double in [0, 1).
  double next_double();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller. Stateless across calls except the
  /// cached second draw.
  double gaussian();

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n);

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4];
  bool has_cached_gauss_ = false;
  double cached_gauss_ = 0.0;
};

}  // namespace fedbaf
