#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace diformer {

/// Seeded xoshiro256** generator.
///
/// The four words of state are filled from splitmix64 applied to the seed.
/// Every consumer of randomness (initialization, dropout, direction and mask
/// sampling, data generation) derives its own generator with stream(name), so
/// adding draws in one place never shifts the sequence seen by another.
/// All distributions below are implemented here rather than through <random>
/// so that results do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Generator for the named sub-stream. Depends only on (seed, name).
  Rng stream(std::string_view name) const;

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 bits of precision.
  double uniform();
  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n), n > 0, by rejection.
  std::uint64_t below(std::uint64_t n);
  /// Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi);
  bool bernoulli(double p);
  /// Standard normal via the Box-Muller transform (one value per call).
  double normal();

  /// Fisher-Yates shuffle driven by below().
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4];
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace diformer
