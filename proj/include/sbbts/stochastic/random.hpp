#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace sbbts::stochastic {

/// Seeded xoshiro256** stream. Child streams are derived from the seed and a
/// key only, so the child for (path 17, epoch 3) is the same no matter how
/// many draws the parent has made or in which order children are requested.
class RandomSource {
 public:
  using result_type = std::uint64_t;

  explicit RandomSource(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  std::uint64_t seed() const { return seed_; }
  RandomSource child(std::uint64_t key) const;

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace sbbts::stochastic
