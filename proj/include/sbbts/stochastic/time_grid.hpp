#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace sbbts::stochastic {

/// Observation dates t_0 < t_1 < ... < t_n in model time.
class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> dates);

  /// n intervals of equal length on [0, horizon].
  static TimeGrid uniform(std::size_t intervals, double horizon = 1.0);

  std::size_t intervals() const { return dates_.size() - 1; }
  std::size_t size() const { return dates_.size(); }
  double operator[](std::size_t i) const { return dates_[i]; }
  double step(std::size_t i) const { return dates_[i + 1] - dates_[i]; }
  double min_step() const;
  double mean_step() const;
  const std::vector<double>& dates() const { return dates_; }

  /// FNV-1a over the raw bytes of the dates.
  std::uint64_t hash() const;

  bool operator==(const TimeGrid&) const = default;

 private:
  std::vector<double> dates_;
};

}  // namespace sbbts::stochastic
