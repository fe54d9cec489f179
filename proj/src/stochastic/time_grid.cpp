#include "sbbts/stochastic/time_grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "sbbts/errors.hpp"

namespace sbbts::stochastic {

TimeGrid::TimeGrid(std::vector<double> dates) : dates_(std::move(dates)) {
  if (dates_.size() < 2) throw ConfigError("TimeGrid: need at least two dates (n >= 1)");
  for (std::size_t i = 0; i < dates_.size(); ++i) {
    if (!std::isfinite(dates_[i])) throw ConfigError("TimeGrid: non-finite date at index " + std::to_string(i));
    if (i > 0 && !(dates_[i] > dates_[i - 1])) {
      throw ConfigError("TimeGrid: dates must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
}

TimeGrid TimeGrid::uniform(std::size_t intervals, double horizon) {
  if (intervals == 0) throw ConfigError("TimeGrid::uniform: need at least one interval");
  if (!(horizon > 0.0)) throw ConfigError("TimeGrid::uniform: horizon must be > 0");
  std::vector<double> d(intervals + 1);
  for (std::size_t i = 0; i <= intervals; ++i) d[i] = horizon * static_cast<double>(i) / static_cast<double>(intervals);
  return TimeGrid(std::move(d));
}

double TimeGrid::min_step() const {
  double m = step(0);
  for (std::size_t i = 1; i < intervals(); ++i) m = std::min(m, step(i));
  return m;
}

double TimeGrid::mean_step() const { return (dates_.back() - dates_.front()) / static_cast<double>(intervals()); }

std::uint64_t TimeGrid::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double d : dates_) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &d, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace sbbts::stochastic
