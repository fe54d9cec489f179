#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sbbts/stochastic/time_grid.hpp"

namespace sbbts::stochastic {

/// M sample paths observed at the n+1 dates of a grid, d dimensions each.
/// Values are stored path-major: value(m, i, j) = values[(m*(n+1) + i)*d + j].
struct TimeSeriesDataset {
  TimeGrid grid;
  std::size_t paths = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  TimeSeriesDataset() = default;
  TimeSeriesDataset(TimeGrid grid, std::size_t paths, std::size_t dim);
  TimeSeriesDataset(TimeGrid grid, std::size_t paths, std::size_t dim, std::vector<double> values);

  std::size_t dates() const { return grid.size(); }
  std::size_t stride() const { return grid.size() * dim; }

  double& at(std::size_t m, std::size_t i, std::size_t j) { return values[(m * dates() + i) * dim + j]; }
  double at(std::size_t m, std::size_t i, std::size_t j) const { return values[(m * dates() + i) * dim + j]; }

  std::span<double> path(std::size_t m) { return {values.data() + m * stride(), stride()}; }
  std::span<const double> path(std::size_t m) const { return {values.data() + m * stride(), stride()}; }
  std::span<const double> point(std::size_t m, std::size_t i) const {
    return {values.data() + (m * dates() + i) * dim, dim};
  }

  /// Throws DataError when the storage does not match the declared extents.
  void validate() const;
};

}  // namespace sbbts::stochastic
