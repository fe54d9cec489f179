#pragma once

#include <vector>

#include "sbbts/stochastic/dataset.hpp"

namespace sbbts::core {

struct ReferenceVolatility {
  /// Per interval: covariance of X_{t_{i+1}} - X_{t_i}, d x d row-major.
  std::vector<std::vector<double>> covariance;
  /// Per interval: symmetric PSD square root of the covariance.
  std::vector<std::vector<double>> sigma_bar;
  /// Number of directions treated as singular, summed over intervals.
  std::size_t singular_directions = 0;
};

/// Empirical (1/M) covariance of increments per interval and its principal
/// square root via eigendecomposition. Needs at least two paths.
ReferenceVolatility reference_volatility(const stochastic::TimeSeriesDataset& data);

/// Principal square root of a symmetric PSD d x d matrix; eigenvalues below
/// a relative tolerance are treated as 0. `singular` receives their count.
std::vector<double> psd_sqrt(const std::vector<double>& matrix, std::size_t d, std::size_t* singular = nullptr);

}  // namespace sbbts::core
