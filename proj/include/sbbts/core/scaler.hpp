#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sbbts/core/config.hpp"
#include "sbbts/stochastic/dataset.hpp"

namespace sbbts::core {

/// Date-dependent affine map to model units, per dimension j:
///   z = (x - shift_j - drift_rate_j * (t - t0)) / scale_j
/// Fitted so that increments have zero mean and either unit variance or
/// variance dt_i (matching the reference Brownian motion), depending on mode.
struct ScalerState {
  ScalingMode mode = ScalingMode::none;
  double t0 = 0.0;
  std::vector<double> shift;
  std::vector<double> drift_rate;
  std::vector<double> scale;
  /// Per-interval reference volatility of the scaled data, each d x d
  /// row-major. Diagnostic, and the optional generation noise scale.
  std::vector<std::vector<double>> sigma_bar;

  std::size_t dim() const { return scale.size(); }

  void apply_point(std::span<double> x, double t) const;
  void invert_point(std::span<double> z, double t) const;
  void apply(stochastic::TimeSeriesDataset& data) const;
  void invert(stochastic::TimeSeriesDataset& data) const;
};

/// Identity scaler of the given dimension.
ScalerState identity_scaler(std::size_t dim);

/// Zero-variance dimensions get scale 1, no shift and no drift (with a warning).
ScalerState fit_scaler(const stochastic::TimeSeriesDataset& data, ScalingMode mode);

}  // namespace sbbts::core
