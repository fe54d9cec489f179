#include "sbbts/core/scaler.hpp"

#include <cmath>
#include <string>

#include "sbbts/core/reference_vol.hpp"
#include "sbbts/errors.hpp"
#include "sbbts/log.hpp"

namespace sbbts::core {

void ScalerState::apply_point(std::span<double> x, double t) const {
  if (x.size() != dim()) throw DimensionError("scaler: point dimension mismatch");
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] - shift[j] - drift_rate[j] * (t - t0)) / scale[j];
}

void ScalerState::invert_point(std::span<double> z, double t) const {
  if (z.size() != dim()) throw DimensionError("scaler: point dimension mismatch");
  for (std::size_t j = 0; j < z.size(); ++j) z[j] = z[j] * scale[j] + shift[j] + drift_rate[j] * (t - t0);
}

void ScalerState::apply(stochastic::TimeSeriesDataset& data) const {
  if (data.dim != dim()) throw DimensionError("scaler: dataset dimension mismatch");
  for (std::size_t m = 0; m < data.paths; ++m)
    for (std::size_t i = 0; i < data.dates(); ++i)
      apply_point(std::span<double>(&data.at(m, i, 0), data.dim), data.grid[i]);
}

void ScalerState::invert(stochastic::TimeSeriesDataset& data) const {
  if (data.dim != dim()) throw DimensionError("scaler: dataset dimension mismatch");
  for (std::size_t m = 0; m < data.paths; ++m)
    for (std::size_t i = 0; i < data.dates(); ++i)
      invert_point(std::span<double>(&data.at(m, i, 0), data.dim), data.grid[i]);
}

ScalerState identity_scaler(std::size_t dim) {
  ScalerState s;
  s.mode = ScalingMode::none;
  s.shift.assign(dim, 0.0);
  s.drift_rate.assign(dim, 0.0);
  s.scale.assign(dim, 1.0);
  return s;
}

ScalerState fit_scaler(const stochastic::TimeSeriesDataset& data, ScalingMode mode) {
  if (data.paths == 0) throw DataError("fit_scaler: empty dataset");
  const std::size_t d = data.dim, n = data.grid.intervals();
  ScalerState s = identity_scaler(d);
  s.mode = mode;
  s.t0 = data.grid[0];

  if (mode != ScalingMode::none) {
    const double total_time = (data.grid[n] - data.grid[0]) * static_cast<double>(data.paths);
    const double count = static_cast<double>(data.paths * n);
    for (std::size_t j = 0; j < d; ++j) {
      double start = 0.0, displacement = 0.0;
      for (std::size_t m = 0; m < data.paths; ++m) {
        start += data.at(m, 0, j);
        displacement += data.at(m, n, j) - data.at(m, 0, j);
      }
      const double rate = displacement / total_time;
      double ss = 0.0;
      for (std::size_t m = 0; m < data.paths; ++m) {
        for (std::size_t i = 0; i < n; ++i) {
          const double dt = data.grid.step(i);
          const double e = data.at(m, i + 1, j) - data.at(m, i, j) - rate * dt;
          const double target_var = mode == ScalingMode::brownian_increment ? dt : 1.0;
          ss += e * e / target_var;
        }
      }
      const double var = ss / count;
      if (!(var > 1e-24) || !std::isfinite(var)) {
        log::warn("fit_scaler: dimension " + std::to_string(j) + " has zero increment variance; left unscaled");
        continue;
      }
      s.shift[j] = start / static_cast<double>(data.paths);
      s.drift_rate[j] = rate;
      s.scale[j] = std::sqrt(var);
    }
  }

  if (data.paths >= 2) {
    stochastic::TimeSeriesDataset scaled = data;
    s.apply(scaled);
    s.sigma_bar = reference_volatility(scaled).sigma_bar;
  }
  return s;
}

}  // namespace sbbts::core
