#pragma once

#include <span>

#include "sbbts/core/trainer.hpp"
#include "sbbts/stochastic/dataset.hpp"
#include "sbbts/stochastic/random.hpp"

namespace sbbts::core {

/// Sequential generation in model (scaled) units. For every interval i:
/// c_i = Phi(Y_{t_0:t_i}); Euler-Maruyama with drift s(t, Y, c_i) over
/// euler_steps sub-steps; X_{t_{i+1}} = Y_{t_{i+1}} + s(t~_{i+1}, Y_{t_{i+1}}, c_i) / beta.
/// The walk continues from Y_{t_{i+1}}. Path p takes interval-i noise from
/// rng.child(p).child(i); paths are processed in fixed chunks so the output
/// does not depend on the worker count.
///
/// initial_values: M x d row-major, already scaled.
stochastic::TimeSeriesDataset generate_scaled(const SBBTSModel& model, std::span<const double> initial_values,
                                              const stochastic::TimeGrid& grid, const stochastic::RandomSource& rng);

/// Generation in data units: scales the initial values, generates, and maps
/// the result back through the inverse scaler.
stochastic::TimeSeriesDataset generate(const SBBTSModel& model, std::span<const double> initial_values,
                                       const stochastic::TimeGrid& grid, const stochastic::RandomSource& rng);

/// M initial values resampled with replacement from the t_0 marginal of data.
std::vector<double> resample_initial_values(const stochastic::TimeSeriesDataset& data, std::size_t count,
                                            stochastic::RandomSource& rng);

/// Same draw from a pool of points stored row-major with `dim` columns.
std::vector<double> resample_initial_values(std::span<const double> pool, std::size_t dim, std::size_t count,
                                            stochastic::RandomSource& rng);

}  // namespace sbbts::core
