#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sbbts/stochastic/random.hpp"

namespace sbbts::stochastic {

/// Draw from the Brownian bridge pinned at y_left (time t_left) and y_right
/// (time t_right), evaluated at t in [t_left, t_right):
///   y_t = w_l * y_left + w_r * y_right + sigma_t * Z,
///   sigma_t^2 = (t - t_left)(t_right - t) / (t_right - t_left).
std::vector<double> sample_brownian_bridge(std::span<const double> y_left, std::span<const double> y_right,
                                           double t_left, double t_right, double t, RandomSource& rng);

/// Same law with caller-supplied standard normals (one per coordinate).
std::vector<double> brownian_bridge_point(std::span<const double> y_left, std::span<const double> y_right,
                                          double t_left, double t_right, double t, std::span<const double> z);

/// Variance of each bridge coordinate at t.
double brownian_bridge_variance(double t_left, double t_right, double t);

using DriftFn = std::function<std::vector<double>(double t, std::span<const double> y)>;

/// y + drift(t, y) dt + sqrt(dt) z with explicit standard normals z.
std::vector<double> euler_maruyama_bridge_step(std::span<const double> y, double t, double dt, const DriftFn& drift,
                                               std::span<const double> z);

/// As above, drawing z from rng.
std::vector<double> euler_maruyama_bridge_step(std::span<const double> y, double t, double dt, const DriftFn& drift,
                                               RandomSource& rng);

}  // namespace sbbts::stochastic
