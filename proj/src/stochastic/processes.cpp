#include "sbbts/stochastic/processes.hpp"

#include <cmath>
#include <string>

#include "sbbts/errors.hpp"

namespace sbbts::stochastic {

double brownian_bridge_variance(double t_left, double t_right, double t) {
  if (!(t_right > t_left)) throw DomainError("brownian bridge: empty interval");
  if (!(t >= t_left && t < t_right)) {
    throw DomainError("brownian bridge: t = " + std::to_string(t) + " outside [" + std::to_string(t_left) + ", " +
                      std::to_string(t_right) + ")");
  }
  return (t - t_left) * (t_right - t) / (t_right - t_left);
}

std::vector<double> brownian_bridge_point(std::span<const double> y_left, std::span<const double> y_right,
                                          double t_left, double t_right, double t, std::span<const double> z) {
  if (y_left.size() != y_right.size() || z.size() != y_left.size()) {
    throw DimensionError("brownian bridge: endpoint/noise dimensions disagree");
  }
  const double sigma = std::sqrt(brownian_bridge_variance(t_left, t_right, t));
  const double dt = t_right - t_left;
  const double wl = (t_right - t) / dt;
  const double wr = (t - t_left) / dt;
  std::vector<double> out(y_left.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = wl * y_left[j] + wr * y_right[j] + sigma * z[j];
  return out;
}

std::vector<double> sample_brownian_bridge(std::span<const double> y_left, std::span<const double> y_right,
                                           double t_left, double t_right, double t, RandomSource& rng) {
  std::vector<double> z(y_left.size());
  for (auto& zi : z) zi = rng.normal();
  return brownian_bridge_point(y_left, y_right, t_left, t_right, t, z);
}

std::vector<double> euler_maruyama_bridge_step(std::span<const double> y, double t, double dt, const DriftFn& drift,
                                               std::span<const double> z) {
  if (!(dt > 0.0)) throw DomainError("euler_maruyama_bridge_step: dt must be > 0");
  const auto b = drift(t, y);
  if (b.size() != y.size() || z.size() != y.size()) throw DimensionError("euler_maruyama_bridge_step: dimension mismatch");
  const double sq = std::sqrt(dt);
  std::vector<double> out(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) out[j] = y[j] + b[j] * dt + sq * z[j];
  return out;
}

std::vector<double> euler_maruyama_bridge_step(std::span<const double> y, double t, double dt, const DriftFn& drift,
                                               RandomSource& rng) {
  std::vector<double> z(y.size());
  for (auto& zi : z) zi = rng.normal();
  return euler_maruyama_bridge_step(y, t, dt, drift, z);
}

}  // namespace sbbts::stochastic
