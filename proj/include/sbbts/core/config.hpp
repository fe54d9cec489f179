#pragma once

#include <cstddef>
#include <string>

#include "sbbts/stochastic/time_grid.hpp"

namespace sbbts::core {

/// How training data is mapped to model units before fitting.
enum class ScalingMode {
  none,                // raw values
  unit_increment,      // increments standardized to zero mean, unit variance
  brownian_increment,  // increments standardized to zero mean, variance dt_i
};

std::string to_string(ScalingMode mode);
ScalingMode scaling_mode_from_string(const std::string& name);

/// Hyperparameters of the bridge model. Defaults follow the reference
/// experiments (K=5, 1000 epochs, batch 128, lr 1e-3, d_model 128, 16 heads,
/// 50 Euler steps per interval, evaluation offset 1% of the interval).
struct SBBTSConfig {
  /// Transport regularization. 0 selects 10 / min_i dt_i for the grid.
  double beta = 0.0;
  std::size_t outer_iterations = 5;  // K
  std::size_t epochs = 1000;         // per outer iteration
  std::size_t batch_size = 128;
  double lr = 1e-3;
  std::size_t d_model = 128;
  std::size_t n_head = 16;
  /// Hidden width of the encoder feed-forward block, as a multiple of d_model.
  std::size_t ffn_mult = 4;
  std::size_t euler_steps = 50;  // N_pi
  /// Evaluation time offset as a fraction of the interval: t~ = t_{i+1} - xi_frac * dt_i.
  double xi_frac = 0.01;
  /// Identity transport map (the beta -> infinity limit).
  bool sb_mode = false;
  /// Sample training times on [t_i, t_{i+1} - xi_frac dt_i] instead of [t_i, t_{i+1}).
  bool clamp_training_time = true;
  /// Scale generation noise by the per-interval reference volatility.
  bool reference_noise = false;
  ScalingMode scaling = ScalingMode::brownian_increment;

  /// beta actually used on `grid` (resolves the automatic default).
  double effective_beta(const stochastic::TimeGrid& grid) const;

  /// Throws ConfigError on invalid settings, including beta * min dt <= 1
  /// outside sb_mode.
  void validate(const stochastic::TimeGrid& grid) const;
};

}  // namespace sbbts::core
