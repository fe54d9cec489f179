#include "sbbts/core/config.hpp"

#include <sstream>

#include "sbbts/errors.hpp"

namespace sbbts::core {

std::string to_string(ScalingMode mode) {
  switch (mode) {
    case ScalingMode::none: return "none";
    case ScalingMode::unit_increment: return "unit_increment";
    case ScalingMode::brownian_increment: return "brownian_increment";
  }
  return "none";
}

ScalingMode scaling_mode_from_string(const std::string& name) {
  if (name == "none") return ScalingMode::none;
  if (name == "unit_increment") return ScalingMode::unit_increment;
  if (name == "brownian_increment") return ScalingMode::brownian_increment;
  throw ConfigError("unknown scaling mode '" + name + "'");
}

double SBBTSConfig::effective_beta(const stochastic::TimeGrid& grid) const {
  return beta > 0.0 ? beta : 10.0 / grid.min_step();
}

void SBBTSConfig::validate(const stochastic::TimeGrid& grid) const {
  if (outer_iterations < 1) throw ConfigError("config: K (outer_iterations) must be >= 1");
  if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("config: lr must be > 0");
  if (euler_steps < 1) throw ConfigError("config: euler_steps (N_pi) must be >= 1");
  if (!(xi_frac > 0.0 && xi_frac < 1.0)) throw ConfigError("config: xi_frac must lie in (0, 1)");
  if (d_model < 2) throw ConfigError("config: d_model must be >= 2");
  if (n_head == 0 || d_model % n_head != 0) {
    throw ConfigError("config: d_model " + std::to_string(d_model) + " is not divisible by n_head " +
                      std::to_string(n_head));
  }
  if (ffn_mult < 1) throw ConfigError("config: ffn_mult must be >= 1");
  if (beta < 0.0) throw ConfigError("config: beta must be >= 0 (0 selects the default)");
  if (!sb_mode) {
    const double b = effective_beta(grid);
    const double dt = grid.min_step();
    if (!(b * dt > 1.0)) {
      std::ostringstream os;
      os << "config: beta * min dt must exceed 1 (beta = " << b << ", min dt = " << dt << ")";
      throw ConfigError(os.str());
    }
  }
}

}  // namespace sbbts::core
