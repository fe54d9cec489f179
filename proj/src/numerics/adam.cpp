#include "sbbts/numerics/adam.hpp"

#include <cmath>
#include <string>

#include "sbbts/errors.hpp"

namespace sbbts::numerics {

AdamState::AdamState(double lr_, double beta1_, double beta2_, double eps_)
    : lr(lr_), beta1(beta1_), beta2(beta2_), eps(eps_) {
  validate();
}

void AdamState::validate() const {
  if (!(lr > 0.0)) throw ConfigError("adam: lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam: beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam: beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("adam: eps must be > 0");
}

void adam_step(std::span<std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state) {
  state.validate();
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (state.step_count == 0 && state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state tracks " + std::to_string(state.m.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size() || params[k].size() != state.m[k].size()) {
      throw DimensionError("adam_step: size mismatch for parameter " + std::to_string(k));
    }
  }

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    auto p = params[k];
    auto g = grads[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  std::vector<std::span<double>> p;
  std::vector<std::span<const double>> g;
  p.reserve(params.size());
  g.reserve(params.size());
  for (auto& t : params) {
    p.push_back(t.mutable_data());
    g.push_back(t.grad());
  }
  adam_step(std::span<std::span<double>>(p), std::span<const std::span<const double>>(g), state);
}

}  // namespace sbbts::numerics
