#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sbbts/numerics/tensor.hpp"

namespace sbbts::numerics {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<std::vector<double>> m;  // one entry per parameter tensor
  std::vector<std::vector<double>> v;

  AdamState() = default;
  AdamState(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// Throws ConfigError on out-of-range hyperparameters.
  void validate() const;
};

/// One bias-corrected Adam update of `params` using their accumulated
/// gradients. Moment buffers are created zeroed on the first call.
void adam_step(std::span<Tensor> params, AdamState& state);

/// Same update on raw arrays: one entry of `params`/`grads` per tensor.
void adam_step(std::span<std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state);

}  // namespace sbbts::numerics
