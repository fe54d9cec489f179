#pragma once

// Drift network s_theta(t, y, c) and path encoder Phi_theta.
//
//   time  t  -> FFN_t  -> [d_model]
//   state y  -> FFN_y  -> [d_model]
//   history y_0..y_i -> linear embed -> one causal encoder block -> c_i
//   [FFN_t(t) | FFN_y(y) | c_i] -> FFN_out -> R^d
//
// Every FFN is linear -> layer norm -> SiLU -> linear. The encoder block is
// pre-norm: h = x + Attn(LN1(x)), out = h + MLP(LN2(h)). No positional
// encoding is added; the causal mask alone orders the history. The final
// linear layer of FFN_out starts at zero so a fresh network is the zero
// drift (identity transport map).

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sbbts/numerics/ops.hpp"
#include "sbbts/numerics/tensor.hpp"
#include "sbbts/stochastic/random.hpp"

namespace sbbts::core {

using numerics::Tensor;

struct DriftNetConfig {
  std::size_t dim = 1;
  std::size_t d_model = 128;
  std::size_t n_head = 16;
  std::size_t ffn_mult = 4;
};

struct FeedForward {
  Tensor w1, b1, ln_gain, ln_bias, w2, b2;
  Tensor forward(const Tensor& x) const;
};

struct EncoderBlock {
  Tensor ln1_gain, ln1_bias;
  numerics::AttentionWeights attn;
  Tensor ln2_gain, ln2_bias;
  Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

class DriftNet {
 public:
  DriftNet() = default;
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init, zeroed output layer.
  DriftNet(const DriftNetConfig& config, stochastic::RandomSource& rng);

  const DriftNetConfig& config() const { return config_; }

  /// Context vectors for S histories of length seq_len stacked as
  /// [S*seq_len x dim]. Row s*seq_len + i of the result is c_i of history s
  /// and depends on rows s*seq_len .. s*seq_len + i only.
  Tensor encode(const Tensor& tokens, std::size_t seq_len) const;

  /// s_theta for N rows: t [N x 1], y [N x dim], context [N x d_model].
  Tensor drift(const Tensor& t, const Tensor& y, const Tensor& context) const;

  /// Stable parameter order used by the optimizer and by checkpoints.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;

  /// Deep copy with gradients switched off (the frozen map of an outer step).
  DriftNet frozen_copy() const;
  /// Deep copy that keeps requires_grad on every parameter.
  DriftNet clone() const;

  void zero_grad();

  /// Overwrites the parameter named `name`; shapes must agree.
  void load_parameter(const std::string& name, std::span<const double> values);

 private:
  DriftNet copy_with_grad(bool requires_grad) const;

  DriftNetConfig config_;
  FeedForward time_ffn_;
  FeedForward state_ffn_;
  Tensor embed_w_, embed_b_;
  EncoderBlock encoder_;
  FeedForward head_;
};

// Single-point conveniences (no gradient tape).

/// c_i for one history given as (i+1) x dim row-major values.
std::vector<double> encode_path(const DriftNet& net, std::span<const double> history);

std::vector<double> drift_forward(const DriftNet& net, double t, std::span<const double> y,
                                  std::span<const double> context);

/// Large-beta transport y = x - s(t, x, c) / beta; identity when sb_mode.
std::vector<double> transport_map(const DriftNet& net, std::span<const double> x, double t,
                                  std::span<const double> context, double beta, bool sb_mode);

/// Inverse map x = y + s(t, y, c) / beta; identity when sb_mode.
std::vector<double> inverse_transport_map(const DriftNet& net, std::span<const double> y, double t,
                                          std::span<const double> context, double beta, bool sb_mode);

}  // namespace sbbts::core
