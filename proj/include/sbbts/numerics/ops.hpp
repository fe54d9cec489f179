#pragma once

// Differentiable ops used by the drift network. Tensors are treated as
// row-major matrices [rows x cols] where rows is the product of all leading
// extents; nothing here broadcasts beyond the bias/gain vectors.

#include <cstddef>
#include <span>
#include <vector>

#include "sbbts/numerics/tensor.hpp"

namespace sbbts::numerics {

/// Fixed variance stabilizer of layer_norm.
inline constexpr double kLayerNormEps = 1e-5;

Tensor matmul(const Tensor& a, const Tensor& b);

/// x [N x in] * weight [in x out] + bias [out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

Tensor silu(const Tensor& x);

/// Normalizes every row over the last axis, then applies gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

/// Concatenates [N x d_k] blocks along the last axis.
Tensor concat_cols(const std::vector<Tensor>& parts);

/// Selects rows of a [N x d] tensor; gradients scatter back.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

Tensor sum(const Tensor& x);

/// Mean over rows of the squared Euclidean norm of (pred - target) per row.
/// Reductions use compensated summation.
Tensor mean_squared_error(const Tensor& pred, const Tensor& target);

/// Scaled dot-product attention with a causal mask over `q`, `k`, `v`, each
/// [S*L x D] holding S independent sequences of length `seq_len`. Position i
/// of a sequence attends to positions 0..i only.
Tensor causal_attention_core(const Tensor& q, const Tensor& k, const Tensor& v,
                             std::size_t n_head, std::size_t seq_len);

struct AttentionWeights {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

/// Multi-head causal self-attention: projections, masked attention, output
/// projection. x is [S*L x d_model].
Tensor causal_self_attention(const Tensor& x, const AttentionWeights& w, std::size_t n_head,
                             std::size_t seq_len);

}  // namespace sbbts::numerics
