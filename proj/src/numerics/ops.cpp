#include "sbbts/numerics/ops.hpp"

#include <algorithm>
#include <cmath>

#include "sbbts/errors.hpp"

namespace sbbts::numerics {

namespace {

using detail::Node;

// C[p x r] (+)= A[p x q] * B[q x r]
void gemm_nn(const double* __restrict a, const double* __restrict b, double* __restrict c, std::size_t p,
             std::size_t q, std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    double* ci = c + i * r;
    const double* ai = a + i * q;
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = ai[k];
      const double* bk = b + k * r;
      for (std::size_t j = 0; j < r; ++j) ci[j] += aik * bk[j];
    }
  }
}

// dA[p x q] += dC[p x r] * B^T
void gemm_nt(const double* __restrict dc, const double* __restrict b, double* __restrict da, std::size_t p,
             std::size_t q, std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    const double* dci = dc + i * r;
    double* dai = da + i * q;
    for (std::size_t k = 0; k < q; ++k) {
      const double* bk = b + k * r;
      double s = 0.0;
      for (std::size_t j = 0; j < r; ++j) s += dci[j] * bk[j];
      dai[k] += s;
    }
  }
}

// dB[q x r] += A^T * dC
void gemm_tn(const double* __restrict a, const double* __restrict dc, double* __restrict db, std::size_t p,
             std::size_t q, std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    const double* ai = a + i * q;
    const double* dci = dc + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = ai[k];
      double* dbk = db + k * r;
      for (std::size_t j = 0; j < r; ++j) dbk[j] += aik * dci[j];
    }
  }
}

Shape with_last(const Shape& s, std::size_t last) {
  Shape out = s;
  if (out.empty()) out.push_back(last);
  else out.back() = last;
  return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void require_vector(const Tensor& v, std::size_t n, const char* op, const char* what) {
  if (v.numel() != n) {
    throw DimensionError(std::string(op) + ": " + what + " must have " + std::to_string(n) + " entries, got " +
                         shape_str(v.shape()));
  }
}

struct Neumaier {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) comp += (sum - t) + x;
    else comp += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (b.rank() != 2) throw DimensionError("matmul: right operand must be rank 2, got " + shape_str(b.shape()));
  const std::size_t p = a.rows(), q = a.cols(), r = b.dim(1);
  if (b.dim(0) != q) {
    throw DimensionError("matmul: inner extents disagree " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> out(p * r, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), p, q, r);
  return Tensor::from_op(with_last(a.shape(), r), std::move(out), {a, b}, [p, q, r](Node& o) {
    auto& na = *o.parents[0];
    auto& nb = *o.parents[1];
    if (na.requires_grad) gemm_nt(o.grad.data(), nb.data.data(), na.grad_buffer().data(), p, q, r);
    if (nb.requires_grad) gemm_tn(na.data.data(), o.grad.data(), nb.grad_buffer().data(), p, q, r);
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2) throw DimensionError("linear: weight must be rank 2, got " + shape_str(weight.shape()));
  const std::size_t n = x.rows(), in = x.cols(), outd = weight.dim(1);
  if (weight.dim(0) != in) {
    throw DimensionError("linear: input width " + std::to_string(in) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  require_vector(bias, outd, "linear", "bias");
  std::vector<double> out(n * outd);
  const double* bd = bias.data().data();
  for (std::size_t i = 0; i < n; ++i) std::copy(bd, bd + outd, out.begin() + static_cast<std::ptrdiff_t>(i * outd));
  gemm_nn(x.data().data(), weight.data().data(), out.data(), n, in, outd);
  return Tensor::from_op(with_last(x.shape(), outd), std::move(out), {x, weight, bias}, [n, in, outd](Node& o) {
    auto& nx = *o.parents[0];
    auto& nw = *o.parents[1];
    auto& nb = *o.parents[2];
    if (nx.requires_grad) gemm_nt(o.grad.data(), nw.data.data(), nx.grad_buffer().data(), n, in, outd);
    if (nw.requires_grad) gemm_tn(nx.data.data(), o.grad.data(), nw.grad_buffer().data(), n, in, outd);
    if (nb.requires_grad) {
      auto& gb = nb.grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        const double* gi = o.grad.data() + i * outd;
        for (std::size_t j = 0; j < outd; ++j) gb[j] += gi[j];
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [](Node& o) {
    for (int s = 0; s < 2; ++s) {
      auto& p = *o.parents[static_cast<std::size_t>(s)];
      if (!p.requires_grad) continue;
      auto& g = p.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [](Node& o) {
    auto& pa = *o.parents[0];
    auto& pb = *o.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [](Node& o) {
    auto& pa = *o.parents[0];
    auto& pb = *o.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * pa.data[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return Tensor::from_op(x.shape(), std::move(out), {x}, [factor](Node& o) {
    auto& g = o.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * factor;
  });
}

Tensor silu(const Tensor& x) {
  const std::size_t n = x.numel();
  std::vector<double> out(n);
  std::vector<double> sig(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i];
    // Stable logistic for both signs.
    const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    sig[i] = s;
    out[i] = v * s;
  }
  return Tensor::from_op(x.shape(), std::move(out), {x}, [sig = std::move(sig)](Node& o) {
    auto& px = *o.parents[0];
    auto& g = px.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = sig[i];
      g[i] += o.grad[i] * s * (1.0 + px.data[i] * (1.0 - s));
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  const std::size_t n = x.rows(), d = x.cols();
  if (d < 2) throw DimensionError("layer_norm: last extent must be >= 2, got " + std::to_string(d));
  require_vector(gain, d, "layer_norm", "gain");
  require_vector(bias, d, "layer_norm", "bias");
  std::vector<double> out(n * d), xhat(n * d), inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.data().data() + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xi[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[i] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xi[j] - mean) * inv;
      xhat[i * d + j] = h;
      out[i * d + j] = h * gain[j] + bias[j];
    }
  }
  return Tensor::from_op(
      x.shape(), std::move(out), {x, gain, bias},
      [n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& o) {
        auto& px = *o.parents[0];
        auto& pg = *o.parents[1];
        auto& pb = *o.parents[2];
        if (pg.requires_grad || pb.requires_grad) {
          auto& gg = pg.grad_buffer();
          auto& gb = pb.grad_buffer();
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
              gg[j] += o.grad[i * d + j] * xhat[i * d + j];
              gb[j] += o.grad[i * d + j];
            }
          }
        }
        if (px.requires_grad) {
          auto& gx = px.grad_buffer();
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t i = 0; i < n; ++i) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = o.grad[i * d + j] * pg.data[j];
              m1 += dh;
              m2 += dh * xhat[i * d + j];
            }
            m1 *= inv_d;
            m2 *= inv_d;
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = o.grad[i * d + j] * pg.data[j];
              gx[i * d + j] += inv_std[i] * (dh - m1 - xhat[i * d + j] * m2);
            }
          }
        }
      });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != n) {
      throw DimensionError("concat_cols: row count mismatch " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(n * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double* src = parts[k].data().data();
    for (std::size_t i = 0; i < n; ++i)
      std::copy(src + i * widths[k], src + (i + 1) * widths[k], out.begin() + static_cast<std::ptrdiff_t>(i * total + offset));
    offset += widths[k];
  }
  return Tensor::from_op(with_last(parts[0].shape(), total), std::move(out), parts,
                         [n, total, widths](Node& o) {
                           std::size_t off = 0;
                           for (std::size_t k = 0; k < widths.size(); ++k) {
                             auto& p = *o.parents[k];
                             if (p.requires_grad) {
                               auto& g = p.grad_buffer();
                               for (std::size_t i = 0; i < n; ++i)
                                 for (std::size_t j = 0; j < widths[k]; ++j)
                                   g[i * widths[k] + j] += o.grad[i * total + off + j];
                             }
                             off += widths[k];
                           }
                         });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  const std::size_t d = x.cols(), n = x.rows();
  std::vector<double> out(rows.size() * d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) throw DimensionError("gather_rows: row index " + std::to_string(rows[r]) + " out of range");
    std::copy_n(x.data().data() + rows[r] * d, d, out.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return Tensor::from_op({rows.size(), d}, std::move(out), {x}, [d, idx = std::move(idx)](Node& o) {
    auto& g = o.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < d; ++j) g[idx[r] * d + j] += o.grad[r * d + j];
  });
}

Tensor sum(const Tensor& x) {
  Neumaier acc;
  for (double v : x.data()) acc.add(v);
  return Tensor::from_op({1}, {acc.value()}, {x}, [](Node& o) {
    auto& g = o.parents[0]->grad_buffer();
    for (auto& gi : g) gi += o.grad[0];
  });
}

Tensor mean_squared_error(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mean_squared_error");
  const std::size_t n = pred.rows();
  if (n == 0) throw DimensionError("mean_squared_error: empty input");
  Neumaier acc;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double e = pred[i] - target[i];
    acc.add(e * e);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  return Tensor::from_op({1}, {acc.value() * inv_n}, {pred, target}, [inv_n](Node& o) {
    auto& pp = *o.parents[0];
    auto& pt = *o.parents[1];
    const double g0 = o.grad[0] * 2.0 * inv_n;
    if (pp.requires_grad) {
      auto& g = pp.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += g0 * (pp.data[i] - pt.data[i]);
    }
    if (pt.requires_grad) {
      auto& g = pt.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= g0 * (pp.data[i] - pt.data[i]);
    }
  });
}

Tensor causal_attention_core(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t n_head,
                             std::size_t seq_len) {
  require_same_shape(q, k, "causal_attention");
  require_same_shape(q, v, "causal_attention");
  const std::size_t rows = q.rows(), dm = q.cols();
  if (n_head == 0 || dm % n_head != 0) {
    throw ConfigError("causal_attention: d_model " + std::to_string(dm) + " is not divisible by n_head " +
                      std::to_string(n_head));
  }
  if (seq_len == 0 || rows % seq_len != 0) {
    throw DimensionError("causal_attention: " + std::to_string(rows) + " rows do not split into sequences of " +
                         std::to_string(seq_len));
  }
  const std::size_t n_seq = rows / seq_len, hd = dm / n_head;
  const std::size_t tri = seq_len * (seq_len + 1) / 2;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

  // probs[(s * n_head + h) * tri + i*(i+1)/2 + j], j <= i
  std::vector<double> probs(n_seq * n_head * tri);
  std::vector<double> out(rows * dm, 0.0);
  const double* qd = q.data().data();
  const double* kd = k.data().data();
  const double* vd = v.data().data();
  for (std::size_t s = 0; s < n_seq; ++s) {
    for (std::size_t h = 0; h < n_head; ++h) {
      double* pbase = probs.data() + (s * n_head + h) * tri;
      for (std::size_t i = 0; i < seq_len; ++i) {
        const double* qi = qd + (s * seq_len + i) * dm + h * hd;
        double* p = pbase + i * (i + 1) / 2;
        double mx = -INFINITY;
        for (std::size_t j = 0; j <= i; ++j) {
          const double* kj = kd + (s * seq_len + j) * dm + h * hd;
          double dot = 0.0;
          for (std::size_t e = 0; e < hd; ++e) dot += qi[e] * kj[e];
          p[j] = dot * inv_sqrt;
          mx = std::max(mx, p[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          p[j] = std::exp(p[j] - mx);
          z += p[j];
        }
        double* oi = out.data() + (s * seq_len + i) * dm + h * hd;
        for (std::size_t j = 0; j <= i; ++j) {
          p[j] /= z;
          const double* vj = vd + (s * seq_len + j) * dm + h * hd;
          for (std::size_t e = 0; e < hd; ++e) oi[e] += p[j] * vj[e];
        }
      }
    }
  }

  return Tensor::from_op(
      q.shape(), std::move(out), {q, k, v},
      [n_seq, n_head, seq_len, dm, hd, tri, inv_sqrt, probs = std::move(probs)](Node& o) {
        auto& nq = *o.parents[0];
        auto& nk = *o.parents[1];
        auto& nv = *o.parents[2];
        // Allocate all three so the kernel stays branch-free; unused ones are discarded.
        std::vector<double> scratch_q, scratch_k, scratch_v;
        auto buffer = [](Node& n, std::vector<double>& scratch) -> double* {
          if (n.requires_grad) return n.grad_buffer().data();
          scratch.assign(n.data.size(), 0.0);
          return scratch.data();
        };
        double* gq = buffer(nq, scratch_q);
        double* gk = buffer(nk, scratch_k);
        double* gv = buffer(nv, scratch_v);
        std::vector<double> dp(seq_len);
        for (std::size_t s = 0; s < n_seq; ++s) {
          for (std::size_t h = 0; h < n_head; ++h) {
            const double* pbase = probs.data() + (s * n_head + h) * tri;
            for (std::size_t i = 0; i < seq_len; ++i) {
              const double* p = pbase + i * (i + 1) / 2;
              const std::size_t ri = (s * seq_len + i) * dm + h * hd;
              const double* doi = o.grad.data() + ri;
              double weighted = 0.0;
              for (std::size_t j = 0; j <= i; ++j) {
                const std::size_t rj = (s * seq_len + j) * dm + h * hd;
                double dot = 0.0;
                for (std::size_t e = 0; e < hd; ++e) dot += doi[e] * nv.data[rj + e];
                dp[j] = dot;
                weighted += p[j] * dot;
                for (std::size_t e = 0; e < hd; ++e) gv[rj + e] += p[j] * doi[e];
              }
              for (std::size_t j = 0; j <= i; ++j) {
                const std::size_t rj = (s * seq_len + j) * dm + h * hd;
                const double ds = p[j] * (dp[j] - weighted) * inv_sqrt;
                for (std::size_t e = 0; e < hd; ++e) {
                  gq[ri + e] += ds * nk.data[rj + e];
                  gk[rj + e] += ds * nq.data[ri + e];
                }
              }
            }
          }
        }
      });
}

Tensor causal_self_attention(const Tensor& x, const AttentionWeights& w, std::size_t n_head,
                             std::size_t seq_len) {
  const std::size_t dm = x.cols();
  if (n_head == 0 || dm % n_head != 0) {
    throw ConfigError("causal_self_attention: d_model " + std::to_string(dm) + " is not divisible by n_head " +
                      std::to_string(n_head));
  }
  const Tensor q = linear(x, w.wq, w.bq);
  const Tensor k = linear(x, w.wk, w.bk);
  const Tensor v = linear(x, w.wv, w.bv);
  return linear(causal_attention_core(q, k, v, n_head, seq_len), w.wo, w.bo);
}

}  // namespace sbbts::numerics
