#include "sbbts/core/drift_net.hpp"

#include <cmath>

#include "sbbts/errors.hpp"

namespace sbbts::core {

using numerics::NoGradGuard;
namespace ops = numerics;

namespace {

Tensor uniform_tensor(numerics::Shape shape, std::size_t fan_in, stochastic::RandomSource& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> data(numerics::shape_numel(shape));
  for (auto& x : data) x = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(data), true);
}

FeedForward make_ffn(std::size_t in, std::size_t hidden, std::size_t out, stochastic::RandomSource& rng) {
  FeedForward f;
  f.w1 = uniform_tensor({in, hidden}, in, rng);
  f.b1 = uniform_tensor({hidden}, in, rng);
  f.ln_gain = Tensor::full({hidden}, 1.0, true);
  f.ln_bias = Tensor::zeros({hidden}, true);
  f.w2 = uniform_tensor({hidden, out}, hidden, rng);
  f.b2 = uniform_tensor({out}, hidden, rng);
  return f;
}

// Visits every parameter slot in a fixed order.
template <class Net, class F>
void visit_slots(Net& net_parts, F&& f) {
  auto& [time_ffn, state_ffn, embed_w, embed_b, enc, head] = net_parts;
  auto ffn = [&](const std::string& p, auto& x) {
    f(p + ".w1", x.w1);
    f(p + ".b1", x.b1);
    f(p + ".ln_gain", x.ln_gain);
    f(p + ".ln_bias", x.ln_bias);
    f(p + ".w2", x.w2);
    f(p + ".b2", x.b2);
  };
  ffn("time_ffn", time_ffn);
  ffn("state_ffn", state_ffn);
  f("embed.w", embed_w);
  f("embed.b", embed_b);
  f("encoder.ln1_gain", enc.ln1_gain);
  f("encoder.ln1_bias", enc.ln1_bias);
  f("encoder.attn.wq", enc.attn.wq);
  f("encoder.attn.bq", enc.attn.bq);
  f("encoder.attn.wk", enc.attn.wk);
  f("encoder.attn.bk", enc.attn.bk);
  f("encoder.attn.wv", enc.attn.wv);
  f("encoder.attn.bv", enc.attn.bv);
  f("encoder.attn.wo", enc.attn.wo);
  f("encoder.attn.bo", enc.attn.bo);
  f("encoder.ln2_gain", enc.ln2_gain);
  f("encoder.ln2_bias", enc.ln2_bias);
  f("encoder.mlp_w1", enc.mlp_w1);
  f("encoder.mlp_b1", enc.mlp_b1);
  f("encoder.mlp_w2", enc.mlp_w2);
  f("encoder.mlp_b2", enc.mlp_b2);
  ffn("head", head);
}

}  // namespace

Tensor FeedForward::forward(const Tensor& x) const {
  const Tensor h = ops::silu(ops::layer_norm(ops::linear(x, w1, b1), ln_gain, ln_bias));
  return ops::linear(h, w2, b2);
}

DriftNet::DriftNet(const DriftNetConfig& config, stochastic::RandomSource& rng) : config_(config) {
  const std::size_t d = config.dim, dm = config.d_model;
  if (d == 0) throw ConfigError("DriftNet: dim must be >= 1");
  if (dm < 2) throw ConfigError("DriftNet: d_model must be >= 2");
  if (config.n_head == 0 || dm % config.n_head != 0) {
    throw ConfigError("DriftNet: d_model " + std::to_string(dm) + " is not divisible by n_head " +
                      std::to_string(config.n_head));
  }
  if (config.ffn_mult == 0) throw ConfigError("DriftNet: ffn_mult must be >= 1");
  const std::size_t hidden = config.ffn_mult * dm;

  time_ffn_ = make_ffn(1, dm, dm, rng);
  state_ffn_ = make_ffn(d, dm, dm, rng);
  embed_w_ = uniform_tensor({d, dm}, d, rng);
  embed_b_ = uniform_tensor({dm}, d, rng);

  encoder_.ln1_gain = Tensor::full({dm}, 1.0, true);
  encoder_.ln1_bias = Tensor::zeros({dm}, true);
  encoder_.attn.wq = uniform_tensor({dm, dm}, dm, rng);
  encoder_.attn.bq = uniform_tensor({dm}, dm, rng);
  encoder_.attn.wk = uniform_tensor({dm, dm}, dm, rng);
  encoder_.attn.bk = uniform_tensor({dm}, dm, rng);
  encoder_.attn.wv = uniform_tensor({dm, dm}, dm, rng);
  encoder_.attn.bv = uniform_tensor({dm}, dm, rng);
  encoder_.attn.wo = uniform_tensor({dm, dm}, dm, rng);
  encoder_.attn.bo = uniform_tensor({dm}, dm, rng);
  encoder_.ln2_gain = Tensor::full({dm}, 1.0, true);
  encoder_.ln2_bias = Tensor::zeros({dm}, true);
  encoder_.mlp_w1 = uniform_tensor({dm, hidden}, dm, rng);
  encoder_.mlp_b1 = uniform_tensor({hidden}, dm, rng);
  encoder_.mlp_w2 = uniform_tensor({hidden, dm}, hidden, rng);
  encoder_.mlp_b2 = uniform_tensor({dm}, hidden, rng);

  head_ = make_ffn(3 * dm, dm, d, rng);
  head_.w2 = Tensor::zeros({dm, d}, true);
  head_.b2 = Tensor::zeros({d}, true);
}

Tensor DriftNet::encode(const Tensor& tokens, std::size_t seq_len) const {
  if (tokens.cols() != config_.dim) {
    throw DimensionError("DriftNet::encode: tokens have width " + std::to_string(tokens.cols()) + ", expected " +
                         std::to_string(config_.dim));
  }
  const Tensor x = ops::linear(tokens, embed_w_, embed_b_);
  const Tensor a = ops::causal_self_attention(ops::layer_norm(x, encoder_.ln1_gain, encoder_.ln1_bias),
                                              encoder_.attn, config_.n_head, seq_len);
  const Tensor h = ops::add(x, a);
  const Tensor m = ops::linear(
      ops::silu(ops::linear(ops::layer_norm(h, encoder_.ln2_gain, encoder_.ln2_bias), encoder_.mlp_w1,
                            encoder_.mlp_b1)),
      encoder_.mlp_w2, encoder_.mlp_b2);
  return ops::add(h, m);
}

Tensor DriftNet::drift(const Tensor& t, const Tensor& y, const Tensor& context) const {
  if (t.cols() != 1 || y.cols() != config_.dim || context.cols() != config_.d_model || t.rows() != y.rows() ||
      y.rows() != context.rows()) {
    throw DimensionError("DriftNet::drift: expected t [N x 1], y [N x " + std::to_string(config_.dim) +
                         "], context [N x " + std::to_string(config_.d_model) + "], got " +
                         numerics::shape_str(t.shape()) + ", " + numerics::shape_str(y.shape()) + ", " +
                         numerics::shape_str(context.shape()));
  }
  const Tensor te = time_ffn_.forward(t);
  const Tensor ye = state_ffn_.forward(y);
  return head_.forward(ops::concat_cols({te, ye, context}));
}

std::vector<std::pair<std::string, Tensor>> DriftNet::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto parts = std::tie(time_ffn_, state_ffn_, embed_w_, embed_b_, encoder_, head_);
  visit_slots(parts, [&](const std::string& name, const Tensor& t) { out.emplace_back(name, t); });
  return out;
}

std::vector<Tensor> DriftNet::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t DriftNet::parameter_count() const {
  std::size_t n = 0;
  for (auto& [name, t] : named_parameters()) n += t.numel();
  return n;
}

DriftNet DriftNet::copy_with_grad(bool requires_grad) const {
  DriftNet copy = *this;
  auto parts = std::tie(copy.time_ffn_, copy.state_ffn_, copy.embed_w_, copy.embed_b_, copy.encoder_, copy.head_);
  visit_slots(parts, [&](const std::string&, Tensor& t) {
    t = Tensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), requires_grad);
  });
  return copy;
}

DriftNet DriftNet::frozen_copy() const { return copy_with_grad(false); }
DriftNet DriftNet::clone() const { return copy_with_grad(true); }

void DriftNet::zero_grad() {
  for (auto& t : parameters()) t.zero_grad();
}

void DriftNet::load_parameter(const std::string& name, std::span<const double> values) {
  for (auto& [n, t] : named_parameters()) {
    if (n != name) continue;
    if (t.numel() != values.size()) {
      throw DimensionError("DriftNet::load_parameter: " + name + " expects " + std::to_string(t.numel()) +
                           " values, got " + std::to_string(values.size()));
    }
    Tensor handle = t;
    std::copy(values.begin(), values.end(), handle.mutable_data().begin());
    return;
  }
  throw SchemaError("DriftNet::load_parameter: unknown parameter '" + name + "'");
}

std::vector<double> encode_path(const DriftNet& net, std::span<const double> history) {
  const std::size_t d = net.config().dim;
  if (history.empty() || history.size() % d != 0) {
    throw DimensionError("encode_path: history length must be a positive multiple of dim");
  }
  NoGradGuard guard;
  const std::size_t len = history.size() / d;
  const Tensor c = net.encode(Tensor({len, d}, std::vector<double>(history.begin(), history.end())), len);
  const std::size_t dm = net.config().d_model;
  return {c.data().begin() + static_cast<std::ptrdiff_t>((len - 1) * dm), c.data().end()};
}

std::vector<double> drift_forward(const DriftNet& net, double t, std::span<const double> y,
                                  std::span<const double> context) {
  NoGradGuard guard;
  const Tensor out = net.drift(Tensor({1, 1}, {t}), Tensor({1, y.size()}, std::vector<double>(y.begin(), y.end())),
                               Tensor({1, context.size()}, std::vector<double>(context.begin(), context.end())));
  return {out.data().begin(), out.data().end()};
}

std::vector<double> transport_map(const DriftNet& net, std::span<const double> x, double t,
                                  std::span<const double> context, double beta, bool sb_mode) {
  std::vector<double> y(x.begin(), x.end());
  if (sb_mode) return y;
  if (!(beta > 0.0)) throw ConfigError("transport_map: beta must be > 0");
  const auto s = drift_forward(net, t, x, context);
  for (std::size_t j = 0; j < y.size(); ++j) y[j] -= s[j] / beta;
  return y;
}

std::vector<double> inverse_transport_map(const DriftNet& net, std::span<const double> y, double t,
                                          std::span<const double> context, double beta, bool sb_mode) {
  std::vector<double> x(y.begin(), y.end());
  if (sb_mode) return x;
  if (!(beta > 0.0)) throw ConfigError("inverse_transport_map: beta must be > 0");
  const auto s = drift_forward(net, t, y, context);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] += s[j] / beta;
  return x;
}

}  // namespace sbbts::core
