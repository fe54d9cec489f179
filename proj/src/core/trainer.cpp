#include "sbbts/core/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "sbbts/errors.hpp"
#include "sbbts/numerics/adam.hpp"
#include "sbbts/numerics/ops.hpp"
#include "sbbts/stochastic/processes.hpp"

namespace sbbts::core {

namespace {
// Child-stream keys of the training rng.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kStepStream = 3;

DriftNetConfig net_config(const SBBTSConfig& c, std::size_t dim) {
  return DriftNetConfig{dim, c.d_model, c.n_head, c.ffn_mult};
}
}  // namespace

RegressionBatch build_regression_batch(const stochastic::TimeSeriesDataset& data, std::span<const std::size_t> indices,
                                       const DriftNet* frozen, const SBBTSConfig& config,
                                       const stochastic::RandomSource& rng) {
  const std::size_t n = data.grid.intervals(), d = data.dim, B = indices.size();
  if (B == 0) throw DataError("build_regression_batch: empty batch");
  for (auto m : indices) {
    if (m >= data.paths) throw DataError("build_regression_batch: path index out of range");
  }
  const auto& grid = data.grid;
  const std::size_t rows = B * n;

  std::vector<double> left(rows * d), right(rows * d);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        left[(b * n + i) * d + j] = data.at(indices[b], i, j);
        right[(b * n + i) * d + j] = data.at(indices[b], i + 1, j);
      }
    }
  }

  if (frozen != nullptr && !config.sb_mode) {
    // Y = X - s^k(t, X, Phi^k(X_{t_0:t_i})) / beta at both ends of interval i.
    numerics::NoGradGuard guard;
    const double inv_beta = 1.0 / config.effective_beta(grid);
    std::vector<double> tl(rows), tr(rows);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < n; ++i) {
        tl[b * n + i] = grid[i];
        tr[b * n + i] = grid[i + 1] - config.xi_frac * grid.step(i);
      }
    }
    const Tensor xl({rows, d}, left);
    const Tensor xr({rows, d}, right);
    const Tensor ctx = frozen->encode(xl, n);
    const Tensor sl = frozen->drift(Tensor({rows, 1}, std::move(tl)), xl, ctx);
    const Tensor sr = frozen->drift(Tensor({rows, 1}, std::move(tr)), xr, ctx);
    for (std::size_t k = 0; k < rows * d; ++k) {
      left[k] -= inv_beta * sl[k];
      right[k] -= inv_beta * sr[k];
    }
  }

  std::vector<double> times(rows), yt(rows * d), target(rows * d), right_times(rows);
  std::vector<double> z(d);
  for (std::size_t b = 0; b < B; ++b) {
    stochastic::RandomSource stream = rng.child(indices[b]);
    for (std::size_t i = 0; i < n; ++i) {
      const double t_left = grid[i], t_right = grid[i + 1], dt = grid.step(i);
      const double span = config.clamp_training_time ? (1.0 - config.xi_frac) * dt : dt;
      double t = t_left + stream.uniform() * span;
      if (t >= t_right) t = std::nextafter(t_right, t_left);
      for (auto& zj : z) zj = stream.normal();
      const std::size_t r = b * n + i;
      const auto point = stochastic::brownian_bridge_point(std::span<const double>(&left[r * d], d),
                                                           std::span<const double>(&right[r * d], d), t_left,
                                                           t_right, t, z);
      times[r] = t;
      right_times[r] = t_right;
      for (std::size_t j = 0; j < d; ++j) {
        yt[r * d + j] = point[j];
        target[r * d + j] = (right[r * d + j] - point[j]) / (t_right - t);
      }
    }
  }

  RegressionBatch batch;
  batch.seq_len = n;
  batch.history = Tensor({rows, d}, std::move(left));
  batch.times = Tensor({rows, 1}, std::move(times));
  batch.y_t = Tensor({rows, d}, std::move(yt));
  batch.target = Tensor({rows, d}, std::move(target));
  batch.right_times = std::move(right_times);
  return batch;
}

Tensor regression_loss(const DriftNet& net, const RegressionBatch& batch) {
  const Tensor context = net.encode(batch.history, batch.seq_len);
  const Tensor pred = net.drift(batch.times, batch.y_t, context);
  return numerics::mean_squared_error(pred, batch.target);
}

Tensor compute_loss_batch(const stochastic::TimeSeriesDataset& data, std::span<const std::size_t> indices,
                          const DriftNet& net, const DriftNet* frozen, const SBBTSConfig& config,
                          const stochastic::RandomSource& rng) {
  config.validate(data.grid);
  return regression_loss(net, build_regression_batch(data, indices, frozen, config, rng));
}

TrainResult train(const stochastic::TimeSeriesDataset& data, const SBBTSConfig& config,
                  const stochastic::RandomSource& rng, const EpochCallback& on_epoch, const DriftNet* init) {
  config.validate(data.grid);
  if (data.paths == 0) throw DataError("train: empty dataset");
  data.validate();

  TrainResult result;
  if (init != nullptr) {
    if (init->config().dim != data.dim) throw DimensionError("train: initial network dimension mismatch");
    result.net = init->clone();
  } else {
    stochastic::RandomSource init_rng = rng.child(kInitStream);
    result.net = DriftNet(net_config(config, data.dim), init_rng);
  }
  DriftNet& net = result.net;
  std::vector<Tensor> params = net.parameters();
  numerics::AdamState adam(config.lr);

  // Y^0 = identity unless resuming from a trained network.
  std::optional<DriftNet> frozen;
  if (init != nullptr && !config.sb_mode) frozen = net.frozen_copy();

  const std::size_t M = data.paths;
  const std::size_t batch = std::min(config.batch_size, M);
  std::vector<std::size_t> order(M);
  std::uint64_t step = 0;

  for (std::size_t k = 0; k < config.outer_iterations; ++k) {
    for (std::size_t e = 0; e < config.epochs; ++e) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      stochastic::RandomSource shuffle = rng.child(kShuffleStream).child(k * config.epochs + e);
      for (std::size_t i = M; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

      double loss_sum = 0.0;
      std::size_t n_batches = 0;
      for (std::size_t start = 0; start < M; start += batch) {
        const std::size_t end = std::min(M, start + batch);
        const std::span<const std::size_t> idx(order.data() + start, end - start);
        const stochastic::RandomSource step_rng = rng.child(kStepStream).child(step++);
        const RegressionBatch rb = build_regression_batch(data, idx, frozen ? &*frozen : nullptr, config, step_rng);
        const Tensor loss = regression_loss(net, rb);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          std::ostringstream os;
          os << "train: non-finite loss at outer iteration " << k << ", epoch " << e;
          throw NumericalError(os.str());
        }
        net.zero_grad();
        loss.backward();
        numerics::adam_step(std::span<Tensor>(params), adam);
        loss_sum += value;
        ++n_batches;
      }
      EpochLoss rec{k, e, loss_sum / static_cast<double>(n_batches)};
      result.trace.push_back(rec);
      if (on_epoch) on_epoch(rec);
    }
    if (!config.sb_mode) frozen = net.frozen_copy();
  }
  return result;
}

SBBTSModel fit_model(const stochastic::TimeSeriesDataset& data, const SBBTSConfig& config,
                     const stochastic::RandomSource& rng, std::vector<EpochLoss>* trace,
                     const EpochCallback& on_epoch, const DriftNet* init) {
  config.validate(data.grid);
  SBBTSModel model;
  model.config = config;
  model.grid = data.grid;
  model.beta = config.effective_beta(data.grid);
  model.scaler = fit_scaler(data, config.scaling);
  for (std::size_t m = 0; m < data.paths; ++m) {
    const auto x0 = data.point(m, 0);
    model.initial_values.insert(model.initial_values.end(), x0.begin(), x0.end());
  }
  stochastic::TimeSeriesDataset scaled = data;
  model.scaler.apply(scaled);
  TrainResult r = train(scaled, config, rng, on_epoch, init);
  model.net = std::move(r.net);
  if (trace) *trace = std::move(r.trace);
  return model;
}

}  // namespace sbbts::core
