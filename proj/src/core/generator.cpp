#include "sbbts/core/generator.hpp"

#include <cmath>

#include "sbbts/errors.hpp"
#include "sbbts/parallel.hpp"

namespace sbbts::core {

namespace {

constexpr std::size_t kChunkPaths = 64;

void generate_chunk(const SBBTSModel& model, std::span<const double> initial, std::size_t first,
                    std::size_t count, const stochastic::TimeGrid& grid, const stochastic::RandomSource& rng,
                    stochastic::TimeSeriesDataset& out) {
  numerics::NoGradGuard guard;
  const DriftNet& net = model.net;
  const std::size_t d = net.config().dim, dm = net.config().d_model, n = grid.intervals();
  const bool transport = !model.config.sb_mode;
  const double inv_beta = transport ? 1.0 / model.beta : 0.0;
  const std::size_t steps = model.config.euler_steps;

  auto time_column = [&](double t) { return Tensor::full({count, 1}, t); };

  // history[p] holds Y_{t_0..t_i} of path first + p.
  std::vector<std::vector<double>> history(count);
  std::vector<double> x0(count * d);
  for (std::size_t p = 0; p < count; ++p)
    for (std::size_t j = 0; j < d; ++j) {
      x0[p * d + j] = initial[(first + p) * d + j];
      out.at(first + p, 0, j) = x0[p * d + j];
    }

  std::vector<double> y(x0);
  if (transport) {
    const Tensor xt({count, d}, x0);
    const Tensor ctx = net.encode(xt, 1);
    const Tensor s = net.drift(time_column(grid[0]), xt, ctx);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] -= inv_beta * s[k];
  }
  for (std::size_t p = 0; p < count; ++p) history[p].assign(y.begin() + p * d, y.begin() + (p + 1) * d);

  std::vector<double> sigma(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = i + 1;
    std::vector<double> tokens(count * len * d);
    for (std::size_t p = 0; p < count; ++p) std::copy(history[p].begin(), history[p].end(), tokens.begin() + p * len * d);
    const Tensor all_ctx = net.encode(Tensor({count * len, d}, std::move(tokens)), len);
    std::vector<double> ctx_data(count * dm);
    for (std::size_t p = 0; p < count; ++p)
      std::copy_n(all_ctx.data().begin() + static_cast<std::ptrdiff_t>((p * len + i) * dm), dm,
                  ctx_data.begin() + static_cast<std::ptrdiff_t>(p * dm));
    const Tensor ctx({count, dm}, std::move(ctx_data));

    const double dt_i = grid.step(i);
    const double h = dt_i / static_cast<double>(steps);
    const double sq_h = std::sqrt(h);
    const bool scaled_noise = model.config.reference_noise && i < model.scaler.sigma_bar.size();
    if (scaled_noise) {
      const double f = 1.0 / std::sqrt(dt_i);
      for (std::size_t k = 0; k < d * d; ++k) sigma[k] = model.scaler.sigma_bar[i][k] * f;
    }

    std::vector<stochastic::RandomSource> streams;
    streams.reserve(count);
    for (std::size_t p = 0; p < count; ++p) streams.push_back(rng.child(first + p).child(i));

    std::vector<double> z(d);
    for (std::size_t k = 0; k < steps; ++k) {
      const double t = grid[i] + static_cast<double>(k) * h;
      const Tensor s = net.drift(time_column(t), Tensor({count, d}, y), ctx);
      for (std::size_t p = 0; p < count; ++p) {
        for (auto& zj : z) zj = streams[p].normal();
        for (std::size_t j = 0; j < d; ++j) {
          double noise = z[j];
          if (scaled_noise) {
            noise = 0.0;
            for (std::size_t l = 0; l < d; ++l) noise += sigma[j * d + l] * z[l];
          }
          y[p * d + j] += s[p * d + j] * h + sq_h * noise;
        }
      }
    }

    std::vector<double> x(y);
    if (transport) {
      const double t_eval = grid[i + 1] - model.config.xi_frac * dt_i;
      const Tensor s = net.drift(time_column(t_eval), Tensor({count, d}, y), ctx);
      for (std::size_t k = 0; k < x.size(); ++k) x[k] += inv_beta * s[k];
    }
    for (std::size_t p = 0; p < count; ++p) {
      for (std::size_t j = 0; j < d; ++j) out.at(first + p, i + 1, j) = x[p * d + j];
      history[p].insert(history[p].end(), y.begin() + p * d, y.begin() + (p + 1) * d);
    }
  }
}

}  // namespace

stochastic::TimeSeriesDataset generate_scaled(const SBBTSModel& model, std::span<const double> initial_values,
                                              const stochastic::TimeGrid& grid, const stochastic::RandomSource& rng) {
  if (!(grid == model.grid)) throw ContractError("generate: grid differs from the training grid");
  const std::size_t d = model.net.config().dim;
  if (initial_values.empty() || initial_values.size() % d != 0) {
    throw DimensionError("generate: initial values must be M x " + std::to_string(d));
  }
  const std::size_t M = initial_values.size() / d;
  stochastic::TimeSeriesDataset out(grid, M, d);
  const std::size_t chunks = (M + kChunkPaths - 1) / kChunkPaths;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t first = c * kChunkPaths;
    generate_chunk(model, initial_values, first, std::min(kChunkPaths, M - first), grid, rng, out);
  });
  for (double v : out.values) {
    if (!std::isfinite(v)) throw NumericalError("generate: non-finite value in generated paths");
  }
  return out;
}

stochastic::TimeSeriesDataset generate(const SBBTSModel& model, std::span<const double> initial_values,
                                       const stochastic::TimeGrid& grid, const stochastic::RandomSource& rng) {
  const std::size_t d = model.net.config().dim;
  std::vector<double> scaled(initial_values.begin(), initial_values.end());
  for (std::size_t k = 0; k + d <= scaled.size(); k += d)
    model.scaler.apply_point(std::span<double>(scaled.data() + k, d), grid[0]);
  auto out = generate_scaled(model, scaled, grid, rng);
  model.scaler.invert(out);
  return out;
}

std::vector<double> resample_initial_values(const stochastic::TimeSeriesDataset& data, std::size_t count,
                                            stochastic::RandomSource& rng) {
  if (data.paths == 0) throw DataError("resample_initial_values: empty dataset");
  std::vector<double> pool;
  for (std::size_t m = 0; m < data.paths; ++m) {
    const auto x0 = data.point(m, 0);
    pool.insert(pool.end(), x0.begin(), x0.end());
  }
  return resample_initial_values(pool, data.dim, count, rng);
}

std::vector<double> resample_initial_values(std::span<const double> pool, std::size_t dim, std::size_t count,
                                            stochastic::RandomSource& rng) {
  if (dim == 0 || pool.empty() || pool.size() % dim != 0) {
    throw DataError("resample_initial_values: pool must hold a positive number of points of dimension " +
                    std::to_string(dim));
  }
  const std::size_t n = pool.size() / dim;
  std::vector<double> out(count * dim);
  for (std::size_t p = 0; p < count; ++p) {
    const std::size_t m = rng.below(n);
    for (std::size_t j = 0; j < dim; ++j) out[p * dim + j] = pool[m * dim + j];
  }
  return out;
}

}  // namespace sbbts::core
