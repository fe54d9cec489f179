#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbbts/core/config.hpp"
#include "sbbts/core/drift_net.hpp"
#include "sbbts/core/scaler.hpp"
#include "sbbts/stochastic/dataset.hpp"
#include "sbbts/stochastic/random.hpp"

namespace sbbts::core {

/// Everything needed to generate: trained network, hyperparameters, the
/// data scaler and the grid the network was trained on.
struct SBBTSModel {
  SBBTSConfig config;
  DriftNet net;
  ScalerState scaler;
  stochastic::TimeGrid grid;
  double beta = 0.0;  // resolved value
  /// Names of the value columns of the training data, if known.
  std::vector<std::string> columns;
  /// Training values at t_0 in data units, paths x dim row-major; the pool
  /// generation draws starting points from.
  std::vector<double> initial_values;
};

/// One regression problem per (path, interval) row, rows ordered path-major:
/// row b*n + i belongs to path b and interval i.
struct RegressionBatch {
  std::size_t seq_len = 0;  // n, the number of intervals
  Tensor history;           // [B*n x d]  Y_{t_i} fed to the encoder
  Tensor times;             // [B*n x 1]  t ~ U on the (clamped) interval
  Tensor y_t;               // [B*n x d]  bridge sample at t
  Tensor target;            // [B*n x d]  (Y_{t_{i+1}} - Y_t) / (t_{i+1} - t)
  std::vector<double> right_times;  // t_{i+1} per row
};

/// Maps the batch through the frozen transport (identity when `frozen` is
/// null or in sb_mode) and samples bridge points and regression targets.
/// Path `indices[b]` draws its noise from rng.child(indices[b]), so the rows
/// of a path do not depend on its position within the batch.
RegressionBatch build_regression_batch(const stochastic::TimeSeriesDataset& data, std::span<const std::size_t> indices,
                                       const DriftNet* frozen, const SBBTSConfig& config,
                                       const stochastic::RandomSource& rng);

/// Mean over rows of || s_theta(t, Y_t, Phi_theta(Y_{t_0:t_i})) - target ||^2.
Tensor regression_loss(const DriftNet& net, const RegressionBatch& batch);

/// build_regression_batch followed by regression_loss.
Tensor compute_loss_batch(const stochastic::TimeSeriesDataset& data, std::span<const std::size_t> indices,
                          const DriftNet& net, const DriftNet* frozen, const SBBTSConfig& config,
                          const stochastic::RandomSource& rng);

struct EpochLoss {
  std::size_t outer = 0;
  std::size_t epoch = 0;
  double mean_loss = 0.0;
};

struct TrainResult {
  DriftNet net;
  std::vector<EpochLoss> trace;
};

using EpochCallback = std::function<void(const EpochLoss&)>;

/// Outer loop over K transport iterates; each runs `epochs` passes over the
/// (already scaled) data with Adam, the transport map frozen at the previous
/// iterate. Starts from `init` when given, otherwise from a fresh network.
TrainResult train(const stochastic::TimeSeriesDataset& scaled_data, const SBBTSConfig& config,
                  const stochastic::RandomSource& rng, const EpochCallback& on_epoch = {},
                  const DriftNet* init = nullptr);

/// Fits the scaler, trains and bundles the model.
SBBTSModel fit_model(const stochastic::TimeSeriesDataset& data, const SBBTSConfig& config,
                     const stochastic::RandomSource& rng, std::vector<EpochLoss>* trace = nullptr,
                     const EpochCallback& on_epoch = {}, const DriftNet* init = nullptr);

}  // namespace sbbts::core
