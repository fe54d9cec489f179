#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sbbts/stochastic/dataset.hpp"
#include "sbbts/stochastic/random.hpp"

namespace sbbts::stochastic {

/// dX = r X dt + sqrt(v) X dW^X,  dv = kappa (theta - v) dt + xi sqrt(v) dW^v,
/// corr(dW^X, dW^v) = rho.
struct HestonParams {
  double kappa = 2.0;
  double theta = 1.0;
  double xi_vol = 0.3;
  double rho = 0.0;
  double r = 0.05;
  double v0 = 1.0;

  /// Throws DomainError when a parameter leaves its admissible range.
  void validate() const;
};

struct HestonPath {
  std::vector<double> x;
  std::vector<double> v;   // truncated at 0, as fed to the next step
  std::vector<double> z_x; // standard normals driving X, one per step
  std::vector<double> z_v; // correlated standard normals driving v
};

/// Full-truncation Euler scheme; returns n_steps + 1 observations.
HestonPath simulate_heston(const HestonParams& params, std::size_t n_steps, double dt, double x0,
                           RandomSource& rng);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Per-parameter sampling boxes. The defaults reproduce the reference
/// experiment's ranges; v0 is set to the sampled theta.
struct HestonRanges {
  Interval kappa{0.5, 4.0};
  Interval theta{0.5, 1.5};
  Interval xi_vol{0.1, 0.9};
  Interval rho{-0.9, 0.9};
  Interval r{0.01, 0.1};

  void validate() const;
};

struct HestonDataset {
  TimeSeriesDataset data;  // dim 2: (X, v)
  std::vector<HestonParams> truth;
};

/// M paths with `length` observations each (length - 1 Euler steps of size
/// dt). The model-time grid is uniform on [0, 1]. Path m uses rng.child(m),
/// so the output does not depend on the worker count.
HestonDataset sample_heston_dataset(const HestonRanges& ranges, std::size_t paths, std::size_t length, double dt,
                                    double x0, const RandomSource& rng);

}  // namespace sbbts::stochastic
