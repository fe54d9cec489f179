#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sbbts/stochastic/dataset.hpp"
#include "sbbts/stochastic/heston.hpp"

namespace sbbts::calib {

/// Quasi-maximum-likelihood fit of one observed (X, v) path.
///
/// With z = sqrt(dt/v), w = sqrt(v dt) the Euler transitions read
///   y1 = dX / (X sqrt(v dt)) = r z + e1,                     Var e1 = 1
///   y2 = dv / sqrt(v dt)     = kappa theta z - kappa w + xi e2,
/// corr(e1, e2) = rho. Splitting e2 into its projection on e1 and an
/// orthogonal part, the bivariate Gaussian likelihood factorizes and is
/// maximized in closed form:
///   r        = OLS of y1 on z,
///   (a, b, c) = OLS of y2 on (z, -w, e1) with e1 the y1 residual,
///   kappa = b, theta = a / b, xi^2 = c^2 + s^2, rho = c / xi,
/// where s^2 is the mean squared residual of the second regression.
struct HestonFit {
  stochastic::HestonParams params;
  /// Asymptotic standard errors in the same field order.
  stochastic::HestonParams standard_error;
  /// Observations whose variance had to be floored.
  std::size_t floored = 0;
};

inline constexpr double kVarianceFloor = 1e-8;

/// Throws DataError for short or non-positive price paths and NumericalError
/// when a parameter is not identifiable (e.g. a constant variance path).
/// Non-positive variances are floored at kVarianceFloor with a warning.
HestonFit heston_qmle(std::span<const double> x, std::span<const double> v, double dt, bool warn = true);

/// Bivariate Euler quasi log-likelihood (up to the constant), the objective
/// heston_qmle maximizes. Parameters outside their domain give -inf.
double heston_quasi_loglik(std::span<const double> x, std::span<const double> v, double dt,
                           const stochastic::HestonParams& params);

struct ParameterSummary {
  double mean = 0.0;
  double std = 0.0;  // cross-path, n-1 denominator
  double min = 0.0;
  double max = 0.0;
  std::vector<std::size_t> histogram;
};

struct SourceReport {
  std::string name;
  std::vector<stochastic::HestonParams> estimates;
  std::size_t skipped = 0;
  std::size_t clipped = 0;  // estimates moved back into the admissible box
  /// kappa, theta, xi_vol, rho, r in that order.
  std::vector<ParameterSummary> summaries;
};

/// Calibration of several sources with shared histogram edges per parameter.
struct CalibrationReport {
  static constexpr const char* kParameterNames[5] = {"kappa", "theta", "xi_vol", "rho", "r"};
  std::vector<SourceReport> sources;
  /// Per parameter, bins + 1 edges shared by all sources.
  std::vector<std::vector<double>> bin_edges;
};

/// Fits every path of a dataset with columns (X, v). Failing paths are
/// skipped and counted; estimates are clipped to kappa, theta, xi >= 0 and
/// rho in [-1, 1].
SourceReport calibrate_dataset(const stochastic::TimeSeriesDataset& data, double dt, const std::string& name);

/// Summaries and shared-edge histograms across sources.
CalibrationReport build_report(std::vector<SourceReport> sources, std::size_t bins = 30);

double parameter_value(const stochastic::HestonParams& p, std::size_t index);

}  // namespace sbbts::calib
