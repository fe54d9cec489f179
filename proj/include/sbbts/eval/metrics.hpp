#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sbbts/matrix.hpp"
#include "sbbts/stochastic/dataset.hpp"
#include "sbbts/stochastic/random.hpp"

namespace sbbts::eval {

inline constexpr double kTradingDays = 252.0;

struct Acf {
  std::vector<double> values;  // lags 0..max_lag
  bool undefined = false;      // constant series: every value is NaN
};

/// Sample autocorrelation sum_t (x_t - m)(x_{t+l} - m) / sum_t (x_t - m)^2,
/// of the series or of its squares.
Acf acf(std::span<const double> series, std::size_t max_lag, bool squared = false);

struct Correlation {
  Matrix values;  // d x d, symmetric, unit diagonal
  std::vector<unsigned char> zero_variance;
};

/// Pearson correlations of the columns. Zero-variance columns get zero
/// off-diagonal entries and are flagged.
Correlation correlation_matrix(const Matrix& returns);

/// Empirical quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

struct TailRisk {
  double var = 0.0;  // positive loss magnitude
  double es = 0.0;
};

/// VaR = -q_{1-level}(returns), ES = -mean of returns at or below that quantile.
TailRisk var_es(std::span<const double> returns, double level);

struct Classification {
  double accuracy = 0.0;
  double log_loss = 0.0;
  double roc_auc = 0.0;
  bool auc_defined = true;  // false when only one class is present
};

inline constexpr double kProbabilityClip = 1e-12;

/// Predicted class is 1 when p >= 0.5. AUC is the Mann-Whitney statistic
/// with midranks for tied scores.
Classification classification_metrics(std::span<const double> prob, std::span<const unsigned char> labels);

struct Sharpe {
  double mean = 0.0;
  double std = 0.0;     // n - 1 denominator
  double sharpe = 0.0;  // mean / std * sqrt(252)
  bool zero_std = false;  // sharpe is then sign(mean) * inf (0 when mean is 0)
};

Sharpe sharpe_ratio(std::span<const double> pnl);

struct Pnl {
  std::vector<double> daily;
  Sharpe stats;
};

/// Positions w = 2p - 1, daily PnL = mean over instruments of w * R.
Pnl pnl_metrics(const Matrix& prob, const Matrix& returns);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Percentile bootstrap of the annualized Sharpe ratio. Resample b draws
/// from rng.child(b).
Interval bootstrap_sharpe_ci(std::span<const double> pnl, const stochastic::RandomSource& rng, double level = 0.95,
                             std::size_t resamples = 10000);

struct QvDispersion {
  Matrix per_path;  // M x d, sum of squared increments / total time
  std::vector<double> mean;
  std::vector<double> std;
};

QvDispersion qv_dispersion(const stochastic::TimeSeriesDataset& paths);

struct AnnualizedStats {
  double return_pct = 0.0;
  double std_pct = 0.0;
};

AnnualizedStats annualized_stats(std::span<const double> daily_returns);

/// Named results collected for serialization.
struct EvalReport {
  std::map<std::string, double> metrics;
  std::map<std::string, std::vector<double>> series;
  std::map<std::string, Matrix> matrices;
  std::map<std::string, Interval> intervals;
  std::vector<std::string> flags;

  /// JSON text; non-finite numbers are written as the strings "inf", "-inf"
  /// and "nan".
  std::string to_json() const;
};

}  // namespace sbbts::eval
