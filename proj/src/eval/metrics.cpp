#include "sbbts/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "sbbts/errors.hpp"
#include "sbbts/log.hpp"
#include "sbbts/parallel.hpp"

namespace sbbts::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

nlohmann::json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

Acf acf(std::span<const double> series, std::size_t max_lag, bool squared) {
  const std::size_t n = series.size();
  if (n <= max_lag) {
    throw DataError("acf: series length " + std::to_string(n) + " must exceed max_lag " + std::to_string(max_lag));
  }
  std::vector<double> x(series.begin(), series.end());
  if (squared) {
    for (auto& v : x) v *= v;
  }
  Acf out;
  out.values.assign(max_lag + 1, kNaN);
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) {
    out.undefined = true;
    return out;
  }
  const double m = mean_of(x);
  double denom = 0.0;
  for (double v : x) denom += (v - m) * (v - m);
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    double num = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) num += (x[t] - m) * (x[t + lag] - m);
    out.values[lag] = num / denom;
  }
  out.values[0] = 1.0;
  return out;
}

Correlation correlation_matrix(const Matrix& returns) {
  const std::size_t n = returns.rows, d = returns.cols;
  if (n < 2) throw DataError("correlation_matrix: need at least 2 observations");
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  Correlation out;
  out.zero_variance.assign(d, 0);
  for (std::size_t j = 0; j < d; ++j) {
    const auto col = returns.column(j);
    mean[j] = mean_of(col);
    if (std::all_of(col.begin(), col.end(), [&](double v) { return v == col[0]; })) {
      out.zero_variance[j] = 1;
      continue;
    }
    double ss = 0.0;
    for (double v : col) ss += (v - mean[j]) * (v - mean[j]);
    sd[j] = std::sqrt(ss);
  }
  out.values = Matrix(d, d);
  for (std::size_t a = 0; a < d; ++a) {
    out.values(a, a) = 1.0;
    for (std::size_t b = a + 1; b < d; ++b) {
      double c = 0.0;
      if (!out.zero_variance[a] && !out.zero_variance[b]) {
        for (std::size_t i = 0; i < n; ++i) c += (returns(i, a) - mean[a]) * (returns(i, b) - mean[b]);
        c = std::clamp(c / (sd[a] * sd[b]), -1.0, 1.0);
      }
      out.values(a, b) = out.values(b, a) = c;
    }
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile: level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

TailRisk var_es(std::span<const double> returns, double level) {
  if (returns.empty()) throw DataError("var_es: empty input");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("var_es: level must lie in (0, 1)");
  const std::size_t needed = level > 0.95 ? 500 : 100;
  if (returns.size() < needed) {
    log::warn("var_es: " + std::to_string(returns.size()) + " observations are few for level " + std::to_string(level));
  }
  const double q = quantile(std::vector<double>(returns.begin(), returns.end()), 1.0 - level);
  double sum = 0.0;
  std::size_t count = 0;
  for (double r : returns) {
    if (r <= q) {
      sum += r;
      ++count;
    }
  }
  // The interpolated quantile is never below the minimum, so count >= 1.
  return TailRisk{-q, -sum / static_cast<double>(count)};
}

Classification classification_metrics(std::span<const double> prob, std::span<const unsigned char> labels) {
  const std::size_t m = prob.size();
  if (m == 0) throw DataError("classification_metrics: empty input");
  if (labels.size() != m) throw DimensionError("classification_metrics: predictions and labels differ in length");
  std::size_t positives = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] > 1) throw DataError("classification_metrics: label outside {0, 1} at index " + std::to_string(i));
    if (!(prob[i] >= 0.0 && prob[i] <= 1.0)) {
      throw DataError("classification_metrics: probability outside [0, 1] at index " + std::to_string(i));
    }
    positives += labels[i];
  }

  Classification out;
  double correct = 0.0, ll = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const unsigned char pred = prob[i] >= 0.5 ? 1 : 0;
    correct += pred == labels[i] ? 1.0 : 0.0;
    const double p = std::clamp(prob[i], kProbabilityClip, 1.0 - kProbabilityClip);
    ll -= labels[i] ? std::log(p) : std::log1p(-p);
  }
  out.accuracy = correct / static_cast<double>(m);
  out.log_loss = ll / static_cast<double>(m);

  const std::size_t negatives = m - positives;
  if (positives == 0 || negatives == 0) {
    out.auc_defined = false;
    out.roc_auc = kNaN;
    return out;
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return prob[a] < prob[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < m;) {
    std::size_t j = i;
    while (j + 1 < m && prob[order[j + 1]] == prob[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) rank_sum += midrank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(positives), nn = static_cast<double>(negatives);
  out.roc_auc = (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
  return out;
}

Sharpe sharpe_ratio(std::span<const double> pnl) {
  if (pnl.size() < 2) throw DataError("sharpe_ratio: need at least 2 observations");
  Sharpe s;
  s.mean = mean_of(pnl);
  double ss = 0.0;
  for (double v : pnl) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(pnl.size() - 1));
  if (std::all_of(pnl.begin(), pnl.end(), [&](double v) { return v == pnl[0]; })) s.std = 0.0;
  if (s.std == 0.0) {
    s.zero_std = true;
    s.sharpe = s.mean > 0.0 ? kInf : (s.mean < 0.0 ? -kInf : 0.0);
  } else {
    s.sharpe = s.mean / s.std * std::sqrt(kTradingDays);
  }
  return s;
}

Pnl pnl_metrics(const Matrix& prob, const Matrix& returns) {
  if (prob.rows != returns.rows || prob.cols != returns.cols) {
    throw DimensionError("pnl_metrics: predictions " + std::to_string(prob.rows) + " x " + std::to_string(prob.cols) +
                         " do not match returns " + std::to_string(returns.rows) + " x " +
                         std::to_string(returns.cols));
  }
  if (prob.cols == 0) throw DataError("pnl_metrics: no instruments");
  Pnl out;
  out.daily.resize(prob.rows);
  for (std::size_t t = 0; t < prob.rows; ++t) {
    double s = 0.0;
    for (std::size_t j = 0; j < prob.cols; ++j) s += (2.0 * prob(t, j) - 1.0) * returns(t, j);
    out.daily[t] = s / static_cast<double>(prob.cols);
  }
  out.stats = sharpe_ratio(out.daily);
  return out;
}

Interval bootstrap_sharpe_ci(std::span<const double> pnl, const stochastic::RandomSource& rng, double level,
                             std::size_t resamples) {
  const std::size_t n = pnl.size();
  if (n < 30) throw DataError("bootstrap_sharpe_ci: need at least 30 observations, got " + std::to_string(n));
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap_sharpe_ci: level must lie in (0, 1)");
  if (resamples < 2) throw ConfigError("bootstrap_sharpe_ci: need at least 2 resamples");
  if (sharpe_ratio(pnl).zero_std) throw NumericalError("bootstrap_sharpe_ci: PnL series has zero variance");

  std::vector<double> stats(resamples);
  constexpr std::size_t kChunk = 256;
  parallel_for((resamples + kChunk - 1) / kChunk, [&](std::size_t c) {
    std::vector<double> draw(n);
    for (std::size_t b = c * kChunk; b < std::min(resamples, (c + 1) * kChunk); ++b) {
      stochastic::RandomSource stream = rng.child(b);
      for (auto& v : draw) v = pnl[stream.below(n)];
      stats[b] = sharpe_ratio(draw).sharpe;
    }
  });
  const double tail = 0.5 * (1.0 - level);
  return Interval{quantile(stats, tail), quantile(stats, 1.0 - tail)};
}

QvDispersion qv_dispersion(const stochastic::TimeSeriesDataset& paths) {
  const std::size_t m = paths.paths, d = paths.dim, len = paths.dates();
  if (len < 2) throw DataError("qv_dispersion: paths need at least one increment");
  const double horizon = paths.grid[len - 1] - paths.grid[0];
  QvDispersion out;
  out.per_path = Matrix(m, d);
  for (std::size_t p = 0; p < m; ++p)
    for (std::size_t j = 0; j < d; ++j) {
      double qv = 0.0;
      for (std::size_t i = 0; i + 1 < len; ++i) {
        const double inc = paths.at(p, i + 1, j) - paths.at(p, i, j);
        qv += inc * inc;
      }
      out.per_path(p, j) = qv / horizon;
    }
  out.mean.assign(d, 0.0);
  out.std.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    if (m == 0) continue;
    const auto col = out.per_path.column(j);
    out.mean[j] = mean_of(col);
    if (m > 1) {
      double ss = 0.0;
      for (double v : col) ss += (v - out.mean[j]) * (v - out.mean[j]);
      out.std[j] = std::sqrt(ss / static_cast<double>(m - 1));
    }
  }
  return out;
}

AnnualizedStats annualized_stats(std::span<const double> daily) {
  AnnualizedStats out;
  if (daily.empty()) return out;
  const double m = mean_of(daily);
  out.return_pct = 100.0 * m * kTradingDays;
  if (daily.size() > 1) {
    double ss = 0.0;
    for (double v : daily) ss += (v - m) * (v - m);
    out.std_pct = 100.0 * std::sqrt(ss / static_cast<double>(daily.size() - 1)) * std::sqrt(kTradingDays);
    if (std::all_of(daily.begin(), daily.end(), [&](double v) { return v == daily[0]; })) out.std_pct = 0.0;
  }
  return out;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["metrics"] = nlohmann::json::object();
  for (const auto& [k, v] : metrics) j["metrics"][k] = number(v);
  j["series"] = nlohmann::json::object();
  for (const auto& [k, v] : series) {
    auto arr = nlohmann::json::array();
    for (double x : v) arr.push_back(number(x));
    j["series"][k] = arr;
  }
  j["matrices"] = nlohmann::json::object();
  for (const auto& [k, mat] : matrices) {
    auto rows = nlohmann::json::array();
    for (std::size_t r = 0; r < mat.rows; ++r) {
      auto row = nlohmann::json::array();
      for (double x : mat.row(r)) row.push_back(number(x));
      rows.push_back(row);
    }
    j["matrices"][k] = rows;
  }
  j["intervals"] = nlohmann::json::object();
  for (const auto& [k, iv] : intervals) j["intervals"][k] = {{"lo", number(iv.lo)}, {"hi", number(iv.hi)}};
  j["flags"] = flags;
  return j.dump(2);
}

}  // namespace sbbts::eval
