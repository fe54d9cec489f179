#include "sbbts/factors/factors.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sbbts/errors.hpp"
#include "sbbts/log.hpp"
#include "sbbts/parallel.hpp"

namespace sbbts::factors {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

void require_finite(const Matrix& m, const char* what) {
  for (double v : m.data) {
    if (!std::isfinite(v)) throw DataError(std::string(what) + ": non-finite value");
  }
}

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Sample std with n-1 denominator; exactly 0 when every value is equal.
double sample_std(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) return 0.0;
  const double mu = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double log_normal_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(variance) + d * d / variance);
}

double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

}  // namespace

PcaModel pca_fit(const Matrix& returns, std::size_t m, bool standardize) {
  const std::size_t n = returns.rows, d = returns.cols;
  if (n < 2 || d == 0) throw DataError("pca_fit: need at least 2 observations of dimension >= 1");
  if (m == 0 || m > std::min(n - 1, d)) {
    throw ConfigError("pca_fit: components m = " + std::to_string(m) + " must lie in [1, min(N - 1, d)] = [1, " +
                      std::to_string(std::min(n - 1, d)) + "]");
  }
  require_finite(returns, "pca_fit");

  PcaModel model;
  model.standardized = standardize;
  model.mean.assign(d, 0.0);
  model.scale.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    const auto col = returns.column(j);
    model.mean[j] = mean_of(col);
    if (standardize) {
      // 1/N like the covariance, so standardized data has unit diagonal.
      const double s = sample_std(col) * std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n));
      if (s > 0.0) {
        model.scale[j] = s;
      } else {
        log::warn("pca_fit: column " + std::to_string(j) + " has zero variance and is left unscaled");
      }
    }
  }

  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (returns(i, j) - model.mean[j]) / model.scale[j];
  const Eigen::MatrixXd cov = (z.transpose() * z) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("pca_fit: eigendecomposition failed");

  // Eigen sorts ascending; flip to descending.
  model.eigenvalues.resize(d);
  for (std::size_t c = 0; c < d; ++c) model.eigenvalues[c] = std::max(0.0, eig.eigenvalues()(static_cast<Eigen::Index>(d - 1 - c)));
  model.explained_variance.assign(model.eigenvalues.begin(), model.eigenvalues.begin() + static_cast<std::ptrdiff_t>(m));
  model.loadings = Matrix(d, m);
  for (std::size_t c = 0; c < m; ++c) {
    const auto vec = eig.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - c));
    Eigen::Index arg = 0;
    vec.cwiseAbs().maxCoeff(&arg);
    const double sign = vec(arg) < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < d; ++j) model.loadings(j, c) = sign * vec(static_cast<Eigen::Index>(j));
  }
  return model;
}

Matrix pca_transform(const PcaModel& model, const Matrix& returns) {
  const std::size_t d = model.dim(), m = model.components();
  if (returns.cols != d) {
    throw DimensionError("pca_transform: expected " + std::to_string(d) + " columns, got " + std::to_string(returns.cols));
  }
  Matrix f(returns.rows, m);
  for (std::size_t i = 0; i < returns.rows; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double z = (returns(i, j) - model.mean[j]) / model.scale[j];
      for (std::size_t c = 0; c < m; ++c) f(i, c) += z * model.loadings(j, c);
    }
  return f;
}

Matrix pca_inverse(const PcaModel& model, const Matrix& factors) {
  const std::size_t d = model.dim(), m = model.components();
  if (factors.cols != m) {
    throw DimensionError("pca_inverse: expected " + std::to_string(m) + " factor columns, got " +
                         std::to_string(factors.cols));
  }
  Matrix x(factors.rows, d);
  for (std::size_t i = 0; i < factors.rows; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double z = 0.0;
      for (std::size_t c = 0; c < m; ++c) z += factors(i, c) * model.loadings(j, c);
      x(i, j) = z * model.scale[j] + model.mean[j];
    }
  return x;
}

KMeansResult kmeans(const Matrix& points, std::size_t k, stochastic::RandomSource& rng, std::size_t restarts,
                    std::size_t max_iter) {
  const std::size_t n = points.rows, f = points.cols;
  if (k == 0) throw ConfigError("kmeans: k must be >= 1");
  if (k > n) throw ConfigError("kmeans: k = " + std::to_string(k) + " exceeds the number of points " + std::to_string(n));
  if (restarts == 0) throw ConfigError("kmeans: restarts must be >= 1");
  require_finite(points, "kmeans");

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n);
  for (std::size_t rs = 0; rs < restarts; ++rs) {
    // k-means++ seeding.
    Matrix centroids(k, f);
    std::size_t first = rng.below(n);
    std::copy(points.row(first).begin(), points.row(first).end(), centroids.row(0).begin());
    for (std::size_t i = 0; i < n; ++i) dist[i] = squared_distance(points.row(i), centroids.row(0));
    for (std::size_t c = 1; c < k; ++c) {
      const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
      std::size_t pick = 0;
      if (total > 0.0) {
        double u = rng.uniform() * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          if (u < dist[i]) {
            pick = i;
            break;
          }
          u -= dist[i];
        }
      } else {
        pick = rng.below(n);
      }
      std::copy(points.row(pick).begin(), points.row(pick).end(), centroids.row(c).begin());
      for (std::size_t i = 0; i < n; ++i) dist[i] = std::min(dist[i], squared_distance(points.row(i), centroids.row(c)));
    }

    std::vector<std::size_t> assign(n, k);
    double inertia = 0.0;
    for (std::size_t it = 0; it < max_iter; ++it) {
      bool changed = false;
      inertia = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t arg = 0;
        double bestd = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
          const double dd = squared_distance(points.row(i), centroids.row(c));
          if (dd < bestd) {
            bestd = dd;
            arg = c;
          }
        }
        if (assign[i] != arg) changed = true;
        assign[i] = arg;
        dist[i] = bestd;
        inertia += bestd;
      }
      if (!changed) break;
      Matrix sums(k, f);
      std::vector<std::size_t> counts(k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        ++counts[assign[i]];
        for (std::size_t j = 0; j < f; ++j) sums(assign[i], j) += points(i, j);
      }
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) {
          // Empty cluster: move it onto the point farthest from its centroid.
          const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
          std::copy(points.row(far).begin(), points.row(far).end(), centroids.row(c).begin());
          dist[far] = 0.0;
          continue;
        }
        for (std::size_t j = 0; j < f; ++j) centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
      }
    }
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.assignment = assign;
      best.centroids = centroids;
    }
  }
  return best;
}

Matrix factor_cluster_features(const Matrix& factors, const ClusterFeatureOptions& options) {
  std::vector<int> which;
  if (options.use_std) which.push_back(0);
  if (options.use_kurtosis) which.push_back(1);
  if (options.use_lag1_acf) which.push_back(2);
  if (which.empty()) throw ConfigError("factor_cluster_features: no feature selected");
  const std::size_t n = factors.rows, m = factors.cols;
  if (n < 3) throw DataError("factor_cluster_features: need at least 3 observations");

  Matrix out(m, which.size());
  for (std::size_t c = 0; c < m; ++c) {
    const auto x = factors.column(c);
    const double mu = mean_of(x);
    double m2 = 0.0, m4 = 0.0, lag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = x[i] - mu;
      m2 += e * e;
      m4 += e * e * e * e;
      if (i > 0) lag += e * (x[i - 1] - mu);
    }
    const double var = m2 / static_cast<double>(n);
    const double stats[3] = {
        std::sqrt(m2 / static_cast<double>(n - 1)),
        var > 0.0 ? (m4 / static_cast<double>(n)) / (var * var) : 0.0,
        m2 > 0.0 ? lag / m2 : 0.0,
    };
    for (std::size_t s = 0; s < which.size(); ++s) out(c, s) = stats[which[s]];
  }
  if (options.standardize && m > 1) {
    for (std::size_t s = 0; s < which.size(); ++s) {
      const auto col = out.column(s);
      const double mu = mean_of(col), sd = sample_std(col);
      for (std::size_t c = 0; c < m; ++c) out(c, s) = sd > 0.0 ? (out(c, s) - mu) / sd : 0.0;
    }
  }
  return out;
}

double gmm2_loglik(const Gmm2& g, std::span<const double> x) {
  double ll = 0.0;
  for (double v : x) {
    ll += log_sum_exp(std::log(g.weight[0]) + log_normal_pdf(v, g.mean[0], g.variance[0]),
                      std::log(g.weight[1]) + log_normal_pdf(v, g.mean[1], g.variance[1]));
  }
  return ll / static_cast<double>(x.size());
}

Gmm2 gmm2_fit(std::span<const double> x, std::size_t max_iter, double tol, double variance_floor) {
  const std::size_t n = x.size();
  if (n < 10) throw DataError("gmm2_fit: need at least 10 observations, got " + std::to_string(n));
  for (double v : x) {
    if (!std::isfinite(v)) throw DataError("gmm2_fit: non-finite observation");
  }
  if (!(variance_floor > 0.0)) throw ConfigError("gmm2_fit: variance floor must be > 0");

  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t half = n / 2;
  const std::span<const double> lower(sorted.data(), half), upper(sorted.data() + half, n - half);
  Gmm2 g;
  g.mean = {mean_of(lower), mean_of(upper)};
  const double s0 = sample_std(lower), s1 = sample_std(upper);
  g.variance = {std::max(s0 * s0, variance_floor), std::max(s1 * s1, variance_floor)};
  g.weight = {static_cast<double>(half) / static_cast<double>(n), static_cast<double>(n - half) / static_cast<double>(n)};
  g.loglik_trace.push_back(gmm2_loglik(g, x));

  constexpr double kMinWeight = 1e-12;
  std::vector<double> resp(n);
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::log(g.weight[0]) + log_normal_pdf(x[i], g.mean[0], g.variance[0]);
      const double b = std::log(g.weight[1]) + log_normal_pdf(x[i], g.mean[1], g.variance[1]);
      resp[i] = std::exp(a - log_sum_exp(a, b));
    }
    double n0 = 0.0, sx0 = 0.0, sx1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      n0 += resp[i];
      sx0 += resp[i] * x[i];
      sx1 += (1.0 - resp[i]) * x[i];
    }
    const double n1 = static_cast<double>(n) - n0;
    Gmm2 next = g;
    next.loglik_trace.clear();
    if (n0 > 0.0) next.mean[0] = sx0 / n0;
    if (n1 > 0.0) next.mean[1] = sx1 / n1;
    double ss0 = 0.0, ss1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ss0 += resp[i] * (x[i] - next.mean[0]) * (x[i] - next.mean[0]);
      ss1 += (1.0 - resp[i]) * (x[i] - next.mean[1]) * (x[i] - next.mean[1]);
    }
    next.variance[0] = n0 > 0.0 ? std::max(ss0 / n0, variance_floor) : g.variance[0];
    next.variance[1] = n1 > 0.0 ? std::max(ss1 / n1, variance_floor) : g.variance[1];
    const double w0 = std::clamp(n0 / static_cast<double>(n), kMinWeight, 1.0 - kMinWeight);
    next.weight = {w0, 1.0 - w0};

    const double ll = gmm2_loglik(next, x);
    const double prev = g.loglik_trace.back();
    next.loglik_trace = std::move(g.loglik_trace);
    next.loglik_trace.push_back(ll);
    g = std::move(next);
    if (ll < prev - 1e-9 * std::max(1.0, std::abs(prev))) {
      log::warn("gmm2_fit: log-likelihood decreased at iteration " + std::to_string(it + 1));
    }
    if (std::abs(ll - prev) < tol) {
      g.converged = true;
      break;
    }
  }
  return g;
}

std::vector<double> gmm2_sample(const Gmm2& g, std::size_t n, stochastic::RandomSource& rng) {
  std::vector<double> out(n);
  for (auto& v : out) {
    const int c = rng.uniform() < g.weight[0] ? 0 : 1;
    v = g.mean[c] + std::sqrt(g.variance[c]) * rng.normal();
  }
  return out;
}

FactorFit fit_factor_model(const Matrix& returns, std::size_t m, std::size_t k, stochastic::RandomSource& rng,
                           bool standardize, const ClusterFeatureOptions& cluster_options) {
  FactorFit fit;
  fit.model.pca = pca_fit(returns, m, standardize);
  fit.factors = pca_transform(fit.model.pca, returns);
  const Matrix rank_m = pca_inverse(fit.model.pca, fit.factors);
  fit.residuals = Matrix(returns.rows, returns.cols);
  for (std::size_t i = 0; i < returns.data.size(); ++i) fit.residuals.data[i] = returns.data[i] - rank_m.data[i];

  if (k > m) throw ConfigError("fit_factor_model: k = " + std::to_string(k) + " exceeds m = " + std::to_string(m));
  fit.model.clusters = kmeans(factor_cluster_features(fit.factors, cluster_options), k, rng).assignment;

  const std::size_t d = returns.cols;
  fit.model.residuals.resize(d);
  parallel_for(d, [&](std::size_t j) { fit.model.residuals[j] = gmm2_fit(fit.residuals.column(j)); });
  return fit;
}

Matrix sample_residuals(const FactorModel& model, std::size_t n, const stochastic::RandomSource& rng) {
  const std::size_t d = model.residuals.size();
  Matrix out(n, d);
  for (std::size_t j = 0; j < d; ++j) {
    stochastic::RandomSource stream = rng.child(j);
    const auto col = gmm2_sample(model.residuals[j], n, stream);
    for (std::size_t i = 0; i < n; ++i) out(i, j) = col[i];
  }
  return out;
}

Matrix reconstruct(const Matrix& factors, const FactorModel& model, const Matrix& residuals) {
  const std::size_t d = model.pca.dim();
  if (factors.cols != model.pca.components() || residuals.cols != d || residuals.rows != factors.rows) {
    throw DimensionError("reconstruct: expected factors N x " + std::to_string(model.pca.components()) +
                         " and residuals N x " + std::to_string(d) + ", got " + std::to_string(factors.rows) + " x " +
                         std::to_string(factors.cols) + " and " + std::to_string(residuals.rows) + " x " +
                         std::to_string(residuals.cols));
  }
  Matrix x = pca_inverse(model.pca, factors);
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += residuals.data[i];
  return x;
}

std::vector<Matrix> sliding_windows(const Matrix& series, std::size_t length, std::size_t stride) {
  if (length == 0 || stride == 0) throw ConfigError("sliding_windows: length and stride must be >= 1");
  if (series.rows < length) {
    throw DataError("sliding_windows: series has " + std::to_string(series.rows) + " rows, window length is " +
                    std::to_string(length));
  }
  std::vector<Matrix> out;
  for (std::size_t s = 0; s + length <= series.rows; s += stride) {
    Matrix w(length, series.cols);
    std::copy(series.data.begin() + static_cast<std::ptrdiff_t>(s * series.cols),
              series.data.begin() + static_cast<std::ptrdiff_t>((s + length) * series.cols), w.data.begin());
    out.push_back(std::move(w));
  }
  return out;
}

WindowSplit split_target(const Matrix& window) {
  if (window.rows < 2) throw DataError("split_target: window needs at least 2 rows");
  WindowSplit out;
  out.input = Matrix(window.rows - 1, window.cols,
                     std::vector<double>(window.data.begin(), window.data.end() - static_cast<std::ptrdiff_t>(window.cols)));
  out.labels.resize(window.cols);
  for (std::size_t j = 0; j < window.cols; ++j) out.labels[j] = window(window.rows - 1, j) > 0.0 ? 1 : 0;
  return out;
}

FeatureTable engineer_features(const Matrix& returns, std::size_t t) {
  const std::size_t d = returns.cols;
  const std::size_t max_h = kLongHorizons.back();
  if (t < max_h) {
    throw DomainError("engineer_features: t = " + std::to_string(t) + " is below the longest horizon " +
                      std::to_string(max_h));
  }
  if (t >= returns.rows) throw DomainError("engineer_features: t is past the last row");
  if (d == 0) throw DataError("engineer_features: no instruments");

  std::vector<double> market(t + 1, 0.0);
  for (std::size_t s = 0; s <= t; ++s) {
    for (std::size_t j = 0; j < d; ++j) market[s] += returns(s, j);
    market[s] /= static_cast<double>(d);
  }
  // Window of the h values ending at row t: x[t-h+1 .. t].
  auto window = [&](const std::vector<double>& x, std::size_t h) {
    return std::span<const double>(x.data() + (t + 1 - h), h);
  };

  FeatureTable table;
  table.columns.push_back("feature.return_t-1_market");
  for (auto h : kLongHorizons) table.columns.push_back("feature.cum_ret_" + std::to_string(h));
  for (auto h : kLongHorizons) table.columns.push_back("feature.vol_" + std::to_string(h));
  for (auto h : kShortHorizons) table.columns.push_back("feature.ret_t-1_zscore_" + std::to_string(h));
  for (auto h : kShortHorizons) table.columns.push_back("feature.mkt_cumret_" + std::to_string(h));
  for (auto h : kShortHorizons) table.columns.push_back("feature.mkt_vol_" + std::to_string(h));
  for (auto h : kShortHorizons) table.columns.push_back("feature.mkt_mean_" + std::to_string(h));

  std::vector<double> market_row;
  market_row.push_back(market[t - 1]);
  for (auto h : kShortHorizons) {
    const auto w = window(market, h);
    market_row.push_back(std::accumulate(w.begin(), w.end(), 0.0));
  }
  for (auto h : kShortHorizons) market_row.push_back(sample_std(window(market, h)));
  for (auto h : kShortHorizons) market_row.push_back(mean_of(window(market, h)));

  table.values = Matrix(d, table.columns.size());
  table.degenerate.assign(d, 0);
  std::vector<double> own(t + 1);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t s = 0; s <= t; ++s) own[s] = returns(s, j);
    std::vector<double> row{market_row[0]};
    for (auto h : kLongHorizons) {
      const auto w = window(own, h);
      row.push_back(std::accumulate(w.begin(), w.end(), 0.0));
    }
    for (auto h : kLongHorizons) row.push_back(sample_std(window(own, h)));
    for (auto h : kShortHorizons) {
      const auto w = window(own, h);
      const double sd = sample_std(w);
      if (sd > 0.0) {
        row.push_back((own[t - 1] - mean_of(w)) / sd);
      } else {
        row.push_back(0.0);
        table.degenerate[j] = 1;
      }
    }
    row.insert(row.end(), market_row.begin() + 1, market_row.end());
    std::copy(row.begin(), row.end(), table.values.row(j).begin());
  }
  return table;
}

std::vector<Matrix> noise_augment(const Matrix& window, std::size_t copies, double lambda,
                                  const stochastic::RandomSource& rng) {
  if (copies == 0) throw ConfigError("noise_augment: copies must be >= 1");
  const double sd = sample_std(window.data);
  std::vector<Matrix> out(copies, window);
  if (sd == 0.0 || lambda == 0.0) return out;
  for (std::size_t c = 0; c < copies; ++c) {
    stochastic::RandomSource stream = rng.child(c);
    for (auto& v : out[c].data) v += lambda * sd * stream.normal();
  }
  return out;
}

}  // namespace sbbts::factors
