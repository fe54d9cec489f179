#pragma once

// Factor pipeline for high-dimensional returns:
//   X = F P^T + mean + R
// with F the leading principal-component scores, P orthonormal loadings and
// R residuals modeled per dimension by a two-component Gaussian mixture.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sbbts/matrix.hpp"
#include "sbbts/stochastic/random.hpp"

namespace sbbts::factors {

struct PcaModel {
  std::vector<double> mean;                // d
  std::vector<double> scale;               // d, all ones unless standardized
  Matrix loadings;                         // d x m, orthonormal columns
  std::vector<double> explained_variance;  // m, non-increasing
  std::vector<double> eigenvalues;         // d, the full spectrum
  bool standardized = false;

  std::size_t dim() const { return loadings.rows; }
  std::size_t components() const { return loadings.cols; }
};

/// Eigendecomposition of the 1/N covariance of the centered (optionally
/// standardized) returns. Each loading is signed so its largest-magnitude
/// entry is positive. Requires 1 <= m <= min(N - 1, d).
PcaModel pca_fit(const Matrix& returns, std::size_t m, bool standardize = false);
Matrix pca_transform(const PcaModel& model, const Matrix& returns);  // N x m
Matrix pca_inverse(const PcaModel& model, const Matrix& factors);    // N x d

struct KMeansResult {
  std::vector<std::size_t> assignment;
  Matrix centroids;  // k x features
  double inertia = 0.0;
};

/// Lloyd iterations from k-means++ seeds; the restart with the lowest
/// inertia wins. Points are the rows of `points`.
KMeansResult kmeans(const Matrix& points, std::size_t k, stochastic::RandomSource& rng, std::size_t restarts = 10,
                    std::size_t max_iter = 300);

struct ClusterFeatureOptions {
  bool use_std = true;
  bool use_kurtosis = true;
  bool use_lag1_acf = true;
  /// z-score each feature column across factors before clustering.
  bool standardize = true;
};

/// One row per factor (column of `factors`) with the selected summary
/// statistics of that factor's series.
Matrix factor_cluster_features(const Matrix& factors, const ClusterFeatureOptions& options = {});

struct Gmm2 {
  std::array<double, 2> weight{0.5, 0.5};
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 2> variance{1.0, 1.0};
  /// Average log-likelihood after initialization and after each EM step.
  std::vector<double> loglik_trace;
  bool converged = false;
};

inline constexpr double kGmmVarianceFloor = 1e-10;

/// EM for a univariate two-component mixture, initialized by splitting the
/// sorted sample at its median. Stops after max_iter steps or when the
/// average log-likelihood improves by less than tol.
Gmm2 gmm2_fit(std::span<const double> x, std::size_t max_iter = 100, double tol = 1e-8,
              double variance_floor = kGmmVarianceFloor);
/// Average log-likelihood of x under the mixture.
double gmm2_loglik(const Gmm2& model, std::span<const double> x);
std::vector<double> gmm2_sample(const Gmm2& model, std::size_t n, stochastic::RandomSource& rng);

struct FactorModel {
  PcaModel pca;
  std::vector<std::size_t> clusters;  // group of each factor
  std::vector<Gmm2> residuals;        // one per dimension
};

struct FactorFit {
  FactorModel model;
  Matrix factors;    // N x m
  Matrix residuals;  // N x d
};

/// PCA with m components, k-means of the factors into k groups and one
/// mixture per residual dimension.
FactorFit fit_factor_model(const Matrix& returns, std::size_t m, std::size_t k, stochastic::RandomSource& rng,
                           bool standardize = false, const ClusterFeatureOptions& cluster_options = {});

/// i.i.d. draws from each residual mixture, N x d. Dimension j uses rng.child(j).
Matrix sample_residuals(const FactorModel& model, std::size_t n, const stochastic::RandomSource& rng);

/// X = F P^T + mean + R (undoing standardization when the PCA used it).
Matrix reconstruct(const Matrix& factors, const FactorModel& model, const Matrix& residuals);

/// Rows [s, s + length) for s = 0, stride, ... while the window fits.
std::vector<Matrix> sliding_windows(const Matrix& series, std::size_t length = 253, std::size_t stride = 1);

struct WindowSplit {
  Matrix input;                      // (length - 1) x d
  std::vector<unsigned char> labels; // 1 where the last return is positive
};
WindowSplit split_target(const Matrix& window);

inline constexpr std::array<std::size_t, 6> kLongHorizons{5, 10, 21, 63, 126, 252};
inline constexpr std::array<std::size_t, 4> kShortHorizons{3, 5, 10, 21};

struct FeatureTable {
  std::vector<std::string> columns;
  Matrix values;  // one row per instrument
  /// Per row: a z-score had zero variance and was emitted as 0.
  std::vector<unsigned char> degenerate;
};

/// Handcrafted per-instrument statistics at row t of a daily return matrix,
/// using rows <= t only. Requires t >= 252.
FeatureTable engineer_features(const Matrix& returns, std::size_t t);

/// p noisy copies X + lambda * eps, eps ~ N(0, s^2) elementwise with s the
/// sample std of all entries of X. Copy c uses rng.child(c).
std::vector<Matrix> noise_augment(const Matrix& window, std::size_t copies, double lambda,
                                  const stochastic::RandomSource& rng);

}  // namespace sbbts::factors
