#include "sbbts/core/reference_vol.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "sbbts/errors.hpp"
#include "sbbts/log.hpp"

namespace sbbts::core {

std::vector<double> psd_sqrt(const std::vector<double>& matrix, std::size_t d, std::size_t* singular) {
  if (matrix.size() != d * d) throw DimensionError("psd_sqrt: expected a square matrix");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = matrix[i * d + j];
  a = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  const Eigen::VectorXd lambda = eig.eigenvalues();
  const double tol = 1e-12 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
  Eigen::VectorXd root(lambda.size());
  std::size_t zeros = 0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    if (lambda(k) <= tol) {
      root(k) = 0.0;
      ++zeros;
    } else {
      root(k) = std::sqrt(lambda(k));
    }
  }
  if (singular) *singular = zeros;
  const Eigen::MatrixXd s = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  std::vector<double> out(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

ReferenceVolatility reference_volatility(const stochastic::TimeSeriesDataset& data) {
  if (data.paths < 2) throw DataError("reference_volatility: need at least 2 sample paths");
  const std::size_t d = data.dim, n = data.grid.intervals();
  const double inv_m = 1.0 / static_cast<double>(data.paths);
  ReferenceVolatility out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> mean(d, 0.0);
    for (std::size_t m = 0; m < data.paths; ++m)
      for (std::size_t j = 0; j < d; ++j) mean[j] += (data.at(m, i + 1, j) - data.at(m, i, j)) * inv_m;
    std::vector<double> cov(d * d, 0.0);
    for (std::size_t m = 0; m < data.paths; ++m) {
      for (std::size_t a = 0; a < d; ++a) {
        const double ea = data.at(m, i + 1, a) - data.at(m, i, a) - mean[a];
        for (std::size_t b = 0; b < d; ++b) {
          const double eb = data.at(m, i + 1, b) - data.at(m, i, b) - mean[b];
          cov[a * d + b] += ea * eb * inv_m;
        }
      }
    }
    std::size_t zeros = 0;
    out.sigma_bar.push_back(psd_sqrt(cov, d, &zeros));
    out.covariance.push_back(std::move(cov));
    out.singular_directions += zeros;
  }
  if (out.singular_directions > 0) {
    log::warn("reference_volatility: " + std::to_string(out.singular_directions) +
              " singular direction(s) across intervals; their volatility is set to 0");
  }
  return out;
}

}  // namespace sbbts::core
