#include "sbbts/calib/heston_qmle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "sbbts/errors.hpp"
#include "sbbts/log.hpp"
#include "sbbts/parallel.hpp"

namespace sbbts::calib {

using stochastic::HestonParams;

namespace {

struct Transitions {
  std::vector<double> y1, y2, z, w;
  std::size_t floored = 0;
};

Transitions transitions(std::span<const double> x, std::span<const double> v, double dt) {
  if (x.size() != v.size()) throw DataError("heston_qmle: X and v have different lengths");
  if (x.size() < 10) throw DataError("heston_qmle: path length must be >= 10, got " + std::to_string(x.size()));
  if (!(dt > 0.0)) throw DomainError("heston_qmle: dt must be > 0");
  Transitions tr;
  const std::size_t n = x.size() - 1;
  tr.y1.resize(n);
  tr.y2.resize(n);
  tr.z.resize(n);
  tr.w.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(x[k]) || !std::isfinite(v[k]) || !std::isfinite(x[k + 1]) || !std::isfinite(v[k + 1])) {
      throw DataError("heston_qmle: non-finite observation at index " + std::to_string(k));
    }
    if (!(x[k] > 0.0)) throw DataError("heston_qmle: non-positive price at index " + std::to_string(k));
    double vk = v[k];
    if (!(vk > kVarianceFloor)) {
      vk = kVarianceFloor;
      ++tr.floored;
    }
    const double sq = std::sqrt(vk * dt);
    tr.y1[k] = (x[k + 1] - x[k]) / (x[k] * sq);
    tr.y2[k] = (v[k + 1] - v[k]) / sq;
    tr.z[k] = std::sqrt(dt / vk);
    tr.w[k] = sq;
  }
  return tr;
}

}  // namespace

HestonFit heston_qmle(std::span<const double> x, std::span<const double> v, double dt, bool warn) {
  const Transitions tr = transitions(x, v, dt);
  const std::size_t n = tr.y1.size();
  const double nd = static_cast<double>(n);
  if (warn && tr.floored > 0) {
    log::warn("heston_qmle: " + std::to_string(tr.floored) + " non-positive variance observation(s) floored at 1e-8");
  }

  double szz = 0.0, szy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    szz += tr.z[k] * tr.z[k];
    szy += tr.z[k] * tr.y1[k];
  }
  const double r = szy / szz;

  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), 3);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
  double e1_norm = 0.0, y1_norm = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    const double e1 = tr.y1[k] - r * tr.z[k];
    design(row, 0) = tr.z[k];
    design(row, 1) = -tr.w[k];
    design(row, 2) = e1;
    rhs(row) = tr.y2[k];
    e1_norm += e1 * e1;
    y1_norm += tr.y1[k] * tr.y1[k];
  }
  // Without price noise the e1 column vanishes and carries no information.
  const bool use_e1 = e1_norm > 1e-20 * std::max(1.0, y1_norm);
  const Eigen::Index cols = use_e1 ? 3 : 2;
  const Eigen::MatrixXd a = design.leftCols(cols);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < 2) {
    throw NumericalError("heston_qmle: kappa and theta are not identifiable (variance path is constant)");
  }
  const Eigen::VectorXd coef = qr.solve(rhs);
  const Eigen::VectorXd resid = rhs - a * coef;
  const double s2 = resid.squaredNorm() / nd;

  const double kappa = coef(1);
  if (std::abs(kappa) < std::numeric_limits<double>::min()) {
    throw NumericalError("heston_qmle: theta is not identifiable (estimated kappa is zero)");
  }
  const double theta = coef(0) / kappa;
  const double c = use_e1 ? coef(2) : 0.0;
  const double xi = std::sqrt(c * c + s2);
  const double rho = xi > 0.0 ? c / xi : 0.0;

  HestonFit fit;
  fit.floored = tr.floored;
  fit.params.kappa = kappa;
  fit.params.theta = theta;
  fit.params.xi_vol = xi;
  fit.params.rho = rho;
  fit.params.r = r;
  fit.params.v0 = std::max(v[0], kVarianceFloor);

  // Standard errors from the regression covariances and the delta method.
  const Eigen::MatrixXd cov = s2 * (a.transpose() * a).inverse();
  fit.standard_error.r = 1.0 / std::sqrt(szz);
  fit.standard_error.kappa = std::sqrt(cov(1, 1));
  const double ga = 1.0 / kappa, gb = -coef(0) / (kappa * kappa);
  fit.standard_error.theta = std::sqrt(ga * ga * cov(0, 0) + 2.0 * ga * gb * cov(0, 1) + gb * gb * cov(1, 1));
  const double var_c = use_e1 ? cov(2, 2) : 0.0;
  const double var_xi2 = 4.0 * c * c * var_c + 2.0 * s2 * s2 / nd;
  fit.standard_error.xi_vol = xi > 0.0 ? std::sqrt(var_xi2) / (2.0 * xi) : 0.0;
  fit.standard_error.rho = (1.0 - rho * rho) / std::sqrt(nd);
  fit.standard_error.v0 = 0.0;
  return fit;
}

double heston_quasi_loglik(std::span<const double> x, std::span<const double> v, double dt, const HestonParams& p) {
  if (!(p.xi_vol > 0.0) || !(p.rho > -1.0 && p.rho < 1.0)) return -std::numeric_limits<double>::infinity();
  const Transitions tr = transitions(x, v, dt);
  const double xi2 = p.xi_vol * p.xi_vol;
  const double one_m_rho2 = 1.0 - p.rho * p.rho;
  double ll = 0.0;
  for (std::size_t k = 0; k < tr.y1.size(); ++k) {
    const double e1 = tr.y1[k] - p.r * tr.z[k];
    const double u = tr.y2[k] - p.kappa * p.theta * tr.z[k] + p.kappa * tr.w[k];
    const double q = (xi2 * e1 * e1 - 2.0 * p.rho * p.xi_vol * e1 * u + u * u) / (xi2 * one_m_rho2);
    ll += -std::log(p.xi_vol) - 0.5 * std::log(one_m_rho2) - 0.5 * q;
  }
  return ll;
}

double parameter_value(const HestonParams& p, std::size_t index) {
  switch (index) {
    case 0: return p.kappa;
    case 1: return p.theta;
    case 2: return p.xi_vol;
    case 3: return p.rho;
    case 4: return p.r;
  }
  throw ContractError("parameter_value: index out of range");
}

SourceReport calibrate_dataset(const stochastic::TimeSeriesDataset& data, double dt, const std::string& name) {
  SourceReport report;
  report.name = name;
  if (data.paths == 0) return report;
  if (data.dim != 2) throw DataError("calibrate_dataset: expected (X, v) paths, got dimension " + std::to_string(data.dim));

  std::vector<HestonParams> fits(data.paths);
  std::vector<char> ok(data.paths, 0), clipped(data.paths, 0);
  std::vector<std::size_t> floored(data.paths, 0);
  constexpr std::size_t kChunk = 32;
  parallel_for((data.paths + kChunk - 1) / kChunk, [&](std::size_t c) {
    std::vector<double> xs(data.dates()), vs(data.dates());
    for (std::size_t m = c * kChunk; m < std::min(data.paths, (c + 1) * kChunk); ++m) {
      for (std::size_t i = 0; i < data.dates(); ++i) {
        xs[i] = data.at(m, i, 0);
        vs[i] = data.at(m, i, 1);
      }
      try {
        HestonFit f = heston_qmle(xs, vs, dt, false);
        HestonParams p = f.params;
        const HestonParams raw = p;
        p.kappa = std::max(p.kappa, 0.0);
        p.theta = std::max(p.theta, 0.0);
        p.xi_vol = std::max(p.xi_vol, 0.0);
        p.rho = std::clamp(p.rho, -1.0, 1.0);
        if (!std::isfinite(p.kappa) || !std::isfinite(p.theta) || !std::isfinite(p.r)) continue;
        clipped[m] = raw.kappa != p.kappa || raw.theta != p.theta || raw.xi_vol != p.xi_vol || raw.rho != p.rho;
        floored[m] = f.floored;
        fits[m] = p;
        ok[m] = 1;
      } catch (const Error&) {
      }
    }
  });
  std::size_t total_floored = 0;
  for (std::size_t m = 0; m < data.paths; ++m) {
    total_floored += floored[m];
    if (!ok[m]) {
      ++report.skipped;
      continue;
    }
    report.clipped += static_cast<std::size_t>(clipped[m]);
    report.estimates.push_back(fits[m]);
  }
  if (total_floored > 0) {
    log::warn("calibrate_dataset(" + name + "): " + std::to_string(total_floored) +
              " variance observation(s) floored at 1e-8");
  }
  if (report.skipped > 0) {
    log::warn("calibrate_dataset(" + name + "): skipped " + std::to_string(report.skipped) + " path(s)");
  }
  return report;
}

CalibrationReport build_report(std::vector<SourceReport> sources, std::size_t bins) {
  if (bins == 0) throw ConfigError("build_report: bins must be >= 1");
  CalibrationReport report;
  report.sources = std::move(sources);
  for (std::size_t p = 0; p < 5; ++p) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : report.sources)
      for (const auto& e : s.estimates) {
        lo = std::min(lo, parameter_value(e, p));
        hi = std::max(hi, parameter_value(e, p));
      }
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    } else if (hi <= lo) {
      lo -= 0.5;
      hi += 0.5;
    }
    std::vector<double> edges(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
    report.bin_edges.push_back(edges);

    for (auto& s : report.sources) {
      ParameterSummary sum;
      sum.histogram.assign(bins, 0);
      const std::size_t count = s.estimates.size();
      if (count > 0) {
        sum.min = std::numeric_limits<double>::infinity();
        sum.max = -sum.min;
        for (const auto& e : s.estimates) {
          const double val = parameter_value(e, p);
          sum.mean += val / static_cast<double>(count);
          sum.min = std::min(sum.min, val);
          sum.max = std::max(sum.max, val);
          auto b = static_cast<std::size_t>((val - lo) / (hi - lo) * static_cast<double>(bins));
          sum.histogram[std::min(b, bins - 1)]++;
        }
        if (count > 1) {
          double ss = 0.0;
          for (const auto& e : s.estimates) ss += (parameter_value(e, p) - sum.mean) * (parameter_value(e, p) - sum.mean);
          sum.std = std::sqrt(ss / static_cast<double>(count - 1));
        }
      }
      s.summaries.push_back(sum);
    }
  }
  return report;
}

}  // namespace sbbts::calib
