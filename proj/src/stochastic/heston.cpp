#include "sbbts/stochastic/heston.hpp"

#include <algorithm>
#include <cmath>

#include "sbbts/errors.hpp"
#include "sbbts/parallel.hpp"

namespace sbbts::stochastic {

void HestonParams::validate() const {
  auto bad = [](const std::string& what) { throw DomainError("HestonParams: " + what); };
  if (!(kappa > 0.0) || !std::isfinite(kappa)) bad("kappa must be > 0");
  if (!(theta > 0.0) || !std::isfinite(theta)) bad("theta must be > 0");
  if (!(xi_vol > 0.0) || !std::isfinite(xi_vol)) bad("xi_vol must be > 0");
  if (!(rho > -1.0 && rho < 1.0)) bad("rho must lie strictly inside (-1, 1)");
  if (!std::isfinite(r)) bad("r must be finite");
  if (!(v0 > 0.0) || !std::isfinite(v0)) bad("v0 must be > 0");
}

HestonPath simulate_heston(const HestonParams& p, std::size_t n_steps, double dt, double x0, RandomSource& rng) {
  p.validate();
  if (!(dt > 0.0)) throw DomainError("simulate_heston: dt must be > 0");
  if (!(x0 > 0.0)) throw DomainError("simulate_heston: x0 must be > 0");

  HestonPath path;
  path.x.resize(n_steps + 1);
  path.v.resize(n_steps + 1);
  path.z_x.resize(n_steps);
  path.z_v.resize(n_steps);
  path.x[0] = x0;
  path.v[0] = p.v0;

  const double sq_dt = std::sqrt(dt);
  const double rho_perp = std::sqrt(1.0 - p.rho * p.rho);
  double x = x0;
  double v = p.v0;  // raw state, may dip below zero
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double z1 = rng.normal();
    const double z2 = p.rho * z1 + rho_perp * rng.normal();
    const double vp = std::max(v, 0.0);
    const double sv = std::sqrt(vp);
    x = x + p.r * x * dt + sv * x * sq_dt * z1;
    v = v + p.kappa * (p.theta - vp) * dt + p.xi_vol * sv * sq_dt * z2;
    path.x[k + 1] = x;
    path.v[k + 1] = std::max(v, 0.0);
    path.z_x[k] = z1;
    path.z_v[k] = z2;
  }
  return path;
}

void HestonRanges::validate() const {
  auto check = [](const Interval& iv, const char* name) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi) {
      throw ConfigError(std::string("HestonRanges: invalid interval for ") + name);
    }
  };
  check(kappa, "kappa");
  check(theta, "theta");
  check(xi_vol, "xi_vol");
  check(rho, "rho");
  check(r, "r");
  if (!(kappa.lo > 0.0)) throw ConfigError("HestonRanges: kappa must be > 0");
  if (!(theta.lo > 0.0)) throw ConfigError("HestonRanges: theta must be > 0");
  if (!(xi_vol.lo > 0.0)) throw ConfigError("HestonRanges: xi_vol must be > 0");
  if (!(rho.lo > -1.0 && rho.hi < 1.0)) throw ConfigError("HestonRanges: rho must lie strictly inside (-1, 1)");
}

HestonDataset sample_heston_dataset(const HestonRanges& ranges, std::size_t paths, std::size_t length, double dt,
                                    double x0, const RandomSource& rng) {
  ranges.validate();
  if (paths == 0) throw ConfigError("sample_heston_dataset: need at least one path");
  if (length < 2) throw ConfigError("sample_heston_dataset: length must be >= 2");

  HestonDataset out{TimeSeriesDataset(TimeGrid::uniform(length - 1, 1.0), paths, 2),
                    std::vector<HestonParams>(paths)};
  constexpr std::size_t kChunk = 16;
  const std::size_t chunks = (paths + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t c) {
    for (std::size_t m = c * kChunk; m < std::min(paths, (c + 1) * kChunk); ++m) {
      RandomSource local = rng.child(m);
      HestonParams p;
      p.kappa = local.uniform(ranges.kappa.lo, ranges.kappa.hi);
      p.theta = local.uniform(ranges.theta.lo, ranges.theta.hi);
      p.xi_vol = local.uniform(ranges.xi_vol.lo, ranges.xi_vol.hi);
      p.rho = local.uniform(ranges.rho.lo, ranges.rho.hi);
      p.r = local.uniform(ranges.r.lo, ranges.r.hi);
      p.v0 = p.theta;
      const auto path = simulate_heston(p, length - 1, dt, x0, local);
      for (std::size_t i = 0; i < length; ++i) {
        out.data.at(m, i, 0) = path.x[i];
        out.data.at(m, i, 1) = path.v[i];
      }
      out.truth[m] = p;
    }
  });
  return out;
}

}  // namespace sbbts::stochastic
