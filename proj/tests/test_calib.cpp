#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>

#include "doctest.h"
#include "sbbts/calib/heston_qmle.hpp"
#include "sbbts/errors.hpp"

using namespace sbbts;
using namespace sbbts::calib;
using stochastic::HestonParams;
using stochastic::RandomSource;

namespace {

constexpr double kDt = 1.0 / 252.0;

using Vec5 = std::array<double, 5>;

HestonParams from_vec(const Vec5& v) { return HestonParams{v[0], v[1], v[2], v[3], v[4], 1.0}; }

// Plain Nelder-Mead maximizer, used only as an independent check of the closed form.
Vec5 nelder_mead_max(const std::function<double(const Vec5&)>& f, Vec5 start, double step, int iters) {
  std::array<Vec5, 6> s;
  std::array<double, 6> fv;
  for (int i = 0; i < 6; ++i) {
    s[i] = start;
    if (i > 0) s[i][i - 1] += step;
    fv[i] = -f(s[i]);
  }
  for (int it = 0; it < iters; ++it) {
    std::array<int, 6> ord;
    std::iota(ord.begin(), ord.end(), 0);
    std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    const int worst = ord[5], second = ord[4], best = ord[0];
    Vec5 c{};
    for (int i : ord)
      if (i != worst)
        for (int k = 0; k < 5; ++k) c[k] += s[i][k] / 5.0;
    auto along = [&](double a) {
      Vec5 p;
      for (int k = 0; k < 5; ++k) p[k] = c[k] + a * (s[worst][k] - c[k]);
      return p;
    };
    const Vec5 r = along(-1.0);
    const double fr = -f(r);
    if (fr < fv[best]) {
      const Vec5 e = along(-2.0);
      const double fe = -f(e);
      if (fe < fr) s[worst] = e, fv[worst] = fe;
      else s[worst] = r, fv[worst] = fr;
    } else if (fr < fv[second]) {
      s[worst] = r, fv[worst] = fr;
    } else {
      const Vec5 k = along(0.5);
      const double fk = -f(k);
      if (fk < fv[worst]) {
        s[worst] = k, fv[worst] = fk;
      } else {
        for (int i = 0; i < 6; ++i) {
          if (i == best) continue;
          for (int q = 0; q < 5; ++q) s[i][q] = s[best][q] + 0.5 * (s[i][q] - s[best][q]);
          fv[i] = -f(s[i]);
        }
      }
    }
  }
  return s[std::min_element(fv.begin(), fv.end()) - fv.begin()];
}

stochastic::TimeSeriesDataset to_dataset(const stochastic::HestonPath& p) {
  std::vector<double> values;
  for (std::size_t i = 0; i < p.x.size(); ++i) {
    values.push_back(p.x[i]);
    values.push_back(p.v[i]);
  }
  return {stochastic::TimeGrid::uniform(p.x.size() - 1), 1, 2, values};
}

}  // namespace

TEST_CASE("noiseless path is recovered exactly") {
  const double kappa = 3.0, theta = 0.8, r = 0.04;
  std::vector<double> x{1.0}, v{1.4};
  for (int k = 0; k < 60; ++k) {
    x.push_back(x.back() * (1.0 + r * kDt));
    v.push_back(v.back() + kappa * (theta - v.back()) * kDt);
  }
  const auto fit = heston_qmle(x, v, kDt);
  CHECK(fit.params.kappa == doctest::Approx(kappa).epsilon(1e-8));
  CHECK(fit.params.theta == doctest::Approx(theta).epsilon(1e-8));
  CHECK(fit.params.r == doctest::Approx(r).epsilon(1e-8));
  CHECK(fit.params.xi_vol < 1e-6);
}

TEST_CASE("estimates are within three standard errors on a long path") {
  const HestonParams truth{2.0, 1.0, 0.5, -0.4, 0.05, 1.0};
  RandomSource rng(31);
  const auto path = stochastic::simulate_heston(truth, 1008, kDt, 1.0, rng);
  const auto fit = heston_qmle(path.x, path.v, kDt);
  for (std::size_t p = 0; p < 5; ++p) {
    const double est = parameter_value(fit.params, p), se = parameter_value(fit.standard_error, p);
    CHECK(se > 0.0);
    CHECK(std::abs(est - parameter_value(truth, p)) < 3.0 * se);
  }
}

TEST_CASE("closed form maximizes the quasi likelihood") {
  const HestonParams truth{1.5, 0.9, 0.6, 0.5, 0.03, 0.9};
  RandomSource rng(8);
  const auto path = stochastic::simulate_heston(truth, 500, kDt, 1.0, rng);
  const auto fit = heston_qmle(path.x, path.v, kDt);
  const auto f = [&](const Vec5& p) { return heston_quasi_loglik(path.x, path.v, kDt, from_vec(p)); };
  const Vec5 cf{fit.params.kappa, fit.params.theta, fit.params.xi_vol, fit.params.rho, fit.params.r};
  Vec5 start = cf;
  for (auto& s : start) s *= 1.05;
  Vec5 nm = nelder_mead_max(f, start, 0.05, 4000);
  nm = nelder_mead_max(f, nm, 0.01, 4000);
  CHECK(f(cf) >= f(nm) - 1e-9);
  for (int k = 0; k < 5; ++k) CHECK(std::abs(nm[k] - cf[k]) < 1e-3 * std::max(1.0, std::abs(cf[k])));
}

TEST_CASE("price scale does not change the estimates") {
  const HestonParams truth{2.0, 1.0, 0.4, 0.3, 0.05, 1.0};
  RandomSource rng(2);
  auto path = stochastic::simulate_heston(truth, 200, kDt, 1.0, rng);
  const auto a = heston_qmle(path.x, path.v, kDt);
  for (auto& x : path.x) x *= 37.0;
  const auto b = heston_qmle(path.x, path.v, kDt);
  for (std::size_t p = 0; p < 5; ++p)
    CHECK(parameter_value(b.params, p) == doctest::Approx(parameter_value(a.params, p)).epsilon(1e-9));
}

TEST_CASE("input errors") {
  std::vector<double> x(20, 1.0), v(20, 0.5);
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = 1.0 + 0.01 * static_cast<double>(k % 3);
  CHECK_THROWS_AS(heston_qmle(x, v, kDt), NumericalError);
  std::vector<double> short_x(5, 1.0), short_v(5, 1.0);
  CHECK_THROWS_AS(heston_qmle(short_x, short_v, kDt), DataError);
  x[3] = -1.0;
  v[3] = 0.7;
  CHECK_THROWS_AS(heston_qmle(x, v, kDt), DataError);
  x[3] = 1.0;
  v[4] = -0.1;
  const auto fit = heston_qmle(x, v, kDt, false);
  CHECK(fit.floored == 1);
  CHECK(heston_quasi_loglik(x, v, kDt, HestonParams{1, 1, 0.3, 1.0, 0, 1}) == -HUGE_VAL);
}

TEST_CASE("dataset calibration and shared histograms") {
  stochastic::HestonRanges point;
  point.kappa = {2, 2};
  point.theta = {1, 1};
  point.xi_vol = {0.5, 0.5};
  point.rho = {-0.3, -0.3};
  point.r = {0.05, 0.05};
  const auto short_ds = stochastic::sample_heston_dataset(point, 200, 50, kDt, 1.0, RandomSource(1));
  const auto long_ds = stochastic::sample_heston_dataset(point, 200, 400, kDt, 1.0, RandomSource(2));
  auto a = calibrate_dataset(short_ds.data, kDt, "short");
  auto b = calibrate_dataset(long_ds.data, kDt, "long");
  CHECK(a.estimates.size() + a.skipped == 200);
  CHECK(b.estimates.size() == 200);
  for (const auto& e : a.estimates) {
    CHECK(e.kappa >= 0.0);
    CHECK(e.xi_vol >= 0.0);
    CHECK(std::abs(e.rho) <= 1.0);
  }
  const auto report = build_report({a, b}, 10);
  CHECK(report.bin_edges.size() == 5);
  for (std::size_t p = 0; p < 5; ++p) {
    const auto& edges = report.bin_edges[p];
    CHECK(edges.size() == 11);
    double lo = HUGE_VAL, hi = -HUGE_VAL;
    for (const auto& s : report.sources)
      for (const auto& e : s.estimates) {
        lo = std::min(lo, parameter_value(e, p));
        hi = std::max(hi, parameter_value(e, p));
      }
    CHECK(edges.front() == lo);
    CHECK(edges.back() == doctest::Approx(hi));
    for (const auto& s : report.sources) {
      const auto& h = s.summaries[p].histogram;
      CHECK(std::accumulate(h.begin(), h.end(), std::size_t{0}) == s.estimates.size());
    }
  }
  // Longer paths give tighter estimates.
  for (std::size_t p : {2, 3}) CHECK(report.sources[1].summaries[p].std < report.sources[0].summaries[p].std);
  CHECK(report.sources[1].summaries[2].mean == doctest::Approx(0.5).epsilon(0.05));

  RandomSource one_rng(5);
  const auto one = stochastic::simulate_heston(HestonParams{}, 30, kDt, 1.0, one_rng);
  const auto single = calibrate_dataset(to_dataset(one), kDt, "single");
  const auto degenerate = build_report(std::vector<SourceReport>{single}, 4);
  CHECK(degenerate.bin_edges[0].front() == doctest::Approx(single.estimates[0].kappa - 0.5));
  CHECK(degenerate.sources[0].summaries[0].std == 0.0);
  CHECK_THROWS_AS(build_report(std::vector<SourceReport>{single}, 0), ConfigError);

  const auto empty = build_report({SourceReport{"none", {}, 0, 0, {}}}, 3);
  CHECK(empty.sources[0].summaries[0].histogram.size() == 3);
  CHECK_THROWS_AS(calibrate_dataset(stochastic::TimeSeriesDataset(stochastic::TimeGrid::uniform(10), 1, 3), kDt, "x"),
                  DataError);
}
