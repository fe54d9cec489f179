#include <cmath>

#include "doctest.h"
#include "sbbts/errors.hpp"
#include "sbbts/parallel.hpp"
#include "sbbts/stochastic/dataset.hpp"
#include "sbbts/stochastic/heston.hpp"
#include "sbbts/stochastic/processes.hpp"
#include "sbbts/stochastic/random.hpp"
#include "sbbts/stochastic/time_grid.hpp"

using namespace sbbts;
using namespace sbbts::stochastic;

TEST_CASE("random streams") {
  RandomSource a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
  const RandomSource root(7);
  RandomSource c1 = root.child(1), c1b = root.child(1), c2 = root.child(2);
  CHECK(c1() == c1b());
  CHECK(c1.uniform() != c2.uniform());
  // Children depend on the seed only, not on how far the parent has advanced.
  RandomSource moved(7);
  for (int i = 0; i < 10; ++i) moved();
  RandomSource m1 = moved.child(1), r1 = root.child(1);
  CHECK(m1() == r1());
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(a.below(7) < 7);
  }
}

TEST_CASE("time grid contracts") {
  CHECK_THROWS_AS(TimeGrid({0.0}), ConfigError);
  CHECK_THROWS_AS(TimeGrid({0.0, 0.5, 0.5}), ConfigError);
  const TimeGrid g = TimeGrid::uniform(4);
  CHECK(g.intervals() == 4);
  CHECK(g.step(2) == doctest::Approx(0.25));
  CHECK(g.min_step() == doctest::Approx(0.25));
  CHECK(g.hash() == TimeGrid::uniform(4).hash());
  CHECK(g.hash() != TimeGrid::uniform(5).hash());
}

TEST_CASE("dataset validation") {
  TimeSeriesDataset d(TimeGrid::uniform(2), 2, 1, {0, 1, 2, 3, 4, 5});
  CHECK_NOTHROW(d.validate());
  CHECK(d.at(1, 2, 0) == 5.0);
  d.values.pop_back();
  CHECK_THROWS_AS(d.validate(), DataError);
  CHECK_THROWS_AS(TimeSeriesDataset(TimeGrid::uniform(1), 1, 1, {0, NAN}), DataError);
}

TEST_CASE("brownian bridge") {
  const std::vector<double> l{0.3, -1.0}, r{2.0, 4.0};
  RandomSource rng(1);
  CHECK(sample_brownian_bridge(l, r, 0.0, 1.0, 0.0, rng) == l);
  CHECK(brownian_bridge_variance(0.0, 1.0, 0.5) == 0.25);
  CHECK(brownian_bridge_variance(2.0, 4.0, 3.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(sample_brownian_bridge(l, r, 0.0, 1.0, 1.0, rng), DomainError);
  CHECK_THROWS_AS(sample_brownian_bridge(l, r, 0.0, 1.0, -0.1, rng), DomainError);

  const std::vector<double> z{1.0, -2.0};
  const auto p = brownian_bridge_point(l, r, 0.0, 2.0, 0.5, z);
  const double s = std::sqrt(0.5 * 1.5 / 2.0);
  CHECK(p[0] == doctest::Approx(0.75 * 0.3 + 0.25 * 2.0 + s * 1.0));
  CHECK(p[1] == doctest::Approx(0.75 * -1.0 + 0.25 * 4.0 - s * 2.0));

  const std::vector<double> zero{0.0}, one{1.0};
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += sample_brownian_bridge(zero, one, 0.0, 1.0, 0.25, rng)[0];
  CHECK(std::abs(sum / n - 0.25) < 3.0 * std::sqrt(0.1875 / n));
}

TEST_CASE("euler maruyama step") {
  const std::vector<double> y{1.0, 2.0}, z{0.0, 0.0};
  const DriftFn constant = [](double, std::span<const double> v) { return std::vector<double>(v.size(), 3.0); };
  const auto next = euler_maruyama_bridge_step(y, 0.0, 0.1, constant, z);
  CHECK(next[0] == doctest::Approx(1.3));
  CHECK(next[1] == doctest::Approx(2.3));

  auto terminal_variance = [](const DriftFn& drift) {
    RandomSource rng(17);
    const int paths = 20000, steps = 50;
    const double dt = 1.0 / steps;
    double s2 = 0.0;
    for (int p = 0; p < paths; ++p) {
      std::vector<double> v{0.0};
      for (int k = 0; k < steps; ++k) v = euler_maruyama_bridge_step(v, k * dt, dt, drift, rng);
      s2 += v[0] * v[0];
    }
    return s2 / paths;
  };
  const DriftFn none = [](double, std::span<const double> v) { return std::vector<double>(v.size(), 0.0); };
  // Var of a chi-square mean over 20000 paths: sd ~ sqrt(2/20000) = 1%.
  CHECK(terminal_variance(none) == doctest::Approx(1.0).epsilon(0.04));
  const DriftFn ou = [](double, std::span<const double> v) { return std::vector<double>{-v[0]}; };
  // Exact Euler recursion variance: sum_k (1-dt)^{2k} dt, compared with the continuous value.
  double euler = 0.0;
  for (int k = 0; k < 50; ++k) euler += std::pow(1.0 - 0.02, 2 * k) * 0.02;
  const double continuous = (1.0 - std::exp(-2.0)) / 2.0;
  CHECK(std::abs(euler - continuous) < 0.01);
  CHECK(terminal_variance(ou) == doctest::Approx(continuous).epsilon(0.05));
}

TEST_CASE("heston simulator") {
  SUBCASE("no vol of vol keeps the variance at theta") {
    HestonParams p{2.0, 0.7, 1e-300, 0.0, 0.05, 0.7};
    RandomSource rng(2);
    const auto path = simulate_heston(p, 100, 1.0 / 252, 1.0, rng);
    for (double v : path.v) CHECK(v == doctest::Approx(0.7).epsilon(1e-14));
  }
  SUBCASE("zero variance grows at the rate r") {
    HestonParams p{2.0, 1e-300, 1e-300, 0.0, 0.05, 1e-300};
    RandomSource rng(2);
    const auto path = simulate_heston(p, 252, 1.0 / 252, 1.0, rng);
    CHECK(path.x.back() == doctest::Approx(std::exp(0.05)).epsilon(1e-3));
  }
  SUBCASE("CIR mean at t = 1") {
    HestonParams p{2.0, 1.0, 0.3, -0.5, 0.05, 0.5};
    const RandomSource root(4);
    const int paths = 100000;
    double s = 0.0;
    for (int m = 0; m < paths; ++m) {
      RandomSource rng = root.child(m);
      s += simulate_heston(p, 252, 1.0 / 252, 1.0, rng).v.back();
    }
    CHECK(std::abs(s / paths - (1.0 - 0.5 * std::exp(-2.0))) < 0.01 * (1.0 - 0.5 * std::exp(-2.0)));
  }
  SUBCASE("invalid parameters") {
    RandomSource rng(2);
    CHECK_THROWS_AS(simulate_heston(HestonParams{-1.0, 1.0, 0.3, 0.0, 0.0, 1.0}, 5, 0.01, 1.0, rng), DomainError);
    CHECK_THROWS_AS(simulate_heston(HestonParams{1.0, 1.0, 0.3, 1.0, 0.0, 1.0}, 5, 0.01, 1.0, rng), DomainError);
  }
}

TEST_CASE("heston dataset sampling") {
  const HestonRanges ranges;
  const auto ds = sample_heston_dataset(ranges, 200, 20, 1.0 / 252, 1.0, RandomSource(5));
  CHECK(ds.data.paths == 200);
  CHECK(ds.data.dim == 2);
  CHECK(ds.data.dates() == 20);
  for (const auto& p : ds.truth) {
    CHECK(p.kappa >= 0.5);
    CHECK(p.kappa <= 4.0);
    CHECK(p.theta >= 0.5);
    CHECK(p.theta <= 1.5);
    CHECK(p.xi_vol >= 0.1);
    CHECK(p.xi_vol <= 0.9);
    CHECK(p.rho >= -0.9);
    CHECK(p.rho <= 0.9);
    CHECK(p.r >= 0.01);
    CHECK(p.r <= 0.1);
    CHECK(p.v0 == p.theta);
  }

  HestonRanges point;
  point.kappa = {2, 2};
  point.theta = {1, 1};
  point.xi_vol = {0.3, 0.3};
  point.rho = {0.1, 0.1};
  point.r = {0.05, 0.05};
  const auto same = sample_heston_dataset(point, 5, 10, 0.01, 1.0, RandomSource(5));
  for (const auto& p : same.truth) {
    CHECK(p.kappa == 2.0);
    CHECK(p.rho == 0.1);
  }

  HestonRanges bad;
  bad.kappa = {3.0, 1.0};
  CHECK_THROWS_AS(sample_heston_dataset(bad, 5, 10, 0.01, 1.0, RandomSource(5)), ConfigError);

  set_thread_count(3);
  const auto threaded = sample_heston_dataset(ranges, 200, 20, 1.0 / 252, 1.0, RandomSource(5));
  set_thread_count(1);
  CHECK(threaded.data.values == ds.data.values);
}
