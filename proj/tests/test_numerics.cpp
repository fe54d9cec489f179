#include <cmath>
#include <functional>

#include "doctest.h"
#include "sbbts/errors.hpp"
#include "sbbts/numerics/adam.hpp"
#include "sbbts/numerics/ops.hpp"
#include "sbbts/stochastic/random.hpp"

using namespace sbbts;
using namespace sbbts::numerics;

namespace {

Tensor random_tensor(Shape shape, stochastic::RandomSource& rng, bool grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal();
  return Tensor(std::move(shape), std::move(v), grad);
}

// Central differences of f with respect to every entry of p.
std::vector<double> numeric_grad(Tensor& p, const std::function<double()>& f, double h = 1e-5) {
  std::vector<double> g(p.numel());
  for (std::size_t i = 0; i < p.numel(); ++i) {
    const double orig = p[i];
    p.mutable_data()[i] = orig + h;
    const double up = f();
    p.mutable_data()[i] = orig - h;
    const double down = f();
    p.mutable_data()[i] = orig;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

void check_grad(Tensor& p, const std::function<Tensor()>& loss) {
  p.zero_grad();
  loss().backward();
  const std::vector<double> analytic(p.grad().begin(), p.grad().end());
  const auto numeric = numeric_grad(p, [&] {
    NoGradGuard g;
    return loss().item();
  });
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    CHECK(analytic[i] == doctest::Approx(numeric[i]).epsilon(1e-5).scale(1.0));
  }
}

}  // namespace

TEST_CASE("matmul examples") {
  const Tensor eye({2, 2}, {1, 0, 0, 1});
  const Tensor b({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor c = matmul(eye, b);
  for (std::size_t i = 0; i < 6; ++i) CHECK(c[i] == b[i]);

  const Tensor r = matmul(Tensor({2, 2}, {1, 2, 3, 4}), Tensor({2, 1}, {1, 1}));
  CHECK(r.shape() == Shape{2, 1});
  CHECK(r[0] == 3.0);
  CHECK(r[1] == 7.0);

  const Tensor z = matmul(Tensor::zeros({3, 2}), b);
  for (double v : z.data()) CHECK(v == 0.0);

  CHECK_THROWS_AS(matmul(b, b), DimensionError);
}

TEST_CASE("silu values") {
  const Tensor y = silu(Tensor({3}, {0.0, 1.0, -50.0}));
  CHECK(y[0] == 0.0);
  CHECK(y[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-15));
  CHECK(std::abs(y[2]) < 1e-20);
}

TEST_CASE("layer norm closed forms") {
  const Tensor one = Tensor::full({4}, 1.0), zero = Tensor::zeros({4});
  const Tensor c = layer_norm(Tensor({1, 4}, {3, 3, 3, 3}), one, zero);
  for (double v : c.data()) CHECK(v == 0.0);

  const Tensor pair = layer_norm(Tensor({1, 2}, {1, -1}), Tensor::full({2}, 1.0), Tensor::zeros({2}));
  const double expect = 1.0 / std::sqrt(1.0 + kLayerNormEps);
  CHECK(pair[0] == doctest::Approx(expect).epsilon(1e-14));
  CHECK(pair[1] == doctest::Approx(-expect).epsilon(1e-14));

  const Tensor g0 = layer_norm(Tensor({2, 4}, {1, 5, -2, 0.5, 7, 8, 9, 10}), Tensor::zeros({4}),
                               Tensor({4}, {0.1, 0.2, 0.3, 0.4}));
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t j = 0; j < 4; ++j) CHECK(g0[r * 4 + j] == doctest::Approx(0.1 * (j + 1)));

  CHECK_THROWS_AS(layer_norm(Tensor({2, 1}, {1, 2}), Tensor::full({1}, 1.0), Tensor::zeros({1})), DimensionError);
}

TEST_CASE("attention examples") {
  stochastic::RandomSource rng(3);
  const std::size_t dm = 4;
  AttentionWeights w{random_tensor({dm, dm}, rng), random_tensor({dm}, rng), random_tensor({dm, dm}, rng),
                     random_tensor({dm}, rng),     random_tensor({dm, dm}, rng), random_tensor({dm}, rng),
                     random_tensor({dm, dm}, rng), random_tensor({dm}, rng)};

  SUBCASE("single token returns its projected value") {
    const Tensor x = random_tensor({1, dm}, rng, false);
    const Tensor out = causal_self_attention(x, w, 2, 1);
    const Tensor expect = linear(linear(x, w.wv, w.bv), w.wo, w.bo);
    for (std::size_t j = 0; j < dm; ++j) CHECK(out[j] == doctest::Approx(expect[j]).epsilon(1e-13));
  }

  SUBCASE("equal scores average the visible values") {
    const std::size_t L = 4;
    const Tensor q = Tensor::zeros({L, dm});
    const Tensor k = random_tensor({L, dm}, rng, false);
    const Tensor v = random_tensor({L, dm}, rng, false);
    const Tensor out = causal_attention_core(q, k, v, 2, L);
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j < dm; ++j) {
        double mean = 0.0;
        for (std::size_t s = 0; s <= i; ++s) mean += v[s * dm + j] / static_cast<double>(i + 1);
        CHECK(out[i * dm + j] == doctest::Approx(mean).epsilon(1e-13));
      }
  }

  SUBCASE("future tokens do not leak") {
    const std::size_t L = 5;
    Tensor x = random_tensor({L, dm}, rng, false);
    const Tensor base = causal_self_attention(x, w, 2, L);
    for (std::size_t jtok = 1; jtok < L; ++jtok) {
      Tensor y({L, dm}, std::vector<double>(x.data().begin(), x.data().end()));
      for (std::size_t c = 0; c < dm; ++c) y.mutable_data()[jtok * dm + c] += 3.0;
      const Tensor out = causal_self_attention(y, w, 2, L);
      for (std::size_t i = 0; i < jtok; ++i)
        for (std::size_t c = 0; c < dm; ++c) CHECK(out[i * dm + c] == base[i * dm + c]);
      bool changed = false;
      for (std::size_t c = 0; c < dm; ++c) changed |= out[jtok * dm + c] != base[jtok * dm + c];
      CHECK(changed);
    }
  }

  CHECK_THROWS_AS(causal_self_attention(Tensor::zeros({2, dm}), w, 3, 2), ConfigError);
}

TEST_CASE("backward simple losses") {
  stochastic::RandomSource rng(5);
  Tensor w = random_tensor({3, 2}, rng);
  sum(w).backward();
  for (double g : w.grad()) CHECK(g == 1.0);

  w.zero_grad();
  scale(sum(mul(w, w)), 0.5).backward();
  for (std::size_t i = 0; i < w.numel(); ++i) CHECK(w.grad()[i] == doctest::Approx(w[i]).epsilon(1e-15));

  CHECK_THROWS_AS(w.backward(), ContractError);
}

TEST_CASE("two-layer network gradients match finite differences") {
  stochastic::RandomSource rng(11);
  Tensor x = random_tensor({5, 3}, rng);
  Tensor w1 = random_tensor({3, 4}, rng), b1 = random_tensor({4}, rng);
  Tensor g = random_tensor({4}, rng), beta = random_tensor({4}, rng);
  Tensor w2 = random_tensor({4, 2}, rng), b2 = random_tensor({2}, rng);
  const Tensor target = random_tensor({5, 2}, rng, false);
  auto loss = [&] {
    const Tensor h = silu(layer_norm(linear(x, w1, b1), g, beta));
    return mean_squared_error(linear(h, w2, b2), target);
  };
  for (Tensor* p : {&x, &w1, &b1, &g, &beta, &w2, &b2}) check_grad(*p, loss);
}

TEST_CASE("attention gradients match finite differences") {
  stochastic::RandomSource rng(12);
  const std::size_t dm = 4, L = 3, S = 2;
  AttentionWeights w{random_tensor({dm, dm}, rng), random_tensor({dm}, rng), random_tensor({dm, dm}, rng),
                     random_tensor({dm}, rng),     random_tensor({dm, dm}, rng), random_tensor({dm}, rng),
                     random_tensor({dm, dm}, rng), random_tensor({dm}, rng)};
  Tensor x = random_tensor({S * L, dm}, rng);
  const std::vector<std::size_t> pick{1, 2, 5};
  auto loss = [&] {
    const Tensor a = causal_self_attention(x, w, 2, L);
    const Tensor c = concat_cols({gather_rows(a, pick), gather_rows(x, pick)});
    return sum(mul(c, c));
  };
  for (Tensor* p : {&x, &w.wq, &w.bq, &w.wk, &w.bk, &w.wv, &w.bv, &w.wo, &w.bo}) check_grad(*p, loss);
}

TEST_CASE("graph recording is off under NoGradGuard") {
  Tensor w({2}, {1.0, 2.0}, true);
  NoGradGuard guard;
  const Tensor y = sum(mul(w, w));
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("adam update") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor p({3}, {1.0, -2.0, 0.5}, true);
    sum(scale(p, 0.0)).backward();
    AdamState s;
    std::vector<Tensor> ps{p};
    adam_step(std::span<Tensor>(ps), s);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == -2.0);
    CHECK(p[2] == 0.5);
  }
  SUBCASE("one step from the textbook formula") {
    std::vector<double> p{0.0}, g{1.0};
    std::vector<std::span<double>> ps{p};
    std::vector<std::span<const double>> gs{g};
    AdamState s;
    adam_step(ps, gs, s);
    const double m = 0.1 * 1.0, v = 0.001 * 1.0;
    const double mhat = m / (1 - 0.9), vhat = v / (1 - 0.999);
    CHECK(p[0] == doctest::Approx(-1e-3 * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-14));
    CHECK(p[0] == doctest::Approx(-1e-3).epsilon(1e-6));
  }
  SUBCASE("identical runs are bit identical") {
    auto run = [] {
      stochastic::RandomSource rng(9);
      Tensor w = random_tensor({4, 3}, rng);
      AdamState s(1e-2);
      std::vector<Tensor> ps{w};
      for (int i = 0; i < 20; ++i) {
        w.zero_grad();
        sum(mul(silu(w), w)).backward();
        adam_step(std::span<Tensor>(ps), s);
      }
      return std::vector<double>(w.data().begin(), w.data().end());
    };
    CHECK(run() == run());
  }
  SUBCASE("shape mismatch and bad hyperparameters") {
    std::vector<double> p{0.0, 1.0}, g{1.0};
    std::vector<std::span<double>> ps{p};
    std::vector<std::span<const double>> gs{g};
    AdamState s;
    CHECK_THROWS_AS(adam_step(ps, gs, s), DimensionError);
    CHECK_THROWS_AS(AdamState(-1.0).validate(), ConfigError);
    CHECK_THROWS_AS(AdamState(1e-3, 1.0).validate(), ConfigError);
  }
}
