#include <doctest.h>

#include <cmath>
#include <random>

#include "dearfed/autodiff.hpp"
#include "dearfed/forecast.hpp"
#include "dearfed/kernels.hpp"
#include "dearfed/nn.hpp"
#include "dearfed/optim.hpp"

using namespace dearfed;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t = Tensor::zeros(r, c);
  for (double& v : t.values()) v = u(rng);
  return t;
}

}  // namespace

TEST_CASE("sigmoid and tanh at zero") {
  Graph g;
  Var z = g.constant(Tensor::scalar(0.0));
  CHECK(g.scalar(g.sigmoid(z)) == 0.5);
  CHECK(g.scalar(g.tanh(z)) == 0.0);
}

TEST_CASE("matmul matches triple loop") {
  Rng rng(1);
  const Tensor a = random_tensor(2, 3, rng), b = random_tensor(3, 4, rng);
  Graph g;
  const Tensor& c = g.value(g.matmul(g.constant(a), g.constant(b)));
  REQUIRE(c.rows() == 2);
  REQUIRE(c.cols() == 4);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
      CHECK(c(i, j) == doctest::Approx(s).epsilon(1e-15));
    }
  }
}

TEST_CASE("shape errors are descriptive") {
  Graph g;
  Var a = g.constant(Tensor::zeros(2, 3));
  Var b = g.constant(Tensor::zeros(2, 3));
  CHECK_THROWS_AS(g.matmul(a, b), ShapeError);
  CHECK_THROWS_WITH(g.matmul(a, b), doctest::Contains("2x3"));
  CHECK_THROWS_AS(g.add(a, g.constant(Tensor::zeros(3, 2))), ShapeError);
}

TEST_CASE("backward basics") {
  Parameter x("x", Tensor::scalar(3.0));
  Graph g;
  Var loss = g.square(g.param(x));
  g.backward(loss);
  CHECK(x.grad[0] == 6.0);

  SUBCASE("non-scalar output rejected") {
    Graph g2;
    Parameter v("v", Tensor::zeros(1, 3));
    CHECK_THROWS_AS(g2.backward(g2.param(v)), ShapeError);
  }
  SUBCASE("mse of identical vectors has zero gradient") {
    Parameter p("p", Tensor::row({1.0, -2.0, 3.5}));
    Graph g3;
    Var l = g3.mse(g3.param(p), g3.constant(Tensor::row({1.0, -2.0, 3.5})));
    g3.backward(l);
    for (double v : p.grad.values()) CHECK(v == 0.0);
  }
  SUBCASE("repeated use sums contributions") {
    Parameter p("p", Tensor::scalar(2.0));
    Graph g4;
    Var a = g4.param(p);
    g4.backward(g4.sum(g4.mul(a, a)));  // d(p*p)/dp = 2p
    CHECK(p.grad[0] == 4.0);
  }
}

TEST_CASE("kernels agree bit-exactly with serial references") {
  Rng rng(5);
  for (int threads : {1, 2, 4}) {
    kernels::set_max_threads(threads);
    for (auto [m, k, n] : {std::tuple{3, 5, 7}, {64, 96, 128}, {300, 40, 300}}) {
      const Tensor a = random_tensor(m, k, rng), b = random_tensor(k, n, rng);
      const Tensor at = random_tensor(k, m, rng), bt = random_tensor(n, k, rng);
      Tensor c1 = random_tensor(m, n, rng), c2 = c1;
      kernels::gemm_reference(a.data(), b.data(), c1.data(), m, k, n, true);
      kernels::gemm(a.data(), b.data(), c2.data(), m, k, n, true);
      CHECK(c1.storage() == c2.storage());
      kernels::gemm_tn_reference(at.data(), b.data(), c1.data(), m, k, n);
      kernels::gemm_tn(at.data(), b.data(), c2.data(), m, k, n);
      CHECK(c1.storage() == c2.storage());
      kernels::gemm_nt_reference(a.data(), bt.data(), c1.data(), m, k, n);
      kernels::gemm_nt(a.data(), bt.data(), c2.data(), m, k, n);
      CHECK(c1.storage() == c2.storage());
    }
    std::vector<std::vector<double>> rows;
    std::vector<const double*> ptrs;
    for (int i = 0; i < 5; ++i) {
      rows.push_back(random_tensor(1, 70000, rng).storage());
    }
    for (auto& r : rows) ptrs.push_back(r.data());
    const std::vector<double> w = {0.1, 0.2, 0.3, 0.15, 0.25};
    std::vector<double> o1(70000), o2(70000);
    kernels::weighted_sum_reference(w, ptrs, o1);
    kernels::weighted_sum(w, ptrs, o2);
    CHECK(o1 == o2);
  }
  kernels::set_max_threads(0);
}

TEST_CASE("every primitive passes a finite-difference check") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    std::uniform_int_distribution<std::size_t> dim(1, 4);
    const std::size_t r = dim(rng), c = dim(rng), k = dim(rng);
    Parameter a("a", random_tensor(r, c, rng));
    Parameter b("b", random_tensor(r, c, rng));
    Parameter m("m", random_tensor(c, k, rng));
    Parameter row("row", random_tensor(1, c, rng));
    Parameter pos("pos", random_tensor(r, c, rng, 0.5, 2.0));
    const Tensor w = random_tensor(r, c, rng);
    const ParamList params = {&a, &b, &m, &row, &pos};
    auto weighted = [&](Graph& g, Var v) { return g.sum(g.mul(v, g.constant(w))); };
    const std::vector<std::pair<const char*, LossBuilder>> cases = {
        {"matmul", [&](Graph& g) { return g.sum(g.matmul(g.param(a), g.param(m))); }},
        {"add", [&](Graph& g) { return weighted(g, g.add(g.param(a), g.param(b))); }},
        {"add_row", [&](Graph& g) { return weighted(g, g.add_row(g.param(a), g.param(row))); }},
        {"sub", [&](Graph& g) { return weighted(g, g.sub(g.param(a), g.param(b))); }},
        {"mul", [&](Graph& g) { return weighted(g, g.mul(g.param(a), g.param(b))); }},
        {"scale", [&](Graph& g) { return weighted(g, g.scale(g.param(a), -1.7)); }},
        {"add_scalar", [&](Graph& g) { return weighted(g, g.add_scalar(g.param(a), 0.3)); }},
        {"sigmoid", [&](Graph& g) { return weighted(g, g.sigmoid(g.param(a))); }},
        {"tanh", [&](Graph& g) { return weighted(g, g.tanh(g.param(a))); }},
        {"exp", [&](Graph& g) { return weighted(g, g.exp(g.param(a))); }},
        {"log", [&](Graph& g) { return weighted(g, g.log(g.param(pos))); }},
        {"softplus", [&](Graph& g) { return weighted(g, g.softplus(g.param(a))); }},
        {"square", [&](Graph& g) { return weighted(g, g.square(g.param(a))); }},
        {"mean", [&](Graph& g) { return g.mean(g.mul(g.param(a), g.param(b))); }},
        {"row_sum", [&](Graph& g) { return g.sum(g.square(g.row_sum(g.param(a)))); }},
        {"concat", [&](Graph& g) {
           const Var parts[] = {g.param(a), g.param(b)};
           return g.sum(g.square(g.concat_cols(parts)));
         }},
        {"slice", [&](Graph& g) { return g.sum(g.square(g.slice_cols(g.param(m), 0, (k + 1) / 2))); }},
        {"mse", [&](Graph& g) { return g.mse(g.param(a), g.param(b)); }},
    };
    for (const auto& [name, build] : cases) {
      CAPTURE(name);
      CHECK(grad_check(build, params) < 1e-4);
    }
  }
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(3);
  Parameter p("p", random_tensor(3, 3, rng));
  auto grad_of = [&](auto build) {
    zero_grads({&p});
    Graph g;
    g.backward(build(g));
    return p.grad.storage();
  };
  auto f = [&](Graph& g) { return g.sum(g.tanh(g.param(p))); };
  auto h = [&](Graph& g) { return g.mean(g.square(g.param(p))); };
  const auto gf = grad_of(f), gh = grad_of(h);
  const auto gfh = grad_of([&](Graph& g) { return g.add(f(g), h(g)); });
  for (std::size_t i = 0; i < gf.size(); ++i) CHECK(gfh[i] == doctest::Approx(gf[i] + gh[i]).epsilon(1e-14));
}

TEST_CASE("grad_check on a linear function is exact") {
  Rng rng(4);
  Parameter w("w", random_tensor(4, 1, rng));
  const Tensor x = random_tensor(3, 4, rng);
  auto build = [&](Graph& g) { return g.sum(g.matmul(g.constant(x), g.param(w))); };
  CHECK(grad_check(build, {&w}) < 1e-9);
}

TEST_CASE("random two-layer network gradients") {
  Rng rng(8);
  Mlp net("net", {4, 6, 3}, rng, Activation::Tanh);
  ParamList params;
  net.collect(params);
  const Tensor x = random_tensor(5, 4, rng), y = random_tensor(5, 3, rng);
  auto build = [&](Graph& g) { return g.mse(net.forward(g, g.constant(x)), g.constant(y)); };
  CHECK(grad_check(build, params) < 1e-4);
}

TEST_CASE("LSTM cell gradient, 8 hidden units, one step") {
  Rng rng(21);
  const std::size_t H = 8;
  Parameter w_ih("w_ih", random_tensor(5, 4 * H, rng, -0.5, 0.5));
  Parameter w_hh("w_hh", random_tensor(H, 4 * H, rng, -0.5, 0.5));
  Parameter b("b", random_tensor(1, 4 * H, rng, -0.5, 0.5));
  const Tensor x = random_tensor(3, 5, rng), h0 = random_tensor(3, H, rng, -1, 1), c0 = random_tensor(3, H, rng, -1, 1);
  auto build = [&](Graph& g) {
    auto out = lstm_cell(g, g.constant(x), g.constant(h0), g.constant(c0), g.param(w_ih), g.param(w_hh), g.param(b), H);
    return g.add(g.sum(g.square(out.h)), g.mean(out.c));
  };
  CHECK(grad_check(build, {&w_ih, &w_hh, &b}) < 1e-4);
}

TEST_CASE("determinism of forward and backward") {
  auto run = [] {
    Rng rng(99);
    Mlp net("n", {3, 8, 2}, rng);
    ParamList params;
    net.collect(params);
    Rng data_rng(5);
    const Tensor x = random_tensor(4, 3, data_rng);
    Graph g;
    g.backward(g.sum(g.square(net.forward(g, g.constant(x)))));
    return flatten_grads(params);
  };
  CHECK(run() == run());
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves params and moments") {
    AdamState s(3, 0.1);
    std::vector<double> p = {1.0, 2.0, 3.0};
    const std::vector<double> g(3, 0.0);
    adam_step(s, p, g);
    CHECK(p == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(s.m == std::vector<double>(3, 0.0));
    CHECK(s.v == std::vector<double>(3, 0.0));
    CHECK(s.step == 1);
  }
  SUBCASE("first step moves by -lr * sign(g)") {
    AdamState s(3, 0.01);
    std::vector<double> p = {0.0, 0.0, 0.0};
    adam_step(s, p, std::vector<double>{3.0, -0.2, 1e-3});
    CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(p[2] == doctest::Approx(-0.01).epsilon(1e-4));
  }
  SUBCASE("length mismatch and non-finite gradients") {
    AdamState s(2, 0.1);
    std::vector<double> p = {1.0, 2.0};
    CHECK_THROWS(adam_step(s, p, std::vector<double>{1.0}));
    try {
      adam_step(s, p, std::vector<double>{1.0, std::nan("")});
      FAIL("expected NonFiniteGradient");
    } catch (const NonFiniteGradient& e) {
      CHECK(e.index() == 1);
    }
    CHECK(p == std::vector<double>{1.0, 2.0});
    CHECK(s.step == 0);
  }
  SUBCASE("(x - 5)^2 from 0 converges within 500 steps") {
    AdamState s(1, 0.1);
    std::vector<double> x = {0.0};
    int steps = 0;
    for (; steps < 500 && std::abs(x[0] - 5.0) >= 0.01; ++steps) {
      adam_step(s, x, std::vector<double>{2.0 * (x[0] - 5.0)});
    }
    CHECK(std::abs(x[0] - 5.0) < 0.01);
    CHECK(steps <= 500);
  }
}

TEST_CASE("clip_grad_norm") {
  Parameter p("p", Tensor::row({0.0, 0.0}));
  p.grad = Tensor::row({3.0, 4.0});
  CHECK(clip_grad_norm({&p}, 1.0) == doctest::Approx(5.0));
  CHECK(p.grad[0] == doctest::Approx(0.6));
  CHECK(p.grad[1] == doctest::Approx(0.8));
}
