// Copyright 2026 The wm_policy Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "wmp/autodiff/adam.h"
#include "wmp/autodiff/gradcheck.h"
#include "wmp/autodiff/graph.h"
#include "wmp/autodiff/mlp.h"
#include "wmp/autodiff/param_store.h"
#include "wmp/common/error.h"
#include "wmp/common/rng.h"

using namespace wmp;
using namespace wmp::ad;

namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(r, c);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Plain triple-loop dense layer, independent of Eigen and of the graph.
std::vector<std::vector<double>> dense_by_hand(
    const std::vector<std::vector<double>>& x, const Tensor& w, const Tensor& b,
    bool elu) {
  std::vector<std::vector<double>> out(x.size(),
                                       std::vector<double>(w.cols(), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double s = b[j];
      for (std::size_t k = 0; k < w.rows(); ++k) s += x[i][k] * w(k, j);
      out[i][j] = elu ? (s > 0 ? s : std::exp(s) - 1.0) : s;
    }
  }
  return out;
}

GradCheckReport check_unary(const std::function<Var(Graph&, Var)>& op,
                            std::uint64_t seed, double lo = -1.0,
                            double hi = 1.0) {
  Rng rng(seed);
  ParamStore store;
  store.set("x", random_tensor(rng, 3, 4, lo, hi));
  store.set("w", random_tensor(rng, 3, 4));
  return finite_difference_check(
      [&](Graph& g, const ParamStore& s) {
        Var y = op(g, g.param(s, "x"));
        return g.sum(g.mul(y, g.param(s, "w")));
      },
      store);
}

}  // namespace

TEST_CASE("tensor rejects data that does not match its shape") {
  CHECK_THROWS_AS(Tensor(Shape{2, 3}, std::vector<double>(5)), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{1, 2, 3}, std::vector<double>(6)), ShapeError);
  Tensor t(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t(1, 2) == 6);
  CHECK(t.rows() == 2);
  CHECK(Tensor::row(std::vector<double>{1, 2}).rows() == 1);
}

TEST_CASE("mlp with zero parameters outputs zero") {
  ParamStore store;
  Mlp net("n/", {3, 5, 2});
  Rng rng(1);
  net.init(store, rng);
  for (const auto& name : store.names()) store.mutable_at(name).fill(0.0);
  Tensor x = random_tensor(rng, 4, 3);
  Tensor y = net.forward_values(store, x);
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("identity linear layer passes its input through") {
  ParamStore store;
  Mlp net("id/", {3, 3});
  Rng rng(2);
  net.init(store, rng);
  Tensor& w = store.mutable_at(net.weight_name(0));
  w.fill(0.0);
  for (std::size_t i = 0; i < 3; ++i) w(i, i) = 1.0;
  Tensor x = random_tensor(rng, 2, 3);
  Graph g;
  Var y = net.forward(g, store, g.constant(x));
  CHECK(g.value(y) == x);
}

TEST_CASE("mlp forward matches a hand-rolled dense evaluation") {
  Rng rng(3);
  ParamStore store;
  Mlp net("m/", {8, 8, 4});
  net.init(store, rng);
  for (const auto& name : store.names()) {
    for (double& v : store.mutable_at(name).values()) v = rng.uniform(-1, 1);
  }
  Tensor x = random_tensor(rng, 2, 8);
  std::vector<std::vector<double>> h(2, std::vector<double>(8));
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 8; ++j) h[i][j] = x(i, j);
  }
  h = dense_by_hand(h, store.at("m/l0/w"), store.at("m/l0/b"), true);
  h = dense_by_hand(h, store.at("m/l1/w"), store.at("m/l1/b"), false);

  Graph g;
  const Tensor& recorded = g.value(net.forward(g, store, g.constant(x)));
  const Tensor direct = net.forward_values(store, x);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(std::fabs(recorded(i, j) - h[i][j]) < 1e-12);
      CHECK(std::fabs(direct(i, j) - h[i][j]) < 1e-12);
    }
  }
}

TEST_CASE("mlp shape mismatch names the layer") {
  Rng rng(4);
  ParamStore store;
  Mlp net("bad/", {3, 4, 2});
  net.init(store, rng);
  store.set("bad/l1/w", Tensor(5, 2));
  try {
    net.forward_values(store, Tensor(1, 3));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
  CHECK_THROWS_AS(net.forward_values(store, Tensor(1, 2)), ShapeError);
}

TEST_CASE("linear loss gradient equals the fixed input") {
  Rng rng(5);
  ParamStore store;
  store.set("w", random_tensor(rng, 1, 6));
  store.set("unused", random_tensor(rng, 2, 2));
  Tensor x = random_tensor(rng, 1, 6);
  Graph g;
  Var loss = g.sum(g.mul(g.param(store, "w"), g.constant(x)));
  g.backward(loss);
  GradMap grads = g.param_grads(store);
  CHECK(grads.at("w") == Tensor(store.at("w").shape(), x.storage()));
  for (double v : grads.at("unused").values()) CHECK(v == 0.0);
}

TEST_CASE("backward rejects a non-scalar root") {
  Graph g;
  Var v = g.variable(Tensor(2, 2, 1.0));
  CHECK_THROWS_AS(g.backward(v), ShapeError);
}

TEST_CASE("frozen parameters report exactly zero gradient") {
  Rng rng(6);
  ParamStore store;
  store.set("a", random_tensor(rng, 2, 2));
  store.set("b", random_tensor(rng, 2, 2));
  Graph g;
  Var loss = g.sum(
      g.square(g.matmul(g.param(store, "a"), g.param(store, "b", false))));
  g.backward(loss);
  GradMap grads = g.param_grads(store);
  for (double v : grads.at("b").values()) CHECK(v == 0.0);
  double s = 0.0;
  for (double v : grads.at("a").values()) s += std::fabs(v);
  CHECK(s > 0.0);
}

TEST_CASE("non-finite values are rejected at the producing op") {
  Graph g;
  Var big = g.constant(Tensor(1, 1, 1000.0));
  try {
    g.exp(big);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("exp") != std::string::npos);
  }
}

TEST_CASE("tanh-squared norm matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    ParamStore store;
    store.set("W", random_tensor(rng, 5, 4));
    Tensor x = random_tensor(rng, 3, 5);
    GradCheckReport r = finite_difference_check(
        [&](Graph& g, const ParamStore& s) {
          return g.sum(
              g.square(g.tanh(g.matmul(g.constant(x), g.param(s, "W")))));
        },
        store);
    CHECK_MESSAGE(r.passed(), r.summary());
    CHECK(r.checked == 20);
  }
}

TEST_CASE("every op kind matches finite differences") {
  for (std::uint64_t seed = 10; seed < 13; ++seed) {
    CHECK(check_unary([](Graph& g, Var x) { return g.elu(x); }, seed).passed());
    CHECK(
        check_unary([](Graph& g, Var x) { return g.tanh(x); }, seed).passed());
    CHECK(check_unary([](Graph& g, Var x) { return g.exp(x); }, seed).passed());
    CHECK(check_unary([](Graph& g, Var x) { return g.square(x); }, seed)
              .passed());
    CHECK(check_unary([](Graph& g, Var x) { return g.abs(x); }, seed).passed());
    CHECK(check_unary([](Graph& g, Var x) { return g.sin(x); }, seed).passed());
    CHECK(check_unary([](Graph& g, Var x) { return g.cos(x); }, seed).passed());
    CHECK(
        check_unary([](Graph& g, Var x) { return g.clamp(x, -0.5, 0.6); }, seed)
            .passed());
    CHECK(check_unary([](Graph& g, Var x) { return g.wrap_angle(3.0 * x); },
                      seed, -0.9, 0.9)
              .passed());
    CHECK(check_unary([](Graph&, Var x) { return 2.5 * x + 1.0; }, seed)
              .passed());
    CHECK(check_unary([](Graph&, Var x) { return 1.0 - x; }, seed).passed());
    CHECK(check_unary(
              [](Graph& g, Var x) {
                return g.concat_cols(
                    {g.slice_cols(x, 2, 2), g.slice_cols(x, 0, 2)});
              },
              seed)
              .passed());
    CHECK(check_unary(
              [](Graph& g, Var x) {
                Var n = g.row_norm(x);
                Var s = g.row_sum(x);
                return g.concat_cols({n, s, n, s});
              },
              seed)
              .passed());
  }
}

TEST_CASE("binary and broadcast ops match finite differences") {
  for (std::uint64_t seed = 20; seed < 25; ++seed) {
    Rng rng(seed);
    ParamStore store;
    store.set("a", random_tensor(rng, 3, 4));
    store.set("b", random_tensor(rng, 3, 4));
    store.set("r", random_tensor(rng, 1, 4));
    store.set("c", random_tensor(rng, 3, 1));
    store.set("m", random_tensor(rng, 4, 2));
    GradCheckReport rep = finite_difference_check(
        [](Graph& g, const ParamStore& s) {
          Var a = g.param(s, "a");
          Var b = g.param(s, "b");
          Var r = g.param(s, "r");
          Var c = g.param(s, "c");
          Var m = g.param(s, "m");
          Var x = (a * b) - (b + a);
          x = g.mul_col(g.mul_row(g.add_row(x, r), r), c);
          Var y = g.matmul(g.tanh(x), m);
          return g.mean(g.square(y)) + g.sum(g.abs(g.sub(a, b)));
        },
        store);
    CHECK_MESSAGE(rep.passed(), rep.summary());
  }
}

TEST_CASE("eight-step unroll matches finite differences") {
  for (std::uint64_t seed = 30; seed < 33; ++seed) {
    Rng rng(seed);
    ParamStore store;
    Mlp f("f/", {4, 6, 4});
    f.init(store, rng);
    Tensor x0 = random_tensor(rng, 2, 4);
    GradCheckReport rep = finite_difference_check(
        [&](Graph& g, const ParamStore& s) {
          Var x = g.constant(x0);
          Var loss = g.constant(Tensor::scalar(0.0));
          for (int t = 0; t < 8; ++t) {
            x = x + 0.5 * f.forward(g, s, x);
            loss = loss + g.mean(g.row_norm(x));
          }
          return loss;
        },
        store);
    CHECK_MESSAGE(rep.passed(), rep.summary());
  }
}

TEST_CASE("linear loss gradient check is essentially exact") {
  Rng rng(40);
  ParamStore store;
  store.set("w", random_tensor(rng, 4, 4));
  Tensor x = random_tensor(rng, 4, 4);
  GradCheckReport rep = finite_difference_check(
      [&](Graph& g, const ParamStore& s) {
        return g.sum(g.mul(g.param(s, "w"), g.constant(x)));
      },
      store);
  CHECK(rep.max_rel_error < 1e-8);
}

TEST_CASE("saturated exponential is flagged rather than failed") {
  ParamStore store;
  store.set("e", Tensor::scalar(20.0));
  GradCheckReport rep = finite_difference_check(
      [](Graph& g, const ParamStore& s) {
        Var e = g.abs(g.param(s, "e"));
        return 2.0 * (1.0 - g.exp(-2.0 * e));
      },
      store);
  CHECK(rep.passed());
  CHECK(rep.checked == 0);
  CHECK(rep.flagged.size() == 1);
}

TEST_CASE("gradient check restores the store exactly") {
  Rng rng(41);
  ParamStore store;
  store.set("w", random_tensor(rng, 3, 3));
  ParamStore before = store;
  finite_difference_check(
      [](Graph& g, const ParamStore& s) {
        return g.sum(g.exp(g.param(s, "w")));
      },
      store);
  CHECK(store == before);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  ParamStore store;
  store.set("p", Tensor(Shape{1, 2}, {0.5, -0.5}));
  GradMap g{{"p", Tensor(1, 2)}};
  adam_step(store, g, {.lr = 0.1});
  CHECK(store.at("p")[0] == 0.5);
  CHECK(store.at("p")[1] == -0.5);
  CHECK(store.moments("p").step == 1);
}

TEST_CASE("adam moments decay under zero gradient") {
  ParamStore store;
  store.set("p", Tensor::scalar(0.5));
  store.moments("p").m.fill(0.2);
  store.moments("p").v.fill(0.1);
  adam_step(store, {{"p", Tensor::scalar(0.0)}}, {.lr = 0.1});
  CHECK(store.moments("p").m[0] == doctest::Approx(0.18).epsilon(1e-15));
  CHECK(store.moments("p").v[0] == doctest::Approx(0.0999).epsilon(1e-15));
}

TEST_CASE("adam first step with unit gradient moves by the learning rate") {
  ParamStore store;
  store.set("p", Tensor::scalar(1.0));
  adam_step(store, {{"p", Tensor::scalar(1.0)}}, {.lr = 0.1});
  // m = 0.1, v = 0.001; m_hat = 1, v_hat = 1.
  const double expected = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8);
  CHECK(std::fabs(store.at("p")[0] - expected) < 1e-15);
  adam_step(store, {{"p", Tensor::scalar(1.0)}}, {.lr = 0.1});
  CHECK(std::fabs(store.at("p")[0] - (expected - 0.1 / (1.0 + 1e-8))) < 1e-12);
}

TEST_CASE("adam aborts on non-finite gradient and names the parameter") {
  ParamStore store;
  store.set("a", Tensor::scalar(1.0));
  store.set("bad", Tensor::scalar(2.0));
  GradMap g{{"a", Tensor::scalar(1.0)}, {"bad", Tensor::scalar(NAN)}};
  try {
    adam_step(store, g, {});
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("bad") != std::string::npos);
  }
  CHECK(store.at("a")[0] == 1.0);
  CHECK(store.moments("a").step == 0);
}

TEST_CASE("training runs are bit-identical under the same seed") {
  auto run = [] {
    Rng rng(77);
    ParamStore store;
    Mlp net("n/", {3, 8, 2});
    net.init(store, rng);
    Tensor x = random_tensor(rng, 16, 3);
    Tensor y = random_tensor(rng, 16, 2);
    for (int i = 0; i < 20; ++i) {
      Graph g;
      Var loss = g.mean(
          g.square(net.forward(g, store, g.constant(x)) - g.constant(y)));
      g.backward(loss);
      adam_step(store, g.param_grads(store), {.lr = 0.01});
    }
    return store;
  };
  CHECK(run() == run());
}
