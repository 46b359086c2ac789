#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "ci/adam.hpp"
#include "ci/common.hpp"
#include "ci/oracle.hpp"
#include "ci/tape.hpp"
#include "ci/tensor.hpp"
#include "doctest.h"

using namespace ci;
using num::Tensor;
using num::Tape;
using num::VarId;

namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo = -2.0,
                     double hi = 2.0) {
  Tensor t = Tensor::zeros(r, c);
  for (double& v : t.vec()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("rng is deterministic and seed-sensitive") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  bool differs = false;
  Rng a2(42);
  for (int i = 0; i < 100; ++i) differs = differs || (a2.next_u64() != c.next_u64());
  CHECK(differs);
}

TEST_CASE("rng uniform stays in range and has sane moments") {
  Rng r(7);
  double mn = 1.0, mx = 0.0, s = 0.0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const double u = r.uniform();
    mn = std::min(mn, u);
    mx = std::max(mx, u);
    s += u;
  }
  CHECK(mn >= 0.0);
  CHECK(mx < 1.0);
  CHECK(s / N == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("rng gaussian moments") {
  Rng r(11);
  const int N = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < N; ++i) {
    const double g = r.gaussian();
    s += g;
    s2 += g * g;
  }
  CHECK(s / N == doctest::Approx(0.0).epsilon(0.02));
  CHECK(s2 / N == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("substreams with different purposes are decoupled") {
  Rng a = substream(5, "alpha", 0);
  Rng b = substream(5, "beta", 0);
  CHECK(a.next_u64() != b.next_u64());
  // Same triple gives the same stream.
  Rng a2 = substream(5, "alpha", 0);
  Rng a3 = substream(5, "alpha", 0);
  for (int i = 0; i < 10; ++i) CHECK(a2.next_u64() == a3.next_u64());
}

TEST_CASE("uniform_int bounds") {
  Rng r(3);
  for (int i = 0; i < 1000; ++i) CHECK(r.uniform_int(7) < 7);
  CHECK_THROWS_AS(r.uniform_int(0), ContractError);
}

TEST_CASE("fnv1a matches reference values") {
  // Classic published test vectors for FNV-1a 64.
  CHECK(fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("tensor shape and access basics") {
  Tensor t = Tensor::zeros(2, 3);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.size() == 6);
  t.at(1, 2) = 5.0;
  CHECK(t.vec()[5] == 5.0);
  CHECK_THROWS_AS(Tensor::from({1.0, 2.0}, {3}), DimError);
  CHECK_THROWS_AS(Tensor::zeros(0, 3), DimError);
  CHECK_THROWS_AS(Tensor::scalar(1.0).item() + Tensor::zeros(2).item(), ContractError);
}

TEST_CASE("matmul agrees with serial reference on random matrices") {
  Rng rng(100);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 1 + rng.uniform_int(20);
    const std::size_t k = 1 + rng.uniform_int(20);
    const std::size_t m = 1 + rng.uniform_int(20);
    Tensor a = random_tensor(rng, n, k);
    Tensor b = random_tensor(rng, k, m);
    Tensor fast = num::matmul(a, b);
    Tensor slow = oracle::ref::matmul(a, b);
    for (std::size_t i = 0; i < fast.size(); ++i)
      CHECK(fast.data()[i] == doctest::Approx(slow.data()[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(num::matmul(Tensor::zeros(2, 3), Tensor::zeros(2, 3)), DimError);
}

TEST_CASE("elementwise kernels agree with reference") {
  Rng rng(101);
  Tensor a = random_tensor(rng, 17, 13);
  Tensor b = random_tensor(rng, 17, 13);
  Tensor s1 = num::add(a, b), s2 = oracle::ref::add(a, b);
  Tensor p1 = num::mul(a, b), p2 = oracle::ref::mul(a, b);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    CHECK(s1.data()[i] == s2.data()[i]);
    CHECK(p1.data()[i] == p2.data()[i]);
  }
  CHECK(num::sum(a) == doctest::Approx(oracle::ref::sum(a)).epsilon(1e-12));
  CHECK_THROWS_AS(num::add(a, Tensor::zeros(2, 2)), DimError);
}

TEST_CASE("transpose round trip") {
  Rng rng(102);
  Tensor a = random_tensor(rng, 5, 9);
  Tensor tt = num::transpose(num::transpose(a));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == tt.data()[i]);
}

// --- tape ---

TEST_CASE("tape gradients are zero before backward") {
  Tape t;
  VarId a = t.leaf(Tensor::scalar(2.0), true);
  VarId b = t.square(a);
  CHECK(t.grad(a).data()[0] == 0.0);
  CHECK(t.grad(b).data()[0] == 0.0);
  t.backward(b);
  CHECK(t.grad(a).data()[0] == doctest::Approx(4.0));
}

TEST_CASE("backward requires scalar objective") {
  Tape t;
  VarId a = t.leaf(Tensor::zeros(2, 2), true);
  CHECK_THROWS_AS(t.backward(a), ContractError);
}

TEST_CASE("backward on constant-only output is rejected") {
  Tape t;
  VarId a = t.leaf(Tensor::scalar(1.0), false);
  VarId b = t.square(a);
  CHECK_THROWS_AS(t.backward(b), ContractError);
}

TEST_CASE("tape op gradients match finite differences") {
  // One composite expression exercising most ops, gradient checked against
  // central differences of the forward evaluation.
  Rng rng(200);
  const std::size_t B = 4, k = 3;
  Tensor x0 = random_tensor(rng, B, k, -1.0, 1.0);
  Tensor w0 = random_tensor(rng, k, k, -0.8, 0.8);
  Tensor v0 = random_tensor(rng, 1, k, 0.2, 1.0);

  auto build = [&](Tape& t, const Tensor& wval) {
    VarId x = t.leaf(x0, false);
    VarId w = t.leaf(wval, true);
    VarId v = t.leaf(v0, false);
    VarId h = t.tanh_(t.matmul(x, w));
    VarId g = t.sigmoid(t.mul_rowvec(h, v));
    VarId e = t.exp_(t.scale(g, 0.3));
    VarId l = t.log_(t.add_const(t.square(e), 0.5));
    VarId sa = t.softabs(t.sub(l, h), 1e-12);
    VarId rs = t.row_sum(sa);
    VarId bc = t.broadcast_col(rs, k);
    VarId d = t.div(bc, t.add_const(t.square(x), 1.0));
    VarId obj = t.mean_all(d);
    return std::make_pair(w, obj);
  };

  Tape t;
  auto [w, obj] = build(t, w0);
  t.backward(obj);
  const Tensor& gw = t.grad(w);

  Tensor fd = oracle::fd_gradient(
      [&](const Tensor& p) {
        Tape t2;
        auto [w2, obj2] = build(t2, Tensor::from(p.vec(), {k, k}));
        (void)w2;
        return t2.value(obj2).item();
      },
      Tensor::from(w0.vec(), {k * k}));
  for (std::size_t i = 0; i < gw.size(); ++i)
    CHECK(gw.data()[i] == doctest::Approx(fd.data()[i]).epsilon(1e-5));
}

TEST_CASE("tape grads for add_rowvec, select and concat match finite differences") {
  Rng rng(201);
  const std::size_t B = 3, k = 4;
  Tensor x0 = random_tensor(rng, B, k);
  Tensor b0 = random_tensor(rng, 1, 2);

  auto build = [&](Tape& t, const Tensor& bval) {
    VarId x = t.leaf(x0, false);
    VarId b = t.leaf(bval, true);
    VarId left = t.select_cols(x, {0, 2});
    VarId right = t.select_cols(x, {1, 3});
    VarId shifted = t.add_rowvec(left, t.select_rows(b, {0}));
    VarId joined = t.concat_cols(shifted, right);
    VarId picked = t.select_rows(joined, {0, 2});
    VarId obj = t.sum_all(t.square(picked));
    return std::make_pair(b, obj);
  };

  Tape t;
  auto [b, obj] = build(t, b0);
  t.backward(obj);
  Tensor fd = oracle::fd_gradient(
      [&](const Tensor& p) {
        Tape t2;
        auto [b2, obj2] = build(t2, Tensor::from(p.vec(), {1, 2}));
        (void)b2;
        return t2.value(obj2).item();
      },
      Tensor::from(b0.vec(), {2}));
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(t.grad(b).data()[i] == doctest::Approx(fd.data()[i]).epsilon(1e-6));
}

TEST_CASE("repeated backward with zero_grad extracts jacobian rows") {
  // y = W x with W 2x2; rows of the jacobian recovered one at a time.
  Tensor w0 = Tensor::from({1.0, 2.0, 3.0, 4.0}, {2, 2});
  Tape t;
  VarId x = t.leaf(Tensor::from({0.5, -0.7}, {1, 2}), true);
  VarId w = t.leaf(num::transpose(w0), false);
  VarId y = t.matmul(x, w);
  for (std::size_t r = 0; r < 2; ++r) {
    t.zero_grad();
    Tensor seed = Tensor::zeros(1, 2);
    seed.at(0, r) = 1.0;
    t.backward(y, seed);
    CHECK(t.grad(x).at(0, 0) == doctest::Approx(w0.at(r, 0)));
    CHECK(t.grad(x).at(0, 1) == doctest::Approx(w0.at(r, 1)));
  }
}

TEST_CASE("gradient accumulates when a node feeds two consumers") {
  Tape t;
  VarId a = t.leaf(Tensor::scalar(3.0), true);
  VarId y = t.add(t.square(a), t.scale(a, 2.0));  // a^2 + 2a -> dy/da = 2a+2
  t.backward(y);
  CHECK(t.grad(a).data()[0] == doctest::Approx(8.0));
}

TEST_CASE("domain guards") {
  Tape t;
  VarId neg = t.leaf(Tensor::scalar(-1.0), true);
  CHECK_THROWS_AS(t.log_(neg), ContractError);
  VarId big = t.leaf(Tensor::scalar(800.0), true);
  CHECK_THROWS_AS(t.exp_(big), ContractError);
  VarId zero = t.leaf(Tensor::scalar(0.0), false);
  VarId one = t.leaf(Tensor::scalar(1.0), true);
  CHECK_THROWS_AS(t.div(one, zero), ContractError);
}

TEST_CASE("tape clear retains nothing but stays usable") {
  Tape t;
  t.leaf(Tensor::scalar(1.0), true);
  CHECK(t.size() == 1);
  t.clear();
  CHECK(t.size() == 0);
  VarId a = t.leaf(Tensor::scalar(2.0), true);
  VarId b = t.square(a);
  t.backward(b);
  CHECK(t.grad(a).data()[0] == doctest::Approx(4.0));
}

// --- adam ---

TEST_CASE("adam minimizes a convex quadratic") {
  Tensor p = Tensor::from({5.0, -3.0}, {2});
  num::Adam opt({.lr = 0.05});
  for (int it = 0; it < 2000; ++it) {
    Tensor g = Tensor::from({2.0 * p.data()[0], 8.0 * p.data()[1]}, {2});
    opt.step({&p}, {&g});
  }
  CHECK(std::fabs(p.data()[0]) < 1e-3);
  CHECK(std::fabs(p.data()[1]) < 1e-3);
  CHECK(opt.steps() == 2000);
}

TEST_CASE("adam first step moves by ~lr in gradient sign direction") {
  Tensor p = Tensor::from({1.0}, {1});
  num::Adam opt({.lr = 0.1});
  Tensor g = Tensor::from({42.0}, {1});
  opt.step({&p}, {&g});
  CHECK(p.data()[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
}

TEST_CASE("adam rejects non-finite gradients with context") {
  Tensor p = Tensor::from({1.0}, {1});
  num::Adam opt;
  Tensor g = Tensor::from({std::nan("")}, {1});
  CHECK_THROWS_AS(opt.step({&p}, {&g}), TrainingError);
}

TEST_CASE("adam rejects shape drift between steps") {
  Tensor p = Tensor::from({1.0}, {1});
  num::Adam opt;
  Tensor g = Tensor::from({0.5}, {1});
  opt.step({&p}, {&g});
  Tensor p2 = Tensor::zeros(2);
  Tensor g2 = Tensor::zeros(2);
  CHECK_THROWS_AS(opt.step({&p, &p2}, {&g, &g2}), DimError);
}
