/*
 * Copyright 2026 The insulscan Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <cmath>

#include "insul/error.hpp"
#include "insul/layers.hpp"
#include "insul/losses.hpp"
#include "insul/tensor.hpp"
#include "oracles.hpp"

using namespace insul;

namespace {
std::vector<double> vec(const Tensor& t) { return t.to_vector(); }
}  // namespace

TEST_CASE("elementwise examples") {
  auto a = Tensor::from_data({2}, {1, 2});
  auto b = Tensor::from_data({2}, {3, 4});
  CHECK(vec(add(a, b)) == std::vector<double>{4, 6});
  CHECK(vec(relu(Tensor::from_data({3}, {-1, 0, 2}))) == std::vector<double>{0, 0, 2});
  CHECK(sigmoid(Tensor::from_data({1}, {0})).item() == 0.5);
  CHECK(vec(sub(b, a)) == std::vector<double>{2, 2});
  CHECK(vec(neg(a)) == std::vector<double>{-1, -2});
  CHECK(vec(mul(a, b)) == std::vector<double>{3, 8});
  CHECK(exp(Tensor::scalar(0.0)).item() == 1.0);
}

TEST_CASE("log clamps to [eps, 1-eps] and the unclamped log rejects its domain") {
  auto t = Tensor::from_data({3}, {0.0, 0.5, 1.0}, Dtype::f64);
  auto y = log_clamped(t).to_vector();
  CHECK(y[0] == doctest::Approx(std::log(1e-7)));
  CHECK(y[1] == doctest::Approx(std::log(0.5)));
  CHECK(y[2] == doctest::Approx(std::log(1.0 - 1e-7)));
  for (double v : y) CHECK(std::isfinite(v));
  CHECK_THROWS_AS(log(t), DomainError);
}

TEST_CASE("shape mismatch names both shapes") {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({2});
  try {
    (void)add(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[2]") != std::string::npos);
  }
}

TEST_CASE("broadcast add and mul agree with explicit tiling") {
  Prng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rank = static_cast<std::size_t>(rng.uniform_int(1, 4));
    Shape big(rank);
    for (auto& d : big) d = static_cast<std::size_t>(rng.uniform_int(1, 4));
    const std::size_t keep = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(rank)));
    Shape small(big.end() - static_cast<std::ptrdiff_t>(keep), big.end());
    if (small.empty()) small = {1};
    auto a = oracle::random_tensor(big, rng);
    auto b = oracle::random_tensor(small, rng);
    // Explicit tiling of b to a's shape.
    std::vector<double> tiled(a.numel());
    for (std::size_t i = 0; i < tiled.size(); ++i) tiled[i] = b.data()[i % b.numel()];
    auto bt = Tensor::from_data(big, tiled, Dtype::f64);
    CHECK(vec(add(a, b)) == vec(add(a, bt)));
    CHECK(vec(mul(a, b)) == vec(mul(a, bt)));
    CHECK(vec(mul(b, a)) == vec(mul(bt, a)));
  }
}

TEST_CASE("matmul") {
  auto eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  auto m = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  CHECK(vec(matmul(eye, m)) == vec(m));
  CHECK(matmul(Tensor::from_data({1, 2}, {1, 2}), Tensor::from_data({2, 1}, {3, 4})).item() == 11);
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);

  Prng rng(5);
  auto a = oracle::random_tensor({5, 7}, rng);
  auto b = oracle::random_tensor({7, 3}, rng);
  CHECK(vec(matmul(a, b)) == oracle::matmul(a.to_vector(), b.to_vector(), 5, 7, 3));
}

TEST_CASE("reduce") {
  CHECK(sum(Tensor::from_data({3}, {1, 2, 3})).item() == 6);
  auto m = reduce(ReduceKind::mean, Tensor::from_data({2, 2}, {1, 3, 5, 7}), std::vector<std::size_t>{1});
  CHECK(m.shape() == Shape{2});
  CHECK(vec(m) == std::vector<double>{2, 6});
  CHECK_THROWS_AS(reduce(ReduceKind::sum, Tensor::zeros({2, 2}), std::vector<std::size_t>{2}), ValueError);

  Prng rng(9);
  auto x = oracle::random_tensor({1000}, rng, Dtype::f64, 0.0, 1.0);
  double best = x.data()[0];
  for (double v : x.data()) best = v > best ? v : best;
  CHECK(reduce(ReduceKind::max, x).item() == best);

  auto cube = oracle::random_tensor({2, 3, 4}, rng);
  auto r = reduce(ReduceKind::sum, cube, std::vector<std::size_t>{0, 2});
  REQUIRE(r.shape() == Shape{3});
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t k = 0; k < 4; ++k) s += cube.at({i, j, k});
    CHECK(r.data()[j] == doctest::Approx(s).epsilon(1e-14));
  }
}

TEST_CASE("backward examples") {
  auto x = Tensor::from_data({3}, {1, 2, 3}, Dtype::f64, true);
  sum(x).backward();
  CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{1, 1, 1});

  auto y = Tensor::from_data({2}, {2, 3}, Dtype::f64, true);
  sum(mul(y, y)).backward();
  CHECK(std::vector<double>(y.grad().begin(), y.grad().end()) == std::vector<double>{4, 6});
}

TEST_CASE("backward errors") {
  auto x = Tensor::from_data({2}, {1, 2}, Dtype::f64, true);
  CHECK_THROWS_AS(mul(x, x).backward(), GradError);
  auto c = Tensor::from_data({2}, {1, 2}, Dtype::f64);
  CHECK_THROWS_AS(sum(c).backward(), GradError);
}

TEST_CASE("backward twice without zeroing doubles the gradient") {
  Prng rng(3);
  auto x = oracle::random_tensor({4, 3}, rng).set_requires_grad(true);
  auto w = oracle::random_tensor({3, 2}, rng).set_requires_grad(true);
  auto loss = sum(sigmoid(matmul(x, w)));
  loss.backward();
  const std::vector<double> once(w.grad().begin(), w.grad().end());
  loss.backward();
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(w.grad()[i] == 2.0 * once[i]);
  w.zero_grad();
  loss.backward();
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(w.grad()[i] == once[i]);
}

TEST_CASE("composite conv-relu-mean gradient matches finite differences") {
  Prng rng(21);
  auto conv = make_conv2d(2, 3, 3, 1, 1, InitScheme::he_normal, rng, Dtype::f64);
  auto x = oracle::random_tensor({2, 2, 5, 5}, rng);
  auto f = [&](const Tensor& in) { return mean(relu(conv2d(in, conv))); };
  CHECK(grad_check(f, x, 1e-5) < 1e-4);
  CHECK(grad_check_params([&] { return mean(relu(conv2d(x, conv))); }, {conv.weight, conv.bias}, 1e-5) < 1e-4);
}

TEST_CASE("grad_check examples") {
  Prng rng(4);
  auto x = oracle::random_tensor({3, 4}, rng);
  CHECK(grad_check([](const Tensor& t) { return sum(t); }, x) < 1e-10);
  CHECK(grad_check([](const Tensor& t) { return sum(sigmoid(t)); }, x) < 1e-6);
  auto target = Tensor::from_data({3, 4}, {1, 0, 1, 1, 0, 0, 1, 0, 1, 0, 0, 1}, Dtype::f64);
  CHECK(grad_check([&](const Tensor& t) { return weighted_bce(sigmoid(t), target, {2.0, 1.0}); }, x) < 1e-4);
  CHECK_THROWS_AS(grad_check([](const Tensor& t) { return sum(t); }, x.to(Dtype::f32)), ValueError);
}

TEST_CASE("every differentiable tensor op passes finite differences on random inputs") {
  Prng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rank = static_cast<std::size_t>(rng.uniform_int(1, 4));
    Shape s(rank);
    for (auto& d : s) d = static_cast<std::size_t>(rng.uniform_int(1, 3));
    auto x = oracle::random_tensor(s, rng);
    auto other = oracle::random_tensor(s, rng);
    Shape tail(s.begin() + 1, s.end());
    if (tail.empty()) tail = {1};
    auto bcast = oracle::random_tensor(tail, rng);
    // Shift away from the relu kink so central differences are valid.
    std::vector<double> shifted = x.to_vector();
    for (auto& v : shifted) v = v >= 0 ? v + 0.1 : v - 0.1;
    auto xk = Tensor::from_data(s, shifted, Dtype::f64);
    auto probs = oracle::random_tensor(s, rng, Dtype::f64, 0.05, 0.95);

    CHECK(grad_check([&](const Tensor& t) { return sum(mul(add(t, other), t)); }, x) < 1e-4);
    CHECK(grad_check([&](const Tensor& t) { return sum(mul(sub(t, bcast), bcast)); }, x) < 1e-4);
    CHECK(grad_check([&](const Tensor& t) { return mean(exp(neg(t))); }, x) < 1e-4);
    CHECK(grad_check([&](const Tensor& t) { return sum(log_clamped(t)); }, probs) < 1e-4);
    CHECK(grad_check([&](const Tensor& t) { return sum(mul(relu(t), other)); }, xk) < 1e-4);
    CHECK(grad_check([&](const Tensor& t) { return sum(mul(sigmoid(t), other)); }, x) < 1e-4);
    CHECK(grad_check([&](const Tensor& t) { return reduce(ReduceKind::max, mul(t, other)); }, x) < 1e-4);
    CHECK(grad_check([&](const Tensor& t) { return sum(mul(reduce(ReduceKind::mean, t, std::vector<std::size_t>{0}),
                                                        reduce(ReduceKind::sum, other, std::vector<std::size_t>{0}))); },
                     x) < 1e-4);
    CHECK(grad_check([&](const Tensor& t) { return sum(mul(concat({t, other}, 0), concat({other, t}, 0))); }, x) < 1e-4);
  }
  auto a = oracle::random_tensor({3, 4}, rng);
  auto b = oracle::random_tensor({4, 2}, rng);
  CHECK(grad_check([&](const Tensor& t) { return sum(sigmoid(matmul(t, b))); }, a) < 1e-4);
  CHECK(grad_check([&](const Tensor& t) { return sum(sigmoid(matmul(a, t))); }, b) < 1e-4);
}

TEST_CASE("forward results are bit-identical across runs") {
  auto run = [] {
    Prng rng(123);
    auto conv = make_conv2d(3, 4, 3, 1, 1, InitScheme::he_normal, rng);
    auto x = oracle::random_tensor({2, 3, 8, 8}, rng, Dtype::f32);
    return mean(relu(conv2d(x, conv))).item();
  };
  CHECK(run() == run());
}

TEST_CASE("f32 tensors hold binary32 values; f64 promotes") {
  auto a = Tensor::from_data({1}, {0.1}, Dtype::f32);
  CHECK(a.item() == static_cast<double>(0.1f));
  auto b = Tensor::from_data({1}, {0.1}, Dtype::f64);
  CHECK(add(a, b).dtype() == Dtype::f64);
  CHECK(add(a, a).dtype() == Dtype::f32);
  CHECK(add(a, a).item() == static_cast<double>(0.1f + 0.1f));
}

TEST_CASE("prng determinism") {
  Prng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Prng c(42);
  CHECK(c.next_u64() == std::mt19937_64(42)());
  CHECK(Prng::derive(1, 2) == Prng::derive(1, 2));
  CHECK(Prng::derive(1, 2) != Prng::derive(1, 3));
  Prng u(8);
  for (int i = 0; i < 1000; ++i) {
    auto k = u.uniform_int(-2, 3);
    CHECK(k >= -2);
    CHECK(k <= 3);
  }
}

TEST_CASE("NoGradGuard suppresses graph recording and restores on exit") {
  auto w = Tensor::from_data({2}, {1.0, 2.0}, Dtype::f64, true);
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    const auto y = mul(w, w);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.to_vector() == std::vector<double>{1.0, 4.0});
  }
  CHECK(grad_enabled());
  CHECK(sum(mul(w, w)).requires_grad());
}

TEST_CASE("sigmoid stays strictly inside (0, 1) in both precisions") {
  for (auto dt : {Dtype::f32, Dtype::f64}) {
    const auto y = sigmoid(Tensor::from_data({4}, {-1000.0, -60.0, 60.0, 1000.0}, dt)).to_vector();
    for (double v : y) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
}
