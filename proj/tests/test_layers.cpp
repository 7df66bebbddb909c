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
#include <numeric>

#include "insul/error.hpp"
#include "insul/layers.hpp"
#include "oracles.hpp"

using namespace insul;

namespace {

Conv2d fixed_conv(std::vector<double> w, std::vector<double> b, std::size_t out, std::size_t in, std::size_t k,
                  std::size_t stride, std::size_t pad, Dtype dtype = Dtype::f32) {
  Conv2d c;
  c.weight = Tensor::from_data({out, in, k, k}, std::move(w), dtype, true);
  c.bias = Tensor::from_data({out}, std::move(b), dtype, true);
  c.stride = stride;
  c.padding = pad;
  return c;
}

}  // namespace

TEST_CASE("conv2d examples") {
  auto ones = Tensor::full({1, 1, 3, 3}, 1.0);
  auto ident = fixed_conv({1.0}, {0.0}, 1, 1, 1, 1, 0);
  auto y = conv2d(ones, ident);
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  for (double v : y.data()) CHECK(v == 1.0);

  auto ramp = Tensor::from_data({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto box = fixed_conv(std::vector<double>(9, 1.0), {0.0}, 1, 1, 3, 1, 0);
  auto s = conv2d(ramp, box);
  CHECK(s.shape() == Shape{1, 1, 1, 1});
  CHECK(s.item() == 45.0);
}

TEST_CASE("conv2d matches the direct-convolution oracle (32-bit)") {
  Prng rng(1);
  auto x = oracle::random_tensor({2, 3, 8, 8}, rng, Dtype::f32);
  auto conv = make_conv2d(3, 4, 3, 1, 1, InitScheme::he_normal, rng);
  auto bias = oracle::random_values(4, rng);
  std::copy(bias.begin(), bias.end(), conv.bias.mutable_data().begin());
  round_to_dtype(conv.bias.mutable_data(), Dtype::f32);
  auto y = conv2d(x, conv);
  auto ref = oracle::conv2d(x.to_vector(), 2, 3, 8, 8, conv.weight.to_vector(), conv.bias.to_vector(), 4, 3, 1, 1);
  REQUIRE(y.numel() == ref.size());
  double worst = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(y.data()[i] - ref[i]));
  CHECK(worst < 1e-5);
}

TEST_CASE("conv2d equals the oracle over kernel, stride and padding grid") {
  Prng rng(2);
  for (std::size_t k : {1, 3, 5})
    for (std::size_t stride : {1, 2})
      for (std::size_t pad : {0, 1, 2}) {
        const std::size_t H = static_cast<std::size_t>(rng.uniform_int(5, 8));
        const std::size_t W = static_cast<std::size_t>(rng.uniform_int(5, 8));
        auto x = oracle::random_tensor({2, 2, H, W}, rng);
        auto conv = fixed_conv(oracle::random_values(3 * 2 * k * k, rng), oracle::random_values(3, rng), 3, 2, k,
                               stride, pad, Dtype::f64);
        auto y = conv2d(x, conv);
        auto ref = oracle::conv2d(x.to_vector(), 2, 2, H, W, conv.weight.to_vector(), conv.bias.to_vector(), 3, k,
                                  stride, pad);
        REQUIRE(y.numel() == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
      }
}

TEST_CASE("conv2d gradients pass finite differences") {
  Prng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = trial % 2 ? 3 : 1;
    const std::size_t stride = trial % 3 == 0 ? 2 : 1;
    const std::size_t pad = k == 3 ? 1 : 0;
    auto conv = fixed_conv(oracle::random_values(2 * 2 * k * k, rng), oracle::random_values(2, rng), 2, 2, k, stride,
                           pad, Dtype::f64);
    auto x = oracle::random_tensor({2, 2, 5, 4}, rng);
    auto probe = oracle::random_tensor(conv2d(x, conv).shape(), rng);
    auto loss = [&](const Tensor& in) { return sum(mul(conv2d(in, conv), probe)); };
    CHECK(grad_check(loss, x) < 1e-4);
    CHECK(grad_check_params([&] { return sum(mul(conv2d(x, conv), probe)); }, {conv.weight, conv.bias}) < 1e-4);
  }
}

TEST_CASE("conv2d errors") {
  Prng rng(4);
  auto conv = make_conv2d(3, 2, 3, 1, 0, InitScheme::he_normal, rng);
  CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 2, 5, 5}), conv), ShapeError);
  CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 3, 2, 2}), conv), ShapeError);
}

TEST_CASE("maxpool2d") {
  auto y = maxpool2d(Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4}), 2, 2);
  CHECK(y.item() == 4.0);
  auto c = maxpool2d(Tensor::full({1, 1, 4, 4}, 7.0), 2, 2);
  CHECK(c.shape() == Shape{1, 1, 2, 2});
  for (double v : c.data()) CHECK(v == 7.0);
  CHECK_THROWS_AS(maxpool2d(Tensor::zeros({1, 1, 1, 4}), 2, 2), ShapeError);

  Prng rng(5);
  auto x = oracle::random_tensor({1, 1, 8, 8}, rng);
  CHECK(maxpool2d(x, 2, 2).to_vector() == oracle::maxpool(x.to_vector(), 8, 8, 2, 2));
}

TEST_CASE("maxpool2d tie-break and gradient conservation") {
  auto x = Tensor::from_data({1, 1, 2, 2}, {5, 5, 5, 5}, Dtype::f64, true);
  sum(maxpool2d(x, 2, 2)).backward();
  CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{1, 0, 0, 0});

  Prng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    auto in = oracle::random_tensor({2, 3, 6, 6}, rng).set_requires_grad(true);
    auto out = maxpool2d(in, 2, 2);
    auto g = oracle::random_tensor(out.shape(), rng);
    sum(mul(out, g)).backward();
    const double mass_in = std::accumulate(in.grad().begin(), in.grad().end(), 0.0);
    const double mass_out = std::accumulate(g.data().begin(), g.data().end(), 0.0);
    CHECK(mass_in == doctest::Approx(mass_out).epsilon(1e-12));
    CHECK(grad_check([&](const Tensor& t) { return sum(mul(maxpool2d(t, 2, 2), g)); }, in.detach()) < 1e-4);
  }
}

TEST_CASE("avgpool2d") {
  auto y = avgpool2d(Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4}), 2, 2);
  CHECK(y.item() == 2.5);
  Prng rng(7);
  auto x = oracle::random_tensor({1, 2, 4, 4}, rng);
  auto g = oracle::random_tensor({1, 2, 2, 2}, rng);
  CHECK(grad_check([&](const Tensor& t) { return sum(mul(avgpool2d(t, 2, 2), g)); }, x) < 1e-4);
}

TEST_CASE("upsample_nearest") {
  auto y = upsample_nearest(Tensor::from_data({1, 1, 1, 1}, {1}), 2);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  CHECK(y.to_vector() == std::vector<double>{1, 1, 1, 1});

  Prng rng(8);
  auto x = oracle::random_tensor({2, 3, 4, 5}, rng);
  CHECK(upsample_nearest(x, 1).to_vector() == x.to_vector());
  // Block means of the upsampled image recover the input exactly.
  for (std::size_t f : {2, 3}) {
    auto back = avgpool2d(upsample_nearest(x, f), f, f);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(back.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-15));
  }
  auto g = oracle::random_tensor({2, 3, 8, 10}, rng);
  CHECK(grad_check([&](const Tensor& t) { return sum(mul(upsample_nearest(t, 2), g)); }, x) < 1e-4);
}

TEST_CASE("softmax") {
  auto u = softmax(Tensor::zeros({1, 4}, Dtype::f64));
  for (double v : u.data()) CHECK(v == 0.25);

  Prng rng(9);
  auto x = oracle::random_tensor({3, 4}, rng, Dtype::f64, -3, 3);
  auto shifted = add_scalar(x, 17.5);
  auto a = softmax(x).to_vector();
  auto b = softmax(shifted).to_vector();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));

  // Direct exp / sum(exp) in 64-bit.
  for (std::size_t r = 0; r < 3; ++r) {
    double z = 0;
    for (std::size_t k = 0; k < 4; ++k) z += std::exp(x.at({r, k}));
    for (std::size_t k = 0; k < 4; ++k) {
      const double ref = std::exp(x.at({r, k})) / z;
      CHECK(std::abs(a[r * 4 + k] - ref) / ref < 1e-6);
    }
  }

  auto big = oracle::random_tensor({8, 4}, rng, Dtype::f64, -1e4, 1e4);
  auto p = softmax(big);
  for (std::size_t r = 0; r < 8; ++r) {
    double s = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(std::isfinite(p.at({r, k})));
      s += p.at({r, k});
    }
    CHECK(std::abs(s - 1.0) < 1e-6);
  }

  auto g = oracle::random_tensor({3, 4}, rng);
  CHECK(grad_check([&](const Tensor& t) { return sum(mul(softmax(t), g)); }, x) < 1e-4);
  CHECK(grad_check([&](const Tensor& t) { return sum(mul(log_softmax(t), g)); }, x) < 1e-4);
}

TEST_CASE("linear") {
  Prng rng(10);
  auto layer = make_linear(5, 3, InitScheme::xavier_uniform, rng, Dtype::f64);
  auto x = oracle::random_tensor({4, 5}, rng);
  auto y = linear(x, layer);
  CHECK(y.shape() == Shape{4, 3});
  auto g = oracle::random_tensor({4, 3}, rng);
  CHECK(grad_check([&](const Tensor& t) { return sum(mul(linear(t, layer), g)); }, x) < 1e-4);
  CHECK(grad_check_params([&] { return sum(mul(linear(x, layer), g)); }, {layer.weight, layer.bias}) < 1e-4);
  CHECK_THROWS_AS(linear(Tensor::zeros({4, 6}), layer), ShapeError);
}

TEST_CASE("init_params") {
  auto z = init_params({3, 4}, InitSpec{InitScheme::zeros, 0.0, 1});
  for (double v : z.data()) CHECK(v == 0.0);
  auto c = init_params({3}, InitSpec{InitScheme::constant, 0.5, 1});
  for (double v : c.data()) CHECK(v == 0.5);

  InitSpec spec{InitScheme::he_normal, 0.0, 99};
  CHECK(init_params({8, 3, 3, 3}, spec).to_vector() == init_params({8, 3, 3, 3}, spec).to_vector());

  // fan_in = 10 * 5 * 5 = 250; 100000 draws in total.
  auto w = init_params({400, 10, 5, 5}, InitSpec{InitScheme::he_normal, 0.0, 7}, Dtype::f64);
  double m = 0, sq = 0;
  for (double v : w.data()) m += v;
  m /= static_cast<double>(w.numel());
  for (double v : w.data()) sq += (v - m) * (v - m);
  const double sd = std::sqrt(sq / static_cast<double>(w.numel()));
  CHECK(std::abs(sd - std::sqrt(2.0 / 250.0)) / std::sqrt(2.0 / 250.0) < 0.02);

  auto xu = init_params({20, 30}, InitSpec{InitScheme::xavier_uniform, 0.0, 3}, Dtype::f64);
  const double a = std::sqrt(6.0 / 50.0);
  for (double v : xu.data()) CHECK(std::abs(v) <= a);
}
