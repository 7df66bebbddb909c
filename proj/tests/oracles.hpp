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

// Reference implementations used only by tests. Each is written the
// slowest obvious way and shares no code with the library kernels.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "insul/prng.hpp"
#include "insul/tensor.hpp"

namespace oracle {

inline std::vector<double> random_values(std::size_t n, insul::Prng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline insul::Tensor random_tensor(const insul::Shape& shape, insul::Prng& rng, insul::Dtype dtype = insul::Dtype::f64,
                                   double lo = -1.0, double hi = 1.0) {
  return insul::Tensor::from_data(shape, random_values(insul::numel(shape), rng, lo, hi), dtype);
}

// a[m,k] * b[k,n], accumulated left to right from zero.
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                  std::size_t k, std::size_t n) {
  std::vector<double> c(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  return c;
}

// Direct cross-correlation: six nested loops, zero padding.
inline std::vector<double> conv2d(const std::vector<double>& x, std::size_t B, std::size_t C, std::size_t H,
                                  std::size_t W, const std::vector<double>& w, const std::vector<double>& bias,
                                  std::size_t O, std::size_t K, std::size_t stride, std::size_t pad) {
  const std::size_t OH = (H + 2 * pad - K) / stride + 1;
  const std::size_t OW = (W + 2 * pad - K) / stride + 1;
  std::vector<double> out(B * O * OH * OW);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox) {
          double s = bias[o];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t ky = 0; ky < K; ++ky)
              for (std::size_t kx = 0; kx < K; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                s += x[((b * C + c) * H + iy) * W + ix] * w[((o * C + c) * K + ky) * K + kx];
              }
          out[((b * O + o) * OH + oy) * OW + ox] = s;
        }
  return out;
}

// Window scan maximum for a single plane.
inline std::vector<double> maxpool(const std::vector<double>& x, std::size_t H, std::size_t W, std::size_t k,
                                   std::size_t s) {
  const std::size_t OH = (H - k) / s + 1, OW = (W - k) / s + 1;
  std::vector<double> out;
  for (std::size_t oy = 0; oy < OH; ++oy)
    for (std::size_t ox = 0; ox < OW; ++ox) {
      std::vector<double> window;
      for (std::size_t ky = 0; ky < k; ++ky)
        for (std::size_t kx = 0; kx < k; ++kx) window.push_back(x[(oy * s + ky) * W + ox * s + kx]);
      out.push_back(*std::max_element(window.begin(), window.end()));
    }
  return out;
}

}  // namespace oracle
