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

#include "gemm.hpp"

#include <algorithm>
#include <vector>

namespace insul::detail {

namespace {

constexpr std::size_t kBlockK = 128;
constexpr std::size_t kBlockN = 512;

// A(i, p) for a row-major [m,k] matrix, or for [k,m] read transposed.
template <bool TransA>
inline double a_at(const double* a, std::size_t m, std::size_t k, std::size_t i, std::size_t p) {
  if constexpr (TransA)
    return a[p * m + i];
  else
    return a[i * k + p];
}

// Four rows of C share each load of a B row. Every C element still sees
// the reduction index in increasing order.
template <bool TransA>
void gemm_blocked(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t n0 = 0; n0 < n; n0 += kBlockN) {
    const std::size_t n1 = std::min(n, n0 + kBlockN);
    for (std::size_t k0 = 0; k0 < k; k0 += kBlockK) {
      const std::size_t k1 = std::min(k, k0 + kBlockK);
      std::size_t i = 0;
      for (; i + 4 <= m; i += 4) {
        double* __restrict c0 = c + i * n;
        double* __restrict c1 = c0 + n;
        double* __restrict c2 = c1 + n;
        double* __restrict c3 = c2 + n;
        for (std::size_t p = k0; p < k1; ++p) {
          const double a0 = a_at<TransA>(a, m, k, i, p);
          const double a1 = a_at<TransA>(a, m, k, i + 1, p);
          const double a2 = a_at<TransA>(a, m, k, i + 2, p);
          const double a3 = a_at<TransA>(a, m, k, i + 3, p);
          const double* __restrict brow = b + p * n;
          for (std::size_t j = n0; j < n1; ++j) {
            const double bv = brow[j];
            c0[j] += a0 * bv;
            c1[j] += a1 * bv;
            c2[j] += a2 * bv;
            c3[j] += a3 * bv;
          }
        }
      }
      for (; i < m; ++i) {
        double* __restrict crow = c + i * n;
        for (std::size_t p = k0; p < k1; ++p) {
          const double av = a_at<TransA>(a, m, k, i, p);
          const double* __restrict brow = b + p * n;
          for (std::size_t j = n0; j < n1; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  gemm_blocked<false>(m, n, k, a, b, c);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  gemm_blocked<true>(m, n, k, a, b, c);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  std::vector<double> bt(k * n);
  transpose(n, k, b, bt.data());
  gemm_nn(m, n, k, a, bt.data(), c);
}

void transpose(std::size_t rows, std::size_t cols, const double* in, double* out) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    const std::size_t r1 = std::min(rows, r0 + kTile);
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::size_t c1 = std::min(cols, c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t cc = c0; cc < c1; ++cc) out[cc * rows + r] = in[r * cols + cc];
    }
  }
}

}  // namespace insul::detail
