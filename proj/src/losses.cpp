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

#include "insul/losses.hpp"

#include <algorithm>
#include <cmath>

#include "insul/error.hpp"
#include "tensor_impl.hpp"

namespace insul {

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": prediction shape " + to_string(a.shape()) + " differs from target shape " +
                     to_string(b.shape()));
}
}  // namespace

Tensor weighted_bce(const Tensor& pred, const Tensor& target, BceWeights weights) {
  require_same_shape(pred, target, "weighted_bce");
  if (!(weights.w1 > 0.0) || !(weights.w2 > 0.0)) throw ValueError("weighted_bce weights must be positive");
  auto p = pred.data();
  auto y = target.data();
  for (double v : y)
    if (v != 0.0 && v != 1.0) throw ValueError("weighted_bce target must be binary, found " + std::to_string(v));

  const double lo = kProbEps, hi = 1.0 - kProbEps;
  const double n = static_cast<double>(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], lo, hi);
    total += weights.w1 * y[i] * std::log(q) + weights.w2 * (1.0 - y[i]) * std::log(1.0 - q);
  }
  auto pi = pred.impl();
  auto yi = target.impl();
  return make_result({1}, {-total / n}, {pred},
                     [pi, yi, weights, lo, hi, n](std::span<const double> g, std::span<const double>,
                                                  std::vector<std::span<double>>& grads) {
                       auto& gp = grads[0];
                       const double scale = -g[0] / n;
                       for (std::size_t i = 0; i < gp.size(); ++i) {
                         const double q = pi->data[i];
                         if (q < lo || q > hi) continue;
                         const double t = yi->data[i];
                         gp[i] += scale * (weights.w1 * t / q - weights.w2 * (1.0 - t) / (1.0 - q));
                       }
                     });
}

Tensor mse(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse");
  auto p = pred.data();
  auto y = target.data();
  const double n = static_cast<double>(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = y[i] - p[i];
    total += d * d;
  }
  auto pi = pred.impl();
  auto yi = target.impl();
  return make_result({1}, {total / n}, {pred, target},
                     [pi, yi, n](std::span<const double> g, std::span<const double>, std::vector<std::span<double>>& grads) {
                       const double scale = 2.0 * g[0] / n;
                       for (std::size_t i = 0; i < pi->data.size(); ++i) {
                         const double d = pi->data[i] - yi->data[i];
                         if (!grads[0].empty()) grads[0][i] += scale * d;
                         if (!grads[1].empty()) grads[1][i] -= scale * d;
                       }
                     });
}

Tensor multiclass_ce(const Tensor& logits, std::span<const int> targets) {
  if (logits.rank() != 2) throw ShapeError("multiclass_ce expects [B,K] logits, got " + to_string(logits.shape()));
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  if (targets.size() != B)
    throw ShapeError("multiclass_ce: " + std::to_string(targets.size()) + " targets for batch of " + std::to_string(B));
  for (int t : targets)
    if (t < 0 || static_cast<std::size_t>(t) >= K)
      throw ValueError("class index " + std::to_string(t) + " out of range [0," + std::to_string(K) + ")");

  auto x = logits.data();
  std::vector<double> probs(B * K);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = x.data() + b * K;
    const double m = *std::max_element(row, row + K);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += (probs[b * K + k] = std::exp(row[k] - m));
    for (std::size_t k = 0; k < K; ++k) probs[b * K + k] /= z;
    total += -(row[targets[b]] - m - std::log(z));
  }
  std::vector<int> labels(targets.begin(), targets.end());
  return make_result({1}, {total / static_cast<double>(B)}, {logits},
                     [probs = std::move(probs), labels = std::move(labels), B, K](
                         std::span<const double> g, std::span<const double>, std::vector<std::span<double>>& grads) {
                       const double scale = g[0] / static_cast<double>(B);
                       for (std::size_t b = 0; b < B; ++b)
                         for (std::size_t k = 0; k < K; ++k) {
                           const double onehot = static_cast<int>(k) == labels[b] ? 1.0 : 0.0;
                           grads[0][b * K + k] += scale * (probs[b * K + k] - onehot);
                         }
                     });
}

}  // namespace insul
