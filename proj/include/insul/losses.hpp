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

#pragma once

#include <span>

#include "insul/tensor.hpp"

namespace insul {

/// Class weights of the weighted binary cross-entropy. w1 scales the
/// positive (insulator) term, w2 the negative term.
struct BceWeights {
  double w1 = 1.0;
  double w2 = 1.0;
};

/// -(1/N) sum[w1 y log p + w2 (1-y) log(1-p)], p clamped to [1e-7, 1-1e-7].
/// Differentiable w.r.t. `pred`; `target` must hold only 0 and 1.
Tensor weighted_bce(const Tensor& pred, const Tensor& target, BceWeights weights = {});

/// (1/N) sum (y - yhat)^2.
Tensor mse(const Tensor& pred, const Tensor& target);

/// Mean over the batch of -log softmax(logits)[target]. logits [B,K],
/// targets in [0, K).
Tensor multiclass_ce(const Tensor& logits, std::span<const int> targets);

}  // namespace insul
