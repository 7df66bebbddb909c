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

#include <memory>
#include <vector>

#include "insul/tensor.hpp"

namespace insul::detail {

struct Node {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardRule rule;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  Dtype dtype = Dtype::f32;
  bool requires_grad = false;
  std::vector<double> grad;
  // Set on op results that take part in differentiation; null on leaves.
  std::shared_ptr<Node> node;
};

}  // namespace insul::detail
