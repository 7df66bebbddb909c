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

// Dense n-dimensional tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap shared handle. Operations build a dynamic graph: each
// result that depends on a tensor with requires_grad() holds a node with a
// backward rule and references to its inputs. backward() orders the graph
// topologically and runs every rule exactly once, last op first.
//
// Precision is a per-tensor property. Values are stored as double; a f32
// tensor has every element rounded to binary32 after each producing op, so
// its contents are exactly the floats a 32-bit kernel would hold. An op's
// result is f64 if any input is f64.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace insul {

using Shape = std::vector<std::size_t>;

enum class Dtype { f32, f64 };

std::string to_string(const Shape& shape);
std::size_t numel(const Shape& shape);

namespace detail {
struct TensorImpl;
}

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, Dtype dtype = Dtype::f32, bool requires_grad = false);
  static Tensor full(Shape shape, double value, Dtype dtype = Dtype::f32, bool requires_grad = false);
  /// Throws ShapeError if values.size() != numel(shape).
  static Tensor from_data(Shape shape, std::vector<double> values, Dtype dtype = Dtype::f32,
                          bool requires_grad = false);
  static Tensor scalar(double value, Dtype dtype = Dtype::f32);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  Dtype dtype() const;

  std::span<const double> data() const;
  /// Direct write access; used by optimizers and initializers on leaf tensors.
  /// Values written into a f32 tensor should already be representable as float.
  std::span<double> mutable_data();
  std::vector<double> to_vector() const;
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const;
  bool has_grad() const;
  /// Gradient buffer; empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  Tensor grad_tensor() const;
  void zero_grad();

  /// Copy of the values without graph history.
  Tensor detach() const;
  /// Detached copy converted to another precision.
  Tensor to(Dtype dtype) const;

  /// Reverse-mode pass from this scalar. Leaf gradients accumulate across
  /// calls until zeroed; intermediate gradients are recomputed each call.
  void backward() const;

  bool same_as(const Tensor& other) const noexcept { return impl_ == other.impl_; }

  // Op implementations construct results through this interface.
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  const std::shared_ptr<detail::TensorImpl>& impl() const noexcept { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

enum class ElementwiseKind { add, sub, mul, neg, exp, log_clamped, relu, sigmoid };

/// Probability clamp used by log_clamped and the cross-entropy losses.
inline constexpr double kProbEps = 1e-7;

/// Binary kinds require `b`. Broadcasting follows the trailing-dimension
/// rule: the operand of lower or equal rank must match the trailing
/// dimensions of the other exactly, or hold a single element.
Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor* b = nullptr);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
/// log(clamp(a, eps, 1 - eps)); the gradient is zero where the clamp is active.
Tensor log_clamped(const Tensor& a, double eps = kProbEps);
/// Unclamped natural log; throws DomainError on non-positive input.
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

Shape broadcast_shape(const Shape& a, const Shape& b);

/// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

enum class ReduceKind { sum, mean, max };

/// Reduces over `axes` (all axes when empty/absent). Reduced dimensions are
/// removed; a full reduction yields shape [1]. Max routes its gradient to the
/// first maximal element in row-major order.
Tensor reduce(ReduceKind kind, const Tensor& a, const std::optional<std::vector<std::size_t>>& axes = std::nullopt);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
/// Concatenates along `axis`; all other dimensions must agree.
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Rows [begin, end) of the leading dimension.
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);

/// Fully general hook for fused ops defined in other modules.
/// `backward(out_grad, input_grads)` must add into each requested input
/// gradient (entries are empty spans for inputs that do not need one).
using BackwardRule =
    std::function<void(std::span<const double> out_grad, std::span<const double> out_value,
                       std::vector<std::span<double>>& input_grads)>;

Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                   BackwardRule backward);

/// While alive on a thread, results computed on that thread record no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

/// Rounds in place to binary32 when dtype is f32.
void round_to_dtype(std::span<double> values, Dtype dtype);
Dtype promote(const std::vector<Tensor>& inputs);

// ---------------------------------------------------------------------------
// Finite-difference verification.

using ScalarFn = std::function<Tensor(const Tensor&)>;

/// Max over elements of |g_auto - g_fd| / max(|g_auto|, |g_fd|, 1e-8) using
/// central differences of step h. `x` must be f64.
double grad_check(const ScalarFn& f, const Tensor& x, double h = 1e-5);

/// Same measure for gradients w.r.t. tensors captured inside `loss`.
/// Perturbs the listed flat `indices` of each parameter in place (all
/// elements when `indices` is empty) and restores them afterwards.
double grad_check_params(const std::function<Tensor()>& loss, std::vector<Tensor> params, double h = 1e-5,
                         const std::vector<std::vector<std::size_t>>& indices = {});

}  // namespace insul
