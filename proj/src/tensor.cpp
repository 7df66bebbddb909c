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

#include "insul/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "gemm.hpp"
#include "insul/error.hpp"
#include "tensor_impl.hpp"

namespace insul {

using detail::Node;
using detail::TensorImpl;

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void round_to_dtype(std::span<double> values, Dtype dtype) {
  if (dtype != Dtype::f32) return;
  for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
}

Dtype promote(const std::vector<Tensor>& inputs) {
  for (const auto& t : inputs)
    if (t.dtype() == Dtype::f64) return Dtype::f64;
  return Dtype::f32;
}

namespace {

std::shared_ptr<TensorImpl> new_impl(Shape shape, std::vector<double> values, Dtype dtype) {
  for (auto d : shape)
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(shape));
  if (values.size() != numel(shape))
    throw ShapeError("data length " + std::to_string(values.size()) + " does not match shape " +
                     to_string(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->dtype = dtype;
  round_to_dtype(impl->data, dtype);
  return impl;
}

const TensorImpl& checked(const std::shared_ptr<TensorImpl>& impl) {
  if (!impl) throw ValueError("use of an undefined tensor");
  return *impl;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, Dtype dtype, bool requires_grad) {
  return full(std::move(shape), 0.0, dtype, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, Dtype dtype, bool requires_grad) {
  const auto n = insul::numel(shape);
  Tensor t(new_impl(std::move(shape), std::vector<double>(n, value), dtype));
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, Dtype dtype, bool requires_grad) {
  Tensor t(new_impl(std::move(shape), std::move(values), dtype));
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value, Dtype dtype) { return from_data({1}, {value}, dtype); }

const Shape& Tensor::shape() const { return checked(impl_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size())
    throw ValueError("axis " + std::to_string(axis) + " out of range for shape " + to_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(impl_).data.size(); }
Dtype Tensor::dtype() const { return checked(impl_).dtype; }
std::span<const double> Tensor::data() const { return checked(impl_).data; }

std::span<double> Tensor::mutable_data() {
  checked(impl_);
  return impl_->data;
}

std::vector<double> Tensor::to_vector() const { return checked(impl_).data; }

double Tensor::item() const {
  const auto& impl = checked(impl_);
  if (impl.data.size() != 1) throw ShapeError("item() requires a single element, shape is " + to_string(impl.shape));
  return impl.data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& impl = checked(impl_);
  if (index.size() != impl.shape.size()) throw ValueError("index rank does not match tensor rank");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= impl.shape[axis]) throw ValueError("index out of range");
    flat = flat * impl.shape[axis] + i;
    ++axis;
  }
  return impl.data[flat];
}

bool Tensor::requires_grad() const { return checked(impl_).requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  checked(impl_);
  if (impl_->node && !on) throw GradError("cannot disable gradients on a non-leaf tensor");
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::is_leaf() const { return checked(impl_).node == nullptr; }
bool Tensor::has_grad() const { return !checked(impl_).grad.empty(); }
std::span<const double> Tensor::grad() const { return checked(impl_).grad; }

std::span<double> Tensor::mutable_grad() {
  checked(impl_);
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

Tensor Tensor::grad_tensor() const {
  const auto& impl = checked(impl_);
  std::vector<double> g = impl.grad.empty() ? std::vector<double>(impl.data.size(), 0.0) : impl.grad;
  return Tensor(new_impl(impl.shape, std::move(g), Dtype::f64));
}

void Tensor::zero_grad() {
  checked(impl_);
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  const auto& impl = checked(impl_);
  return Tensor(new_impl(impl.shape, impl.data, impl.dtype));
}

Tensor Tensor::to(Dtype dtype) const {
  const auto& impl = checked(impl_);
  return Tensor(new_impl(impl.shape, impl.data, dtype));
}

void Tensor::backward() const {
  const auto& root = checked(impl_);
  if (root.data.size() != 1)
    throw GradError("backward() needs a scalar loss, got shape " + to_string(root.shape));
  if (!root.requires_grad)
    throw GradError("loss is not connected to any tensor that requires gradients");

  // Post-order DFS over nodes gives inputs before the ops that consume them.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto& [cur, next] = stack.back();
    if (cur->node && next < cur->node->inputs.size()) {
      TensorImpl* in = cur->node->inputs[next++].get();
      if (in->requires_grad && seen.insert(in).second) stack.emplace_back(in, 0);
      continue;
    }
    order.push_back(cur);
    stack.pop_back();
  }

  // Every buffer receives this pass's contribution from zero; leaf totals
  // from earlier passes are added back at the end, so two identical passes
  // give exactly twice the single-pass gradient.
  std::vector<std::pair<TensorImpl*, std::vector<double>>> carried;
  for (auto* t : order) {
    if (!t->node && !t->grad.empty()) carried.emplace_back(t, std::move(t->grad));
    t->grad.assign(t->data.size(), 0.0);
  }
  impl_->grad[0] = 1.0;

  std::vector<std::span<double>> input_grads;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* t = *it;
    if (!t->node) continue;
    input_grads.clear();
    for (auto& in : t->node->inputs) {
      if (in->requires_grad) {
        if (in->grad.empty()) in->grad.assign(in->data.size(), 0.0);
        input_grads.emplace_back(in->grad);
      } else {
        input_grads.emplace_back();
      }
    }
    t->node->rule(t->grad, t->data, input_grads);
  }
  for (auto& [t, previous] : carried)
    for (std::size_t i = 0; i < previous.size(); ++i) t->grad[i] += previous[i];
}

namespace {
thread_local bool t_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs, BackwardRule backward) {
  const Dtype dtype = promote(inputs);
  auto impl = new_impl(std::move(shape), std::move(values), dtype);
  const bool needs_grad =
      t_grad_enabled && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (needs_grad) {
    impl->requires_grad = true;
    auto node = std::make_shared<Node>();
    node->inputs.reserve(inputs.size());
    for (const auto& t : inputs) node->inputs.push_back(t.impl());
    node->rule = std::move(backward);
    impl->node = std::move(node);
  }
  return Tensor(std::move(impl));
}

// ---------------------------------------------------------------------------
// Elementwise

Shape broadcast_shape(const Shape& a, const Shape& b) {
  if (a == b) return a;
  const auto na = numel(a);
  const auto nb = numel(b);
  if (nb == 1 && (na != 1 || a.size() >= b.size())) return a;
  if (na == 1) return b;
  const Shape& big = a.size() >= b.size() ? a : b;
  const Shape& small = a.size() >= b.size() ? b : a;
  if (small.size() < big.size() && std::equal(small.rbegin(), small.rend(), big.rbegin())) return big;
  throw ShapeError("cannot broadcast shapes " + to_string(a) + " and " + to_string(b));
}

namespace {

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor binary_op(ElementwiseKind kind, const Tensor& a, const Tensor& b) {
  Shape out_shape = broadcast_shape(a.shape(), b.shape());
  const std::size_t n = numel(out_shape);
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> out(n);
  switch (kind) {
    case ElementwiseKind::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i % na] + bv[i % nb];
      break;
    case ElementwiseKind::sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i % na] - bv[i % nb];
      break;
    case ElementwiseKind::mul:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i % na] * bv[i % nb];
      break;
    default:
      throw ValueError("not a binary elementwise kind");
  }
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result(std::move(out_shape), std::move(out), {a, b},
                     [kind, ai, bi, na, nb](std::span<const double> g, std::span<const double>,
                                            std::vector<std::span<double>>& grads) {
                       const std::size_t n = g.size();
                       auto& ga = grads[0];
                       auto& gb = grads[1];
                       switch (kind) {
                         case ElementwiseKind::add:
                           if (!ga.empty())
                             for (std::size_t i = 0; i < n; ++i) ga[i % na] += g[i];
                           if (!gb.empty())
                             for (std::size_t i = 0; i < n; ++i) gb[i % nb] += g[i];
                           break;
                         case ElementwiseKind::sub:
                           if (!ga.empty())
                             for (std::size_t i = 0; i < n; ++i) ga[i % na] += g[i];
                           if (!gb.empty())
                             for (std::size_t i = 0; i < n; ++i) gb[i % nb] -= g[i];
                           break;
                         case ElementwiseKind::mul:
                           if (!ga.empty())
                             for (std::size_t i = 0; i < n; ++i) ga[i % na] += g[i] * bi->data[i % nb];
                           if (!gb.empty())
                             for (std::size_t i = 0; i < n; ++i) gb[i % nb] += g[i] * ai->data[i % na];
                           break;
                         default:
                           break;
                       }
                     });
}

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd bwd) {
  auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  auto ai = a.impl();
  return make_result(a.shape(), std::move(out), {a},
                     [ai, bwd](std::span<const double> g, std::span<const double> y,
                               std::vector<std::span<double>>& grads) {
                       auto& ga = grads[0];
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bwd(ai->data[i], y[i]);
                     });
}

}  // namespace

Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor* b) {
  switch (kind) {
    case ElementwiseKind::add:
    case ElementwiseKind::sub:
    case ElementwiseKind::mul:
      if (!b) throw ValueError("binary elementwise op requires two operands");
      return binary_op(kind, a, *b);
    case ElementwiseKind::neg:
      return unary_op(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
    case ElementwiseKind::exp:
      return unary_op(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
    case ElementwiseKind::log_clamped:
      return log_clamped(a);
    case ElementwiseKind::relu:
      return unary_op(a, [](double x) { return x > 0 ? x : 0.0; },
                      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
    case ElementwiseKind::sigmoid: {
      // Saturate at the representable neighbours of 0 and 1 so outputs stay
      // strictly inside (0, 1) after rounding to the dtype.
      const bool f32 = a.dtype() == Dtype::f32;
      const double lo = f32 ? std::numeric_limits<float>::min() : std::numeric_limits<double>::min();
      const double hi = f32 ? 1.0 - 0x1p-24 : 1.0 - 0x1p-53;
      return unary_op(a, [lo, hi](double x) { return std::clamp(sigmoid_scalar(x), lo, hi); },
                      [](double, double y) { return y * (1.0 - y); });
    }
  }
  throw ValueError("unknown elementwise kind");
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseKind::add, a, &b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseKind::sub, a, &b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseKind::mul, a, &b); }
Tensor neg(const Tensor& a) { return elementwise(ElementwiseKind::neg, a); }
Tensor exp(const Tensor& a) { return elementwise(ElementwiseKind::exp, a); }
Tensor relu(const Tensor& a) { return elementwise(ElementwiseKind::relu, a); }
Tensor sigmoid(const Tensor& a) { return elementwise(ElementwiseKind::sigmoid, a); }

Tensor log_clamped(const Tensor& a, double eps) {
  const double lo = eps;
  const double hi = 1.0 - eps;
  return unary_op(
      a, [lo, hi](double x) { return std::log(std::clamp(x, lo, hi)); },
      [lo, hi](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0 / x; });
}

Tensor log(const Tensor& a) {
  for (double v : a.data())
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
  return unary_op(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary_op(a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary_op(a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

// ---------------------------------------------------------------------------
// Linear algebra and reductions

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("matmul expects rank-2 operands, got " + to_string(a.shape()) + " and " + to_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul inner dimensions differ: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  std::vector<double> out(m * n, 0.0);
  detail::gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data());
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result({m, n}, std::move(out), {a, b},
                     [ai, bi, m, n, k](std::span<const double> g, std::span<const double>,
                                       std::vector<std::span<double>>& grads) {
                       if (!grads[0].empty()) detail::gemm_nt(m, k, n, g.data(), bi->data.data(), grads[0].data());
                       if (!grads[1].empty()) detail::gemm_tn(k, n, m, ai->data.data(), g.data(), grads[1].data());
                     });
}

Tensor reduce(ReduceKind kind, const Tensor& a, const std::optional<std::vector<std::size_t>>& axes) {
  const Shape& in_shape = a.shape();
  const std::size_t rank = in_shape.size();
  std::vector<bool> reduced(rank, false);
  if (!axes || axes->empty()) {
    std::fill(reduced.begin(), reduced.end(), true);
  } else {
    for (auto ax : *axes) {
      if (ax >= rank)
        throw ValueError("invalid reduction axis " + std::to_string(ax) + " for shape " + to_string(in_shape));
      if (reduced[ax]) throw ValueError("duplicate reduction axis " + std::to_string(ax));
      reduced[ax] = true;
    }
  }
  Shape out_shape;
  for (std::size_t d = 0; d < rank; ++d)
    if (!reduced[d]) out_shape.push_back(in_shape[d]);
  if (out_shape.empty()) out_shape = {1};

  // out_stride[d] maps an input coordinate to its contribution in the output.
  std::vector<std::size_t> out_stride(rank, 0);
  std::size_t stride = 1;
  for (std::size_t d = rank; d-- > 0;) {
    if (!reduced[d]) {
      out_stride[d] = stride;
      stride *= in_shape[d];
    }
  }
  const std::size_t n_out = numel(out_shape);
  const std::size_t n_in = a.numel();
  const std::size_t count = n_in / n_out;

  std::vector<std::size_t> target(n_in);
  {
    std::vector<std::size_t> idx(rank, 0);
    std::size_t o = 0;
    for (std::size_t i = 0; i < n_in; ++i) {
      target[i] = o;
      for (std::size_t d = rank; d-- > 0;) {
        ++idx[d];
        o += out_stride[d];
        if (idx[d] < in_shape[d]) break;
        o -= out_stride[d] * idx[d];
        idx[d] = 0;
      }
    }
  }

  auto av = a.data();
  std::vector<double> out(n_out, 0.0);
  std::vector<std::size_t> argmax;
  if (kind == ReduceKind::max) {
    argmax.assign(n_out, n_in);
    for (std::size_t i = 0; i < n_in; ++i) {
      auto o = target[i];
      if (argmax[o] == n_in || av[i] > out[o]) {
        out[o] = av[i];
        argmax[o] = i;
      }
    }
  } else {
    for (std::size_t i = 0; i < n_in; ++i) out[target[i]] += av[i];
    if (kind == ReduceKind::mean)
      for (auto& v : out) v /= static_cast<double>(count);
  }

  return make_result(std::move(out_shape), std::move(out), {a},
                     [kind, target = std::move(target), argmax = std::move(argmax), count](
                         std::span<const double> g, std::span<const double>, std::vector<std::span<double>>& grads) {
                       auto& ga = grads[0];
                       if (kind == ReduceKind::max) {
                         for (std::size_t o = 0; o < g.size(); ++o) ga[argmax[o]] += g[o];
                         return;
                       }
                       const double s = kind == ReduceKind::mean ? 1.0 / static_cast<double>(count) : 1.0;
                       for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[target[i]] * s;
                     });
}

Tensor sum(const Tensor& a) { return reduce(ReduceKind::sum, a); }
Tensor mean(const Tensor& a) { return reduce(ReduceKind::mean, a); }

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel())
    throw ShapeError("cannot reshape " + to_string(a.shape()) + " to " + to_string(shape));
  return make_result(std::move(shape), a.to_vector(), {a},
                     [](std::span<const double> g, std::span<const double>, std::vector<std::span<double>>& grads) {
                       for (std::size_t i = 0; i < g.size(); ++i) grads[0][i] += g[i];
                     });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ValueError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ValueError("invalid concat axis " + std::to_string(axis));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) throw ShapeError("concat shape mismatch: " + to_string(first) + " vs " + to_string(s));
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  std::vector<std::size_t> chunk(parts.size());
  for (std::size_t p = 0; p < parts.size(); ++p) chunk[p] = parts[p].dim(axis) * inner;
  const std::size_t row = out_shape[axis] * inner;
  std::vector<double> out(numel(out_shape));
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t off = o * row;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      auto src = parts[p].data().subspan(o * chunk[p], chunk[p]);
      std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(off));
      off += chunk[p];
    }
  }
  return make_result(std::move(out_shape), std::move(out), parts,
                     [outer, row, chunk](std::span<const double> g, std::span<const double>,
                                         std::vector<std::span<double>>& grads) {
                       for (std::size_t o = 0; o < outer; ++o) {
                         std::size_t off = o * row;
                         for (std::size_t p = 0; p < chunk.size(); ++p) {
                           if (!grads[p].empty())
                             for (std::size_t i = 0; i < chunk[p]; ++i) grads[p][o * chunk[p] + i] += g[off + i];
                           off += chunk[p];
                         }
                       }
                     });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  if (a.rank() == 0 || begin >= end || end > a.dim(0))
    throw ValueError("invalid row range [" + std::to_string(begin) + "," + std::to_string(end) + ") for shape " +
                     to_string(a.shape()));
  const std::size_t row = a.numel() / a.dim(0);
  Shape out_shape = a.shape();
  out_shape[0] = end - begin;
  auto src = a.data().subspan(begin * row, (end - begin) * row);
  return make_result(std::move(out_shape), std::vector<double>(src.begin(), src.end()), {a},
                     [offset = begin * row](std::span<const double> g, std::span<const double>,
                                            std::vector<std::span<double>>& grads) {
                       for (std::size_t i = 0; i < g.size(); ++i) grads[0][offset + i] += g[i];
                     });
}

// ---------------------------------------------------------------------------
// Finite differences

namespace {
double relative_error(double ga, double gf) {
  return std::abs(ga - gf) / std::max({std::abs(ga), std::abs(gf), 1e-8});
}
}  // namespace

double grad_check(const ScalarFn& f, const Tensor& x, double h) {
  if (x.dtype() != Dtype::f64) throw ValueError("grad_check requires a f64 input");
  Tensor leaf = x.detach();
  leaf.set_requires_grad(true);
  Tensor y = f(leaf);
  if (y.numel() != 1) throw GradError("grad_check needs a scalar-valued function");
  y.backward();
  const std::vector<double> auto_grad(leaf.grad().begin(), leaf.grad().end());

  double worst = 0.0;
  std::vector<double> base = x.to_vector();
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto probe = base;
    probe[i] = base[i] + h;
    const double fp = f(Tensor::from_data(x.shape(), probe, Dtype::f64)).item();
    probe[i] = base[i] - h;
    const double fm = f(Tensor::from_data(x.shape(), probe, Dtype::f64)).item();
    worst = std::max(worst, relative_error(auto_grad[i], (fp - fm) / (2.0 * h)));
  }
  return worst;
}

double grad_check_params(const std::function<Tensor()>& loss, std::vector<Tensor> params, double h,
                         const std::vector<std::vector<std::size_t>>& indices) {
  for (auto& p : params) {
    if (p.dtype() != Dtype::f64) throw ValueError("grad_check_params requires f64 parameters");
    p.zero_grad();
  }
  loss().backward();
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    std::vector<double> g(p.grad().begin(), p.grad().end());
    if (g.empty()) g.assign(p.numel(), 0.0);
    std::vector<std::size_t> which;
    if (k < indices.size() && !indices[k].empty()) {
      which = indices[k];
    } else {
      which.resize(p.numel());
      for (std::size_t i = 0; i < which.size(); ++i) which[i] = i;
    }
    auto values = p.mutable_data();
    for (auto i : which) {
      const double saved = values[i];
      values[i] = saved + h;
      const double fp = loss().item();
      values[i] = saved - h;
      const double fm = loss().item();
      values[i] = saved;
      worst = std::max(worst, relative_error(g[i], (fp - fm) / (2.0 * h)));
    }
  }
  return worst;
}

}  // namespace insul
