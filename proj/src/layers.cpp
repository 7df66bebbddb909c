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

#include "insul/layers.hpp"

#include <algorithm>
#include <cmath>

#include "gemm.hpp"
#include "insul/error.hpp"
#include "tensor_impl.hpp"

namespace insul {

std::string to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::he_normal: return "he-normal";
    case InitScheme::xavier_uniform: return "xavier-uniform";
    case InitScheme::zeros: return "zeros";
    case InitScheme::constant: return "constant";
  }
  return "?";
}

InitScheme parse_init_scheme(const std::string& name) {
  if (name == "he-normal") return InitScheme::he_normal;
  if (name == "xavier-uniform") return InitScheme::xavier_uniform;
  if (name == "zeros") return InitScheme::zeros;
  if (name == "constant") return InitScheme::constant;
  throw ValueError("unknown init scheme '" + name + "'");
}

Tensor init_params(const Shape& shape, InitScheme scheme, double value, Prng& rng, Dtype dtype) {
  const std::size_t n = numel(shape);
  std::size_t receptive = 1;
  for (std::size_t d = 2; d < shape.size(); ++d) receptive *= shape[d];
  const std::size_t fan_in = shape.size() > 1 ? n / shape[0] : n;
  const std::size_t fan_out = shape.size() > 1 ? shape[0] * receptive : n;

  std::vector<double> v(n, 0.0);
  switch (scheme) {
    case InitScheme::he_normal: {
      const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (auto& x : v) x = rng.normal(0.0, sd);
      break;
    }
    case InitScheme::xavier_uniform: {
      const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (auto& x : v) x = rng.uniform(-a, a);
      break;
    }
    case InitScheme::zeros:
      break;
    case InitScheme::constant:
      std::fill(v.begin(), v.end(), value);
      break;
  }
  return Tensor::from_data(shape, std::move(v), dtype);
}

Tensor init_params(const Shape& shape, const InitSpec& spec, Dtype dtype) {
  Prng rng(spec.seed);
  return init_params(shape, spec.scheme, spec.value, rng, dtype);
}

Conv2d make_conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride, std::size_t padding,
                   InitScheme scheme, Prng& rng, Dtype dtype) {
  Conv2d c;
  c.weight = init_params({out_ch, in_ch, kernel, kernel}, scheme, 0.0, rng, dtype);
  c.weight.set_requires_grad(true);
  c.bias = Tensor::zeros({out_ch}, dtype, true);
  c.stride = stride;
  c.padding = padding;
  return c;
}

Linear make_linear(std::size_t in, std::size_t out, InitScheme scheme, Prng& rng, Dtype dtype) {
  Linear l;
  l.weight = init_params({out, in}, scheme, 0.0, rng, dtype);
  l.weight.set_requires_grad(true);
  l.bias = Tensor::zeros({out}, dtype, true);
  return l;
}

std::size_t conv_output_size(std::size_t input, std::size_t kernel, std::size_t stride, std::size_t padding) {
  return (input + 2 * padding - kernel) / stride + 1;
}

namespace {

struct ConvGeometry {
  std::size_t batch, channels, height, width;
  std::size_t kh, kw, stride, pad;
  std::size_t out_h, out_w;
  std::size_t rows() const { return channels * kh * kw; }
  std::size_t pixels() const { return out_h * out_w; }
};

void im2col(const ConvGeometry& g, const double* img, double* cols) {
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t ky = 0; ky < g.kh; ++ky)
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        double* row = cols + ((c * g.kh + ky) * g.kw + kx) * g.pixels();
        const double* plane = img + c * g.height * g.width;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
          double* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) ? 0.0 : src[ix];
          }
        }
      }
}

void col2im(const ConvGeometry& g, const double* cols, double* img) {
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t ky = 0; ky < g.kh; ++ky)
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const double* row = cols + ((c * g.kh + ky) * g.kw + kx) * g.pixels();
        double* plane = img + c * g.height * g.width;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * g.width;
          const double* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) dst[ix] += src[ox];
          }
        }
      }
}

void require_rank4(const Tensor& t, const char* op) {
  if (t.rank() != 4) throw ShapeError(std::string(op) + " expects [B,C,H,W], got " + to_string(t.shape()));
}

}  // namespace

Tensor conv2d(const Tensor& input, const Conv2d& layer) {
  require_rank4(input, "conv2d");
  if (layer.weight.rank() != 4 || layer.bias.rank() != 1 || layer.bias.dim(0) != layer.weight.dim(0))
    throw ShapeError("conv2d weight/bias shapes inconsistent: " + to_string(layer.weight.shape()) + ", " +
                     to_string(layer.bias.shape()));
  if (layer.stride == 0) throw ValueError("conv2d stride must be positive");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), layer.kernel_h(), layer.kernel_w(),
                 layer.stride, layer.padding, 0, 0};
  if (g.channels != layer.in_channels())
    throw ShapeError("conv2d channel mismatch: input has " + std::to_string(g.channels) + " channels, layer expects " +
                     std::to_string(layer.in_channels()));
  if (g.height + 2 * g.pad < g.kh || g.width + 2 * g.pad < g.kw)
    throw ShapeError("conv2d input " + to_string(input.shape()) + " too small for kernel " +
                     std::to_string(g.kh) + "x" + std::to_string(g.kw) + " with padding " + std::to_string(g.pad));
  g.out_h = conv_output_size(g.height, g.kh, g.stride, g.pad);
  g.out_w = conv_output_size(g.width, g.kw, g.stride, g.pad);

  const std::size_t out_ch = layer.out_channels();
  const std::size_t in_plane = g.channels * g.height * g.width;
  const std::size_t out_plane = out_ch * g.pixels();
  // A 1x1 stride-1 unpadded kernel reads the input directly.
  const bool direct = g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad == 0;

  std::vector<double> out(g.batch * out_plane, 0.0);
  std::vector<double> cols(direct ? 0 : g.rows() * g.pixels());
  const double* w = layer.weight.data().data();
  const double* bias = layer.bias.data().data();
  const double* x = input.data().data();
  for (std::size_t b = 0; b < g.batch; ++b) {
    double* ob = out.data() + b * out_plane;
    for (std::size_t o = 0; o < out_ch; ++o) std::fill(ob + o * g.pixels(), ob + (o + 1) * g.pixels(), bias[o]);
    const double* src = x + b * in_plane;
    if (!direct) {
      im2col(g, src, cols.data());
      src = cols.data();
    }
    detail::gemm_nn(out_ch, g.pixels(), g.rows(), w, src, ob);
  }

  auto xi = input.impl();
  auto wi = layer.weight.impl();
  return make_result(
      {g.batch, out_ch, g.out_h, g.out_w}, std::move(out), {input, layer.weight, layer.bias},
      [g, xi, wi, out_ch, in_plane, out_plane, direct](std::span<const double> grad, std::span<const double>,
                                                       std::vector<std::span<double>>& grads) {
        auto& gx = grads[0];
        auto& gw = grads[1];
        auto& gb = grads[2];
        std::vector<double> cols(direct ? 0 : g.rows() * g.pixels());
        std::vector<double> dcols(g.rows() * g.pixels());
        for (std::size_t b = 0; b < g.batch; ++b) {
          const double* gout = grad.data() + b * out_plane;
          if (!gb.empty())
            for (std::size_t o = 0; o < out_ch; ++o) {
              double s = 0.0;
              for (std::size_t p = 0; p < g.pixels(); ++p) s += gout[o * g.pixels() + p];
              gb[o] += s;
            }
          if (!gw.empty()) {
            const double* src = xi->data.data() + b * in_plane;
            if (!direct) {
              im2col(g, src, cols.data());
              src = cols.data();
            }
            detail::gemm_nt(out_ch, g.rows(), g.pixels(), gout, src, gw.data());
          }
          if (!gx.empty()) {
            double* dst = gx.data() + b * in_plane;
            if (direct) {
              detail::gemm_tn(g.rows(), g.pixels(), out_ch, wi->data.data(), gout, dst);
            } else {
              std::fill(dcols.begin(), dcols.end(), 0.0);
              detail::gemm_tn(g.rows(), g.pixels(), out_ch, wi->data.data(), gout, dcols.data());
              col2im(g, dcols.data(), dst);
            }
          }
        }
      });
}

Tensor maxpool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  require_rank4(input, "maxpool2d");
  if (window == 0 || stride == 0) throw ValueError("maxpool2d window and stride must be positive");
  const std::size_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (H < window || W < window)
    throw ShapeError("maxpool2d window " + std::to_string(window) + " exceeds input " + to_string(input.shape()));
  const std::size_t oh = (H - window) / stride + 1, ow = (W - window) / stride + 1;
  std::vector<double> out(B * C * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  auto x = input.data();
  std::size_t o = 0;
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const std::size_t base = bc * H * W;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        std::size_t best = base + oy * stride * W + ox * stride;
        for (std::size_t ky = 0; ky < window; ++ky)
          for (std::size_t kx = 0; kx < window; ++kx) {
            const std::size_t i = base + (oy * stride + ky) * W + ox * stride + kx;
            if (x[i] > x[best]) best = i;
          }
        out[o] = x[best];
        argmax[o] = best;
      }
  }
  return make_result({B, C, oh, ow}, std::move(out), {input},
                     [argmax = std::move(argmax)](std::span<const double> g, std::span<const double>,
                                                  std::vector<std::span<double>>& grads) {
                       for (std::size_t i = 0; i < g.size(); ++i) grads[0][argmax[i]] += g[i];
                     });
}

Tensor avgpool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  require_rank4(input, "avgpool2d");
  if (window == 0 || stride == 0) throw ValueError("avgpool2d window and stride must be positive");
  const std::size_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (H < window || W < window)
    throw ShapeError("avgpool2d window " + std::to_string(window) + " exceeds input " + to_string(input.shape()));
  const std::size_t oh = (H - window) / stride + 1, ow = (W - window) / stride + 1;
  const double inv = 1.0 / static_cast<double>(window * window);
  std::vector<double> out(B * C * oh * ow, 0.0);
  auto x = input.data();
  std::size_t o = 0;
  for (std::size_t bc = 0; bc < B * C; ++bc)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        double s = 0.0;
        for (std::size_t ky = 0; ky < window; ++ky)
          for (std::size_t kx = 0; kx < window; ++kx) s += x[bc * H * W + (oy * stride + ky) * W + ox * stride + kx];
        out[o] = s * inv;
      }
  return make_result({B, C, oh, ow}, std::move(out), {input},
                     [=](std::span<const double> g, std::span<const double>, std::vector<std::span<double>>& grads) {
                       std::size_t o = 0;
                       for (std::size_t bc = 0; bc < B * C; ++bc)
                         for (std::size_t oy = 0; oy < oh; ++oy)
                           for (std::size_t ox = 0; ox < ow; ++ox, ++o)
                             for (std::size_t ky = 0; ky < window; ++ky)
                               for (std::size_t kx = 0; kx < window; ++kx)
                                 grads[0][bc * H * W + (oy * stride + ky) * W + ox * stride + kx] += g[o] * inv;
                     });
}

Tensor upsample_nearest(const Tensor& input, std::size_t factor) {
  require_rank4(input, "upsample_nearest");
  if (factor == 0) throw ValueError("upsample factor must be positive");
  const std::size_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t OH = H * factor, OW = W * factor;
  std::vector<double> out(B * C * OH * OW);
  auto x = input.data();
  for (std::size_t bc = 0; bc < B * C; ++bc)
    for (std::size_t y = 0; y < OH; ++y)
      for (std::size_t xx = 0; xx < OW; ++xx)
        out[(bc * OH + y) * OW + xx] = x[(bc * H + y / factor) * W + xx / factor];
  return make_result({B, C, OH, OW}, std::move(out), {input},
                     [=](std::span<const double> g, std::span<const double>, std::vector<std::span<double>>& grads) {
                       for (std::size_t bc = 0; bc < B * C; ++bc)
                         for (std::size_t y = 0; y < OH; ++y)
                           for (std::size_t xx = 0; xx < OW; ++xx)
                             grads[0][(bc * H + y / factor) * W + xx / factor] += g[(bc * OH + y) * OW + xx];
                     });
}

namespace {
void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + " expects [B,K], got " + to_string(t.shape()));
}
}  // namespace

Tensor softmax(const Tensor& logits) {
  require_rank2(logits, "softmax");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  auto x = logits.data();
  std::vector<double> out(B * K);
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = x.data() + b * K;
    const double m = *std::max_element(row, row + K);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += (out[b * K + k] = std::exp(row[k] - m));
    for (std::size_t k = 0; k < K; ++k) out[b * K + k] /= z;
  }
  return make_result({B, K}, std::move(out), {logits},
                     [B, K](std::span<const double> g, std::span<const double> y, std::vector<std::span<double>>& grads) {
                       for (std::size_t b = 0; b < B; ++b) {
                         double dot = 0.0;
                         for (std::size_t k = 0; k < K; ++k) dot += g[b * K + k] * y[b * K + k];
                         for (std::size_t k = 0; k < K; ++k) grads[0][b * K + k] += y[b * K + k] * (g[b * K + k] - dot);
                       }
                     });
}

Tensor log_softmax(const Tensor& logits) {
  require_rank2(logits, "log_softmax");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  auto x = logits.data();
  std::vector<double> out(B * K);
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = x.data() + b * K;
    const double m = *std::max_element(row, row + K);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - m);
    const double lz = m + std::log(z);
    for (std::size_t k = 0; k < K; ++k) out[b * K + k] = row[k] - lz;
  }
  return make_result({B, K}, std::move(out), {logits},
                     [B, K](std::span<const double> g, std::span<const double> y, std::vector<std::span<double>>& grads) {
                       for (std::size_t b = 0; b < B; ++b) {
                         double gs = 0.0;
                         for (std::size_t k = 0; k < K; ++k) gs += g[b * K + k];
                         for (std::size_t k = 0; k < K; ++k)
                           grads[0][b * K + k] += g[b * K + k] - std::exp(y[b * K + k]) * gs;
                       }
                     });
}

Tensor linear(const Tensor& x, const Linear& layer) {
  require_rank2(x, "linear");
  const std::size_t B = x.dim(0), in = layer.in_features(), out_f = layer.out_features();
  if (x.dim(1) != in)
    throw ShapeError("linear expects " + std::to_string(in) + " input features, got " + to_string(x.shape()));
  std::vector<double> out(B * out_f);
  auto bias = layer.bias.data();
  for (std::size_t b = 0; b < B; ++b) std::copy(bias.begin(), bias.end(), out.begin() + static_cast<std::ptrdiff_t>(b * out_f));
  detail::gemm_nt(B, out_f, in, x.data().data(), layer.weight.data().data(), out.data());
  auto xi = x.impl();
  auto wi = layer.weight.impl();
  return make_result({B, out_f}, std::move(out), {x, layer.weight, layer.bias},
                     [xi, wi, B, in, out_f](std::span<const double> g, std::span<const double>,
                                            std::vector<std::span<double>>& grads) {
                       if (!grads[0].empty()) detail::gemm_nn(B, in, out_f, g.data(), wi->data.data(), grads[0].data());
                       if (!grads[1].empty()) detail::gemm_tn(out_f, in, B, g.data(), xi->data.data(), grads[1].data());
                       if (!grads[2].empty())
                         for (std::size_t b = 0; b < B; ++b)
                           for (std::size_t o = 0; o < out_f; ++o) grads[2][o] += g[b * out_f + o];
                     });
}

Tensor flatten(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("flatten expects a batch dimension, got " + to_string(x.shape()));
  return reshape(x, {x.dim(0), x.numel() / x.dim(0)});
}

}  // namespace insul
