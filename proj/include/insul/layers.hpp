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

#include <cstddef>
#include <cstdint>
#include <string>

#include "insul/prng.hpp"
#include "insul/tensor.hpp"

namespace insul {

/// 2-D convolution parameters. weight is [out_ch, in_ch, kh, kw], bias [out_ch].
struct Conv2d {
  Tensor weight;
  Tensor bias;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t kernel_h() const { return weight.dim(2); }
  std::size_t kernel_w() const { return weight.dim(3); }
};

/// Fully connected layer: y = x W^T + b with weight [out, in], bias [out].
struct Linear {
  Tensor weight;
  Tensor bias;

  std::size_t out_features() const { return weight.dim(0); }
  std::size_t in_features() const { return weight.dim(1); }
};

enum class InitScheme { he_normal, xavier_uniform, zeros, constant };

struct InitSpec {
  InitScheme scheme = InitScheme::he_normal;
  double value = 0.0;  // used by InitScheme::constant
  std::uint64_t seed = 0;
};

std::string to_string(InitScheme scheme);
InitScheme parse_init_scheme(const std::string& name);

/// Draws a parameter tensor. Fan-in is prod(shape[1:]), fan-out is
/// shape[0] * prod(shape[2:]). he-normal samples N(0, sqrt(2/fan_in)),
/// xavier-uniform samples U(-a, a) with a = sqrt(6/(fan_in+fan_out)).
Tensor init_params(const Shape& shape, InitScheme scheme, double value, Prng& rng, Dtype dtype = Dtype::f32);
/// Same, with a generator seeded from spec.seed.
Tensor init_params(const Shape& shape, const InitSpec& spec, Dtype dtype = Dtype::f32);

/// Weight drawn by `scheme` from `rng`, bias zero, both requiring gradients.
Conv2d make_conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride, std::size_t padding,
                   InitScheme scheme, Prng& rng, Dtype dtype = Dtype::f32);
Linear make_linear(std::size_t in, std::size_t out, InitScheme scheme, Prng& rng, Dtype dtype = Dtype::f32);

std::size_t conv_output_size(std::size_t input, std::size_t kernel, std::size_t stride, std::size_t padding);

/// Cross-correlation (the kernel is not flipped) plus bias.
/// input [B,C,H,W] -> [B,out_ch,H',W'] with H' = (H + 2p - kh)/stride + 1.
/// Lowered to im2col + matrix product per batch element.
Tensor conv2d(const Tensor& input, const Conv2d& layer);

/// Per-window maximum. Ties route the gradient to the first element in
/// row-major window order.
Tensor maxpool2d(const Tensor& input, std::size_t window, std::size_t stride);
Tensor avgpool2d(const Tensor& input, std::size_t window, std::size_t stride);

/// Replicates each pixel factor x factor times.
Tensor upsample_nearest(const Tensor& input, std::size_t factor);

/// Row-wise softmax of [B,K] logits with max subtraction.
Tensor softmax(const Tensor& logits);
Tensor log_softmax(const Tensor& logits);

/// x [B,in] -> [B,out]
Tensor linear(const Tensor& x, const Linear& layer);

/// [B, ...] -> [B, prod(...)]
Tensor flatten(const Tensor& x);

}  // namespace insul
