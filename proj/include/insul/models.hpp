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
#include <string>
#include <utility>
#include <vector>

#include "insul/layers.hpp"
#include "insul/tensor.hpp"

namespace insul {

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// A network with a fixed, named parameter list. Parameters are shared
/// handles: writing through them changes the model.
class Model {
 public:
  virtual ~Model() = default;

  /// One-line architecture echo, e.g. "unet-lite depth=3 base=16 in=3 height=128 width=128".
  virtual std::string descriptor() const = 0;
  virtual Tensor forward(const Tensor& batch) const = 0;

  const std::vector<NamedTensor>& named_parameters() const { return params_; }
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;
  Dtype dtype() const { return dtype_; }

  /// Copies every parameter value. restore() writes a snapshot back.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 protected:
  Conv2d add_conv(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel, std::size_t padding,
                  InitScheme scheme, Prng& rng);
  Linear add_linear(const std::string& name, std::size_t in, std::size_t out, InitScheme scheme, Prng& rng);
  void require_input(const Tensor& batch, std::size_t channels, std::size_t height, std::size_t width) const;

  std::vector<NamedTensor> params_;
  Dtype dtype_ = Dtype::f32;
  double init_value_ = 0.0;  // weight value under InitScheme::constant
};

struct UNetConfig {
  int depth = 3;
  int base_channels = 16;
  int in_channels = 3;
  int height = 128;
  int width = 128;

  /// Throws ValueError for non-positive sizes and ShapeError when height or
  /// width is not divisible by 2^depth.
  void validate() const;
  std::string descriptor() const;
};

/// Encoder levels of two 3x3 conv + ReLU followed by 2x2 max-pooling, a
/// bottleneck of two convs at base * 2^depth channels, decoder levels of
/// nearest upsampling, concatenation with the matching encoder output and
/// two convs, and a 1x1 conv with sigmoid. Output [B,1,H,W] in (0,1).
/// Both networks take pixels in [0, 1] and rescale them to [-1, 1].
class UNetLite : public Model {
 public:
  UNetLite(const UNetConfig& cfg, const InitSpec& init, Dtype dtype = Dtype::f32);
  std::string descriptor() const override { return cfg_.descriptor(); }
  Tensor forward(const Tensor& batch) const override;
  const UNetConfig& config() const { return cfg_; }

 private:
  struct Block {
    Conv2d a, b;
  };
  UNetConfig cfg_;
  std::vector<Block> encoder_;
  Block bottleneck_;
  std::vector<Block> decoder_;  // decoder_[l] pairs with encoder_[l]
  Conv2d head_;
};

struct VggConfig {
  std::vector<std::pair<int, int>> blocks = {{16, 2}, {32, 2}, {64, 2}};  // (channels, convs)
  int hidden = 64;
  int in_channels = 3;
  int height = 128;
  int width = 128;

  void validate() const;
  std::string descriptor() const;
};

/// Blocks of 3x3 conv + ReLU followed by 2x2 max-pooling, then
/// flatten -> linear -> ReLU -> linear to four logits.
class VggLite : public Model {
 public:
  static constexpr std::size_t kClasses = 4;

  VggLite(const VggConfig& cfg, const InitSpec& init, Dtype dtype = Dtype::f32);
  std::string descriptor() const override { return cfg_.descriptor(); }
  /// [B,3,H,W] -> logits [B,4].
  Tensor forward(const Tensor& batch) const override;
  const VggConfig& config() const { return cfg_; }

 private:
  VggConfig cfg_;
  std::vector<std::vector<Conv2d>> blocks_;
  Linear fc1_, fc2_;
};

/// Parses a descriptor produced by UNetConfig/VggConfig::descriptor().
/// Throws ArchitectureMismatch when the descriptor names the other network
/// and FormatError when it cannot be parsed.
UNetConfig parse_unet_descriptor(const std::string& descriptor);
VggConfig parse_vgg_descriptor(const std::string& descriptor);

}  // namespace insul
