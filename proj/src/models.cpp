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

#include "insul/models.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

#include "insul/error.hpp"

namespace insul {

namespace {

Tensor draw(const Shape& shape, InitScheme scheme, double value, Prng& rng, Dtype dtype) {
  Tensor t = init_params(shape, scheme, value, rng, dtype);
  t.set_requires_grad(true);
  return t;
}

Tensor conv_relu(const Tensor& x, const Conv2d& c) { return relu(conv2d(x, c)); }

// Pixel values arrive in [0, 1]; both networks see them in [-1, 1].
Tensor center(const Tensor& x) { return add_scalar(scale(x, 2.0), -1.0); }

std::map<std::string, std::string> parse_fields(const std::string& descriptor, const std::string& kind) {
  std::istringstream in(descriptor);
  std::string head;
  in >> head;
  if (head != kind) throw ArchitectureMismatch(kind, descriptor);
  std::map<std::string, std::string> fields;
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw FormatError("bad descriptor field '" + token + "' in '" + descriptor + "'");
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return fields;
}

int parse_int(const std::map<std::string, std::string>& fields, const std::string& key, const std::string& descriptor) {
  const auto it = fields.find(key);
  if (it == fields.end()) throw FormatError("descriptor '" + descriptor + "' lacks '" + key + "'");
  int v = 0;
  const auto* end = it->second.data() + it->second.size();
  const auto [ptr, ec] = std::from_chars(it->second.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw FormatError("bad value for '" + key + "' in '" + descriptor + "'");
  return v;
}

}  // namespace

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

std::vector<std::vector<double>> Model::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value.to_vector());
  return out;
}

void Model::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) throw ShapeError("snapshot has a different number of parameters");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = params_[i].value.mutable_data();
    if (values[i].size() != dst.size()) throw ShapeError("snapshot size mismatch for " + params_[i].name);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

Conv2d Model::add_conv(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
                       std::size_t padding, InitScheme scheme, Prng& rng) {
  Conv2d c;
  c.weight = draw({out, in, kernel, kernel}, scheme, init_value_, rng, dtype_);
  c.bias = Tensor::zeros({out}, dtype_, true);
  c.padding = padding;
  params_.push_back({name + ".weight", c.weight});
  params_.push_back({name + ".bias", c.bias});
  return c;
}

Linear Model::add_linear(const std::string& name, std::size_t in, std::size_t out, InitScheme scheme, Prng& rng) {
  Linear l;
  l.weight = draw({out, in}, scheme, init_value_, rng, dtype_);
  l.bias = Tensor::zeros({out}, dtype_, true);
  params_.push_back({name + ".weight", l.weight});
  params_.push_back({name + ".bias", l.bias});
  return l;
}

void Model::require_input(const Tensor& batch, std::size_t channels, std::size_t height, std::size_t width) const {
  const auto& s = batch.shape();
  if (s.size() != 4 || s[1] != channels || s[2] != height || s[3] != width)
    throw ShapeError(descriptor() + " expects input [B," + std::to_string(channels) + "," + std::to_string(height) +
                     "," + std::to_string(width) + "], got " + to_string(s));
}

void UNetConfig::validate() const {
  if (depth < 1 || base_channels < 1 || in_channels < 1 || height < 1 || width < 1)
    throw ValueError("unet-lite sizes must be positive");
  const int f = 1 << depth;
  if (height % f != 0 || width % f != 0)
    throw ShapeError("unet-lite input " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by 2^depth = " + std::to_string(f));
}

std::string UNetConfig::descriptor() const {
  return "unet-lite depth=" + std::to_string(depth) + " base=" + std::to_string(base_channels) +
         " in=" + std::to_string(in_channels) + " height=" + std::to_string(height) + " width=" + std::to_string(width);
}

UNetLite::UNetLite(const UNetConfig& cfg, const InitSpec& init, Dtype dtype) : cfg_(cfg) {
  cfg.validate();
  dtype_ = dtype;
  init_value_ = init.value;
  Prng rng(init.seed);
  const auto scheme = init.scheme;
  auto block = [&](const std::string& name, std::size_t in, std::size_t out) {
    Block b;
    b.a = add_conv(name + ".conv0", in, out, 3, 1, scheme, rng);
    b.b = add_conv(name + ".conv1", out, out, 3, 1, scheme, rng);
    return b;
  };
  const auto base = static_cast<std::size_t>(cfg.base_channels);
  const auto depth = static_cast<std::size_t>(cfg.depth);
  std::size_t in = static_cast<std::size_t>(cfg.in_channels);
  for (std::size_t l = 0; l < depth; ++l) {
    encoder_.push_back(block("enc" + std::to_string(l), in, base << l));
    in = base << l;
  }
  bottleneck_ = block("bottleneck", in, base << depth);
  decoder_.resize(depth);
  for (std::size_t l = depth; l-- > 0;)
    decoder_[l] = block("dec" + std::to_string(l), (base << (l + 1)) + (base << l), base << l);
  head_ = add_conv("head", base, 1, 1, 0, scheme, rng);
}

Tensor UNetLite::forward(const Tensor& batch) const {
  require_input(batch, static_cast<std::size_t>(cfg_.in_channels), static_cast<std::size_t>(cfg_.height),
                static_cast<std::size_t>(cfg_.width));
  std::vector<Tensor> skips;
  Tensor x = center(batch);
  for (const auto& b : encoder_) {
    x = conv_relu(conv_relu(x, b.a), b.b);
    skips.push_back(x);
    x = maxpool2d(x, 2, 2);
  }
  x = conv_relu(conv_relu(x, bottleneck_.a), bottleneck_.b);
  for (std::size_t l = decoder_.size(); l-- > 0;) {
    x = concat({upsample_nearest(x, 2), skips[l]}, 1);
    x = conv_relu(conv_relu(x, decoder_[l].a), decoder_[l].b);
  }
  return sigmoid(conv2d(x, head_));
}

void VggConfig::validate() const {
  if (blocks.empty()) throw ValueError("vgg-lite needs at least one block");
  for (const auto& [ch, n] : blocks)
    if (ch < 1 || n < 1) throw ValueError("vgg-lite block channels and conv counts must be positive");
  if (hidden < 1 || in_channels < 1 || height < 1 || width < 1) throw ValueError("vgg-lite sizes must be positive");
  const int f = 1 << blocks.size();
  if (height % f != 0 || width % f != 0)
    throw ShapeError("vgg-lite input " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by 2^blocks = " + std::to_string(f));
}

std::string VggConfig::descriptor() const {
  std::string s = "vgg-lite blocks=";
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(blocks[i].first) + "x" + std::to_string(blocks[i].second);
  }
  return s + " hidden=" + std::to_string(hidden) + " in=" + std::to_string(in_channels) +
         " height=" + std::to_string(height) + " width=" + std::to_string(width);
}

VggLite::VggLite(const VggConfig& cfg, const InitSpec& init, Dtype dtype) : cfg_(cfg) {
  cfg.validate();
  dtype_ = dtype;
  init_value_ = init.value;
  Prng rng(init.seed);
  std::size_t in = static_cast<std::size_t>(cfg.in_channels);
  for (std::size_t b = 0; b < cfg.blocks.size(); ++b) {
    std::vector<Conv2d> convs;
    const auto out = static_cast<std::size_t>(cfg.blocks[b].first);
    for (int c = 0; c < cfg.blocks[b].second; ++c) {
      convs.push_back(add_conv("block" + std::to_string(b) + ".conv" + std::to_string(c), in, out, 3, 1, init.scheme, rng));
      in = out;
    }
    blocks_.push_back(std::move(convs));
  }
  const std::size_t shrink = std::size_t{1} << cfg.blocks.size();
  const std::size_t flat = in * (static_cast<std::size_t>(cfg.height) / shrink) * (static_cast<std::size_t>(cfg.width) / shrink);
  fc1_ = add_linear("fc1", flat, static_cast<std::size_t>(cfg.hidden), init.scheme, rng);
  fc2_ = add_linear("fc2", static_cast<std::size_t>(cfg.hidden), kClasses, init.scheme, rng);
}

Tensor VggLite::forward(const Tensor& batch) const {
  require_input(batch, static_cast<std::size_t>(cfg_.in_channels), static_cast<std::size_t>(cfg_.height),
                static_cast<std::size_t>(cfg_.width));
  Tensor x = center(batch);
  for (const auto& convs : blocks_) {
    for (const auto& c : convs) x = conv_relu(x, c);
    x = maxpool2d(x, 2, 2);
  }
  return linear(relu(linear(flatten(x), fc1_)), fc2_);
}

UNetConfig parse_unet_descriptor(const std::string& descriptor) {
  const auto f = parse_fields(descriptor, "unet-lite");
  UNetConfig c;
  c.depth = parse_int(f, "depth", descriptor);
  c.base_channels = parse_int(f, "base", descriptor);
  c.in_channels = parse_int(f, "in", descriptor);
  c.height = parse_int(f, "height", descriptor);
  c.width = parse_int(f, "width", descriptor);
  return c;
}

VggConfig parse_vgg_descriptor(const std::string& descriptor) {
  const auto f = parse_fields(descriptor, "vgg-lite");
  VggConfig c;
  c.hidden = parse_int(f, "hidden", descriptor);
  c.in_channels = parse_int(f, "in", descriptor);
  c.height = parse_int(f, "height", descriptor);
  c.width = parse_int(f, "width", descriptor);
  const auto it = f.find("blocks");
  if (it == f.end()) throw FormatError("descriptor '" + descriptor + "' lacks 'blocks'");
  c.blocks.clear();
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto x = item.find('x');
    int ch = 0, n = 0;
    if (x == std::string::npos ||
        std::from_chars(item.data(), item.data() + x, ch).ptr != item.data() + x ||
        std::from_chars(item.data() + x + 1, item.data() + item.size(), n).ptr != item.data() + item.size())
      throw FormatError("bad block '" + item + "' in '" + descriptor + "'");
    c.blocks.emplace_back(ch, n);
  }
  return c;
}

}  // namespace insul
