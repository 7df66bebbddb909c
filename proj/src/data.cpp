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

#include "insul/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "insul/error.hpp"
#include "insul/metrics.hpp"

namespace insul {

namespace {

constexpr std::string_view kHeader = "image,mask,label,split";

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

[[noreturn]] void malformed(const fs::path& path, std::size_t line, const std::string& why) {
  throw FormatError(path.string() + ":" + std::to_string(line) + ": malformed row: " + why);
}

fs::path relative_to(const fs::path& p, const fs::path& dir) {
  if (dir.empty()) return p;
  auto rel = p.lexically_relative(dir);
  return rel.empty() ? p : rel;
}

}  // namespace

std::string_view to_string(Split s) { return s == Split::train ? "train" : "val"; }

std::vector<Sample> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  const fs::path dir = path.parent_path();
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty manifest, expected header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader)
    throw FormatError(path.string() + ":1: expected header '" + std::string(kHeader) + "', found '" + line + "'");

  std::vector<Sample> samples;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_cells(line);
    if (cells.size() != 4) malformed(path, lineno, "expected 4 cells, found " + std::to_string(cells.size()));
    Sample s;
    if (cells[0].empty()) malformed(path, lineno, "image path is empty");
    s.image = dir / cells[0];
    if (!cells[1].empty()) s.mask = dir / cells[1];
    if (!cells[2].empty()) {
      int label = -1;
      const auto* end = cells[2].data() + cells[2].size();
      const auto [ptr, ec] = std::from_chars(cells[2].data(), end, label);
      if (ec != std::errc{} || ptr != end || label < 0 || label >= kNumClasses)
        malformed(path, lineno, "label '" + cells[2] + "' is not one of 0, 1, 2, 3");
      s.label = label;
    }
    if (cells[3] == "train")
      s.split = Split::train;
    else if (cells[3] == "val")
      s.split = Split::val;
    else
      malformed(path, lineno, "split '" + cells[3] + "' is not train or val");

    if (!fs::exists(s.image))
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": image '" + s.image.string() + "' does not exist");
    if (s.mask && !fs::exists(*s.mask))
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": mask '" + s.mask->string() + "' does not exist");
    samples.push_back(std::move(s));
  }
  return samples;
}

void write_manifest(const fs::path& path, std::span<const Sample> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  const fs::path dir = path.parent_path();
  out << kHeader << '\n';
  for (const auto& s : samples) {
    out << relative_to(s.image, dir).generic_string() << ',';
    if (s.mask) out << relative_to(*s.mask, dir).generic_string();
    out << ',';
    if (s.label) out << *s.label;
    out << ',' << to_string(s.split) << '\n';
  }
  if (!out) throw IoError("error writing manifest '" + path.string() + "'");
}

std::vector<Sample> select(std::span<const Sample> samples, Split split) {
  std::vector<Sample> out;
  for (const auto& s : samples)
    if (s.split == split) out.push_back(s);
  return out;
}

Tensor to_tensor(const Image& image, Dtype dtype) {
  const std::size_t hw = image.width * image.height;
  std::vector<double> v(3 * hw);
  for (std::size_t i = 0; i < hw; ++i)
    for (std::size_t c = 0; c < 3; ++c) v[c * hw + i] = image.pixels[i * 3 + c] / 255.0;
  return Tensor::from_data({3, image.height, image.width}, std::move(v), dtype);
}

Image from_tensor(const Tensor& t) {
  if (t.rank() != 3 || t.shape()[0] != 3) throw ShapeError("from_tensor expects [3, H, W], got " + to_string(t.shape()));
  const std::size_t h = t.shape()[1], w = t.shape()[2], hw = h * w;
  Image im(w, h);
  const auto d = t.data();
  for (std::size_t i = 0; i < hw; ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::floor(d[c * hw + i] * 255.0 + 0.5);
      im.pixels[i * 3 + c] = static_cast<std::uint8_t>(v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v));
    }
  return im;
}

Tensor mask_to_tensor(const Mask& mask, Dtype dtype) {
  std::vector<double> v(mask.bits.begin(), mask.bits.end());
  return Tensor::from_data({1, mask.height, mask.width}, std::move(v), dtype);
}

Tensor stack_images(std::span<const Image> images, Dtype dtype) {
  if (images.empty()) throw ShapeError("cannot stack an empty list of images");
  const std::size_t w = images[0].width, h = images[0].height, hw = w * h;
  std::vector<double> v(images.size() * 3 * hw);
  for (std::size_t b = 0; b < images.size(); ++b) {
    const auto& im = images[b];
    if (im.width != w || im.height != h) throw ShapeError("images in a batch must share one size");
    double* dst = v.data() + b * 3 * hw;
    for (std::size_t i = 0; i < hw; ++i)
      for (std::size_t c = 0; c < 3; ++c) dst[c * hw + i] = im.pixels[i * 3 + c] / 255.0;
  }
  return Tensor::from_data({images.size(), 3, h, w}, std::move(v), dtype);
}

Tensor stack_masks(std::span<const Mask> masks, Dtype dtype) {
  if (masks.empty()) throw ShapeError("cannot stack an empty list of masks");
  const std::size_t w = masks[0].width, h = masks[0].height;
  std::vector<double> v;
  v.reserve(masks.size() * w * h);
  for (const auto& m : masks) {
    if (m.width != w || m.height != h) throw ShapeError("masks in a batch must share one size");
    v.insert(v.end(), m.bits.begin(), m.bits.end());
  }
  return Tensor::from_data({masks.size(), 1, h, w}, std::move(v), dtype);
}

std::vector<Example> load_examples(std::span<const Sample> samples) {
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    Example e;
    e.image = read_image(s.image);
    if (s.mask) {
      e.mask = read_mask(*s.mask);
      if (e.mask->width != e.image.width || e.mask->height != e.image.height)
        throw ShapeError("mask '" + s.mask->string() + "' does not match its image size");
    }
    e.label = s.label.value_or(-1);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace insul
