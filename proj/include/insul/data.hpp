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

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "insul/image.hpp"
#include "insul/tensor.hpp"

namespace insul {

namespace fs = std::filesystem;

enum class Split { train, val };

std::string_view to_string(Split s);

/// One manifest row. Paths are resolved against the manifest's directory when
/// loaded and written relative to it when saved.
struct Sample {
  fs::path image;
  std::optional<fs::path> mask;
  std::optional<int> label;
  Split split = Split::train;

  bool operator==(const Sample&) const = default;
};

/// Reads a manifest CSV with header `image,mask,label,split`. Empty mask or
/// label cells mean absent. Throws FormatError (with line number) on a
/// malformed row and IoError when a referenced file does not exist.
std::vector<Sample> load_manifest(const fs::path& path);
void write_manifest(const fs::path& path, std::span<const Sample> samples);

/// Samples of one split.
std::vector<Sample> select(std::span<const Sample> samples, Split split);

// PNG I/O. Images are stored as 8-bit RGB, masks as 8-bit grayscale 0/255.
Image read_image(const fs::path& path);
void write_image(const fs::path& path, const Image& image);
/// Pixels >= 128 become 1. Emits a warning if any value is neither 0 nor 255.
Mask read_mask(const fs::path& path);
void write_mask(const fs::path& path, const Mask& mask);

/// [3, H, W] with values v / 255.
Tensor to_tensor(const Image& image, Dtype dtype = Dtype::f32);
/// Inverse of to_tensor: v * 255 rounded half up, clipped to [0, 255].
Image from_tensor(const Tensor& t);
/// [1, H, W] of 0/1 values.
Tensor mask_to_tensor(const Mask& mask, Dtype dtype = Dtype::f32);

/// Stacks images into [B, 3, H, W]. All images must share a size.
Tensor stack_images(std::span<const Image> images, Dtype dtype = Dtype::f32);
/// Stacks masks into [B, 1, H, W].
Tensor stack_masks(std::span<const Mask> masks, Dtype dtype = Dtype::f32);

/// A sample loaded into memory.
struct Example {
  Image image;
  std::optional<Mask> mask;
  int label = -1;
};

/// Reads the image (and mask, when present) of every sample.
std::vector<Example> load_examples(std::span<const Sample> samples);

}  // namespace insul
