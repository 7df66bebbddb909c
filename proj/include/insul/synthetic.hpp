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

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "insul/data.hpp"
#include "insul/image.hpp"
#include "insul/metrics.hpp"

namespace insul::synth {

enum class Background { gradient, noise, clutter };

std::string_view to_string(Background b);

/// Geometry is given relative to min(width, height) so one spec renders
/// similar scenes at any resolution.
struct SceneSpec {
  std::size_t width = 128;
  std::size_t height = 128;
  int min_caps = 6;
  int max_caps = 12;
  double cap_radius = 0.11;  // half-extent of a disc across the chain axis
  double rod_width = 0.025;
  std::optional<Background> background;  // drawn per scene when unset
  Defect defect = Defect::healthy;

  /// Throws ValueError on an impossible geometry.
  void validate() const;
};

/// A rendered disc-chain insulator. `mask` marks exactly the pixels painted
/// with insulator colours.
struct Scene {
  Image image;
  Mask mask;
  int label = 0;
  Background background = Background::gradient;
  int caps = 0;
};

Scene render_scene(const SceneSpec& spec, std::uint64_t seed);
/// Paints the insulator of `render_scene(spec, seed)` over a caller-supplied
/// background instead of a generated one. Geometry, colours and sensor noise
/// are drawn from streams independent of the background.
Scene render_scene(const SceneSpec& spec, std::uint64_t seed, const Image& backdrop);

/// Renders `per_class` scenes of each class, classes interleaved 0,1,2,3,0,...
/// Scene i uses seed Prng::derive(seed, first_index + i).
std::vector<Scene> render_balanced(const SceneSpec& spec, int per_class, std::uint64_t seed,
                                   std::uint64_t first_index = 0);

struct GenerateOptions {
  int train_per_class = 1;
  int val_per_class = 0;
  SceneSpec scene;
  std::uint64_t seed = 0;
};

/// Writes images/, masks/ and manifest.csv under `out_dir` and returns the
/// manifest rows. Identical options produce byte-identical trees.
std::vector<Sample> generate_dataset(const GenerateOptions& options, const fs::path& out_dir);

}  // namespace insul::synth
