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
#include <string>
#include <string_view>
#include <vector>

#include "insul/image.hpp"
#include "insul/prng.hpp"

namespace insul::augment {

enum class Kind {
  vertical_flip,
  horizontal_flip,
  elastic,
  grid_distortion,
  optical_distortion,
  transpose,
  random_rotate90,
  clahe,
  random_brightness,
  random_contrast,
  random_gamma,
};

/// Names as they appear in config files: "VerticalFlip", "CLAHE", ...
std::string_view to_string(Kind kind);
/// Throws ValueError for an unknown name.
Kind parse_kind(std::string_view name);
bool is_geometric(Kind kind);

/// Parameters for one transform. Only the fields relevant to the kind are
/// read. Ranges are sampled uniformly per application.
struct Params {
  double lo = 0.0;  // brightness beta, contrast alpha, gamma, optical k1
  double hi = 0.0;
  double alpha = 0.0;  // elastic magnitude in pixels
  double sigma = 8.0;  // elastic smoothing
  int cells = 5;       // grid distortion cells per axis
  double limit = 0.0;  // grid distortion step scaling bound
  double clip_limit = 2.0;
  int tiles = 8;
};

/// Default parameter ranges for each kind.
Params default_params(Kind kind);

struct Transform {
  Kind kind;
  double p;
  Params params;
};

struct Spec {
  std::vector<Transform> transforms;

  /// Throws ValueError when a probability or range is invalid.
  void validate() const;
};

/// The eleven transforms in table order with their published probabilities.
/// Transpose has no published probability and uses 0.5.
Spec default_spec();
/// Dihedral and photometric transforms only.
Spec coarse_spec();

struct AugmentedPair {
  Image image;
  std::optional<Mask> mask;
  std::vector<std::string> applied;
};

/// Runs every transform of `spec` in order. Each fires independently with its
/// probability. Randomness comes from Prng(Prng::derive(seed, sample_index)),
/// so the result depends only on the inputs.
AugmentedPair apply_pipeline(const Image& image, const std::optional<Mask>& mask, const Spec& spec,
                             std::uint64_t seed, std::uint64_t sample_index = 0);

// Dihedral transforms. rot90 turns counter-clockwise k quarter turns.
Image hflip(const Image& im);
Image vflip(const Image& im);
Image transpose(const Image& im);
Image rot90(const Image& im, int k);
Mask hflip(const Mask& m);
Mask vflip(const Mask& m);
Mask transpose(const Mask& m);
Mask rot90(const Mask& m, int k);

// Photometric transforms, applied per channel with rounding and clipping.
Image brightness(const Image& im, double beta);
Image contrast(const Image& im, double alpha);
Image gamma(const Image& im, double g);

/// Contrast-limited adaptive histogram equalization on luminance. The change
/// in luminance is added to every channel. Falls back to one tile when the
/// image is smaller than the grid.
Image clahe(const Image& im, double clip_limit = 2.0, int tiles = 8);

/// Source coordinates for every output pixel of a warp.
struct WarpField {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> sx;
  std::vector<double> sy;

  static WarpField identity(std::size_t w, std::size_t h);
};

/// Displacements drawn uniformly in [-1, 1], smoothed with a Gaussian of the
/// given sigma, rescaled so the largest component is exactly alpha.
WarpField elastic_field(std::size_t w, std::size_t h, double alpha, double sigma, Prng& rng);
/// Each of `cells` column and row bands has its width scaled by a factor in
/// [1 - limit, 1 + limit]; band edges are renormalized to span the image.
WarpField grid_field(std::size_t w, std::size_t h, int cells, double limit, Prng& rng);
/// Radial distortion about the centre in coordinates normalized by the
/// half-diagonal: r' = r (1 + k1 r^2).
WarpField optical_field(std::size_t w, std::size_t h, double k1);

/// Bilinear sampling, out-of-range coordinates reflected back into the image.
Image warp(const Image& im, const WarpField& field);
/// Nearest-neighbour sampling; keeps the mask binary.
Mask warp(const Mask& m, const WarpField& field);

}  // namespace insul::augment
