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

// Two-stage inference: segment, threshold, compose, classify.

#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "insul/data.hpp"
#include "insul/image.hpp"
#include "insul/metrics.hpp"
#include "insul/models.hpp"

namespace insul {

struct PipelineConfig {
  double threshold = 0.5;
  std::filesystem::path segmenter;   // UNet-lite checkpoint
  std::filesystem::path classifier;  // VGG-lite checkpoint

  /// Throws ValueError when the threshold lies outside [0, 1].
  void validate() const;
};

struct Prediction {
  Mask mask;
  Image composed;
  int label = 0;
  std::array<double, kNumClasses> probabilities{};

  bool operator==(const Prediction&) const = default;
};

/// Pixel is 1 iff prob >= p. Accepts [H,W], [1,H,W] or [1,1,H,W].
Mask threshold_mask(const Tensor& probs, double p);

/// image * mask per channel; background pixels become exactly 0.
Image compose_mask(const Image& image, const Mask& mask);
/// Same on a [3,H,W] tensor.
Tensor compose_mask(const Tensor& image, const Mask& mask);

/// UNet probabilities per image, each [1,H,W]. Runs without recording a graph.
std::vector<Tensor> segment_probabilities(const UNetLite& unet, std::span<const Image> images,
                                          std::size_t batch_size = 8);
/// Softmax class probabilities per image (computed in 64-bit from the logits).
std::vector<std::array<double, kNumClasses>> classify_probabilities(const VggLite& vgg, std::span<const Image> images,
                                                                    std::size_t batch_size = 8);
/// First index of the largest probability.
int argmax(const std::array<double, kNumClasses>& probs);

class Pipeline {
 public:
  Pipeline(UNetLite segmenter, VggLite classifier, double threshold = 0.5);
  /// Loads both checkpoints. Propagates IoError, CorruptFileError and
  /// ArchitectureMismatch.
  static Pipeline load(const PipelineConfig& cfg);

  Prediction predict(const Image& image) const;
  std::vector<Prediction> predict_batch(std::span<const Image> images, std::size_t batch_size = 8) const;
  /// Classifies image * mask with a caller-supplied mask, skipping the segmenter.
  Prediction classify_with_mask(const Image& image, const Mask& mask) const;

  const UNetLite& segmenter() const { return unet_; }
  const VggLite& classifier() const { return vgg_; }
  double threshold() const { return threshold_; }

 private:
  UNetLite unet_;
  VggLite vgg_;
  double threshold_;
};

/// Single-line JSON record: image, class, class_name, probabilities, mask_area_fraction.
std::string to_record(const Prediction& prediction, const std::string& image_id);

struct SweepPoint {
  double p = 0.0;
  double mean_iou = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  double best_p = 0.0;  // first grid value reaching the maximum mean IoU
  double best_iou = 0.0;
};

/// Mean IoU of thresholded `probs` against `truths` for each grid value.
/// Throws ValueError on an empty grid or a grid value outside [0, 1].
SweepResult sweep_threshold(std::span<const Tensor> probs, std::span<const Mask> truths, std::span<const double> grid);
/// Runs the segmenter once over `examples` (all need masks) and sweeps.
SweepResult sweep_threshold(const UNetLite& unet, std::span<const Example> examples, std::span<const double> grid,
                            std::size_t batch_size = 8);

/// CSV with header `p,mean_iou`.
std::string to_csv(const SweepResult& result);

/// Parses "start:stop:step" (stop included when reached) or a
/// comma-separated list. Throws ValueError.
std::vector<double> parse_grid(const std::string& text);

}  // namespace insul
