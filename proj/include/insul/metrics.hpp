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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "insul/image.hpp"

namespace insul {

/// Insulator condition classes.
inline constexpr int kNumClasses = 4;
enum class Defect : int { healthy = 0, broken = 1, burned = 2, missing_cap = 3 };
const char* class_name(int label);

/// Pixel intersection over union TP / (TP + FP + FN). Two empty masks score
/// 1.0 (the ratio is 0/0 there).
double iou(const Mask& pred, const Mask& truth);

/// Fraction of positions where preds == truths. Throws on empty input.
double accuracy(std::span<const int> preds, std::span<const int> truths);

/// counts[truth][pred].
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> counts{};

  std::int64_t total() const;
  std::int64_t trace() const;
  std::int64_t support(int cls) const;  // row sum
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion_from_pairs(std::span<const int> preds, std::span<const int> truths);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
};

/// Per-class precision, recall and F1; each is 0 when its denominator is 0.
std::array<ClassScores, kNumClasses> per_class_prf(const ConfusionMatrix& cm);

struct MetricsReport {
  std::vector<double> iou_per_image;
  double mean_iou = 0.0;
  double accuracy = 0.0;
  std::array<ClassScores, kNumClasses> per_class{};
  ConfusionMatrix confusion;
  bool has_segmentation = false;
  bool has_classification = false;
};

MetricsReport classification_report(std::span<const int> preds, std::span<const int> truths);
MetricsReport segmentation_report(std::vector<double> iou_per_image);

/// CSV with header `class,precision,recall,f1,support`: one row per class
/// (0..3) and a final `macro` row holding unweighted means and total support.
std::string to_csv(const MetricsReport& report);
/// Human-readable summary block.
std::string to_text(const MetricsReport& report);

}  // namespace insul
