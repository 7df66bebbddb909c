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

// Optimizer, scheduler, training loops and evaluation.
//
// One global step is one optimizer update on one batch. The scheduler
// multiplies the learning rate by its factor after every global step.
// Training is single-threaded, so a run is a pure function of its inputs,
// configuration and seed.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "insul/augment.hpp"
#include "insul/checkpoint.hpp"
#include "insul/data.hpp"
#include "insul/losses.hpp"
#include "insul/metrics.hpp"
#include "insul/models.hpp"
#include "insul/pipeline.hpp"

namespace insul {

// ---------------------------------------------------------------------------
// Optimizer

struct SgdConfig {
  double lr = 0.008;
  double momentum = 0.26;
  double factor = 0.98;  // per global step

  /// Throws ValueError unless lr > 0, momentum in [0,1) and factor in (0,1].
  void validate() const;
  bool operator==(const SgdConfig&) const = default;
};

/// Fresh state: lr = lr0, step 0, zero velocity shaped like `params`.
OptimizerState make_optimizer_state(const SgdConfig& cfg, const std::vector<Tensor>& params);

/// v <- momentum * v + g; theta <- theta - lr * v; gradients are zeroed.
/// Throws GradError when a parameter has no gradient.
void sgd_step(const std::vector<Tensor>& params, OptimizerState& state);

/// lr <- lr * factor; step <- step + 1. Returns the new lr.
double scheduler_step(OptimizerState& state);

// ---------------------------------------------------------------------------
// Logs

struct TrainLogRow {
  std::uint64_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_metric;

  bool operator==(const TrainLogRow&) const = default;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;  // one per global step
  std::optional<std::size_t> best_row;  // row holding the best validation event

  /// Index of rows that carry a validation event.
  std::vector<std::size_t> validation_rows() const;
  /// Header `step,lr,train_loss,val_loss,val_metric`; missing values are empty.
  std::string to_csv() const;
  bool operator==(const TrainLog&) const = default;
};

struct TrainResult {
  TrainLog log;
  std::vector<std::vector<double>> best_params;
  OptimizerState best_optimizer;  // optimizer state when the best parameters were recorded
  std::optional<double> best_metric;
};

// ---------------------------------------------------------------------------
// Segmentation

enum class SegLoss { weighted_bce, mse };
std::string to_string(SegLoss loss);
SegLoss parse_seg_loss(const std::string& name);

struct SegTrainConfig {
  SgdConfig sgd{0.05, 0.9, 0.998};
  int sequences = 2;
  int epochs_per_sequence = 10;
  std::size_t batch_size = 8;
  SegLoss loss = SegLoss::weighted_bce;
  BceWeights weights;
  double threshold = 0.5;  // validation IoU threshold
  augment::Spec first_augment = augment::coarse_spec();
  augment::Spec second_augment = augment::default_spec();
  std::uint64_t seed = 0;

  void validate() const;
};

struct SegTrainResult : TrainResult {
  std::vector<std::size_t> sequence_starts;  // first log row of each sequence
  /// Validation loss of the restored checkpoint at the start of each
  /// sequence after the first, and of the last epoch of the sequence before.
  std::vector<double> warm_start_val_loss;
  std::vector<double> previous_final_val_loss;
};

/// Trains with validation after every epoch and keeps the parameters with the
/// highest validation IoU (ties resolved by lower loss, then earlier step).
/// Each sequence after the first restarts the optimizer from the best
/// parameters so far and switches to `second_augment`. On return the model
/// holds the best parameters. An empty validation set logs a warning and the
/// last parameters are kept. Throws ValueError when a sample lacks a mask.
SegTrainResult train_segmentation(UNetLite& model, std::span<const Example> train, std::span<const Example> val,
                                  const SegTrainConfig& cfg);

// ---------------------------------------------------------------------------
// Classification

/// Image with the mask that the classifier sees it through.
struct MaskedExample {
  Image image;
  Mask mask;
  int label = -1;
};

enum class MaskSource { ground_truth, segmenter };

/// Pairs every example with its ground-truth mask or with the thresholded
/// segmenter output. Throws ValueError when labels (or, for ground truth,
/// masks) are missing.
std::vector<MaskedExample> masked_examples(std::span<const Example> examples, MaskSource source,
                                           const UNetLite* segmenter = nullptr, double threshold = 0.5,
                                           std::size_t batch_size = 8);

struct RegimeSpec {
  bool pretrained = false;
  bool reset = false;
  bool alternating = false;
  int outer_epochs = 3;
  int inner_epochs = 4;
  SgdConfig alternate{0.004, 0.5, 0.98};

  /// Throws ValueError for non-positive epoch counts or reset together with
  /// alternating.
  void validate() const;
  /// e.g. "pre,reset"; "none" when no flag is set.
  std::string flags() const;
};

/// Parses a comma-separated subset of {pre, reset, alt} (or "none").
RegimeSpec parse_regime_flags(const std::string& text, RegimeSpec base = {});

struct ClsTrainConfig {
  SgdConfig sgd;
  RegimeSpec regime;
  std::size_t batch_size = 8;
  augment::Spec augment = augment::coarse_spec();
  std::uint64_t seed = 0;

  void validate() const;
};

/// Nested outer/inner epoch loops with validation after every inner epoch
/// and best-accuracy retention (ties by lower loss, then earlier step).
/// After each completed inner loop: reset restores the optimizer to its
/// initial state; alternating switches between the primary and the
/// alternate optimizer, each keeping its own state. `init_from` is required
/// when the regime is pre-trained and must match the model (ArchitectureMismatch
/// otherwise). On return the model holds the best parameters.
TrainResult train_classifier(VggLite& model, std::span<const MaskedExample> train,
                             std::span<const MaskedExample> val, const ClsTrainConfig& cfg,
                             const Checkpoint* init_from = nullptr);

// ---------------------------------------------------------------------------
// Evaluation (read-only)

enum class EvalMode { segmentation, classification, end_to_end };
std::string to_string(EvalMode mode);
EvalMode parse_eval_mode(const std::string& name);

/// Per-image and mean IoU at `threshold`. Throws ValueError when a sample lacks a mask.
MetricsReport evaluate_segmentation(const UNetLite& model, std::span<const Example> data, double threshold = 0.5,
                                    std::size_t batch_size = 8);
/// Accuracy, per-class PRF and confusion of the classifier on already
/// composed images.
MetricsReport evaluate_classification(const VggLite& model, std::span<const Image> composed,
                                      std::span<const int> labels, std::size_t batch_size = 8);
/// Same on image * mask for each example.
MetricsReport evaluate_classification(const VggLite& model, std::span<const MaskedExample> data,
                                      std::size_t batch_size = 8);
/// Full pipeline on raw images. Throws ValueError when a sample lacks a label.
MetricsReport evaluate_end_to_end(const Pipeline& pipeline, std::span<const Example> data,
                                  std::size_t batch_size = 8);

// ---------------------------------------------------------------------------
// Regime grid

struct RegimeRow {
  std::string training;  // "1".."4", "separated" or "ground_truth"
  RegimeSpec regime;
  double accuracy = 0.0;
  TrainResult result;
};

struct RegimeGridConfig {
  ClsTrainConfig base;  // its regime supplies the epoch counts and alternate optimizer
  double threshold = 0.5;
};

/// The four regimes of the grid (pre / reset / alt flags):
///   1: pre        2: reset        3: pre + alt        4: pre + reset
/// plus "ground_truth" (trained and validated on ground-truth masks, also the
/// pre-training source) and "separated" (that same model validated on
/// segmenter masks). Rows 1-4 train on segmenter masks and report their best
/// validation accuracy.
std::vector<RegimeRow> run_regime_grid(const VggConfig& vgg, const InitSpec& init, const UNetLite& segmenter,
                                       std::span<const Example> train, std::span<const Example> val,
                                       const RegimeGridConfig& cfg);

/// Header `training,pre_trained,reset,alternating,accuracy`, flags as x / -.
std::string regime_summary_csv(std::span<const RegimeRow> rows);

}  // namespace insul
