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

#include "insul/training.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "insul/error.hpp"
#include "insul/log.hpp"
#include "insul/prng.hpp"

namespace insul {

namespace {

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Prng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

// Seeds of epoch e: even index for the order, odd for augmentation.
std::uint64_t order_seed(std::uint64_t seed, std::uint64_t epoch) { return Prng::derive(seed, 2 * epoch); }
std::uint64_t augment_seed(std::uint64_t seed, std::uint64_t epoch) { return Prng::derive(seed, 2 * epoch + 1); }

// Keeps the parameters of the best validation event.
class BestTracker {
 public:
  bool offer(double metric, double loss) {
    const bool better = !metric_ || metric > *metric_ || (metric == *metric_ && loss < loss_);
    if (better) {
      metric_ = metric;
      loss_ = loss;
    }
    return better;
  }
  std::optional<double> metric() const { return metric_; }

 private:
  std::optional<double> metric_;
  double loss_ = 0.0;
};

struct ValResult {
  double loss = 0.0;
  double metric = 0.0;
};

Tensor seg_loss(const Tensor& pred, const Tensor& target, const SegTrainConfig& cfg) {
  return cfg.loss == SegLoss::mse ? mse(pred, target) : weighted_bce(pred, target, cfg.weights);
}

void require_masks(std::span<const Example> data, const char* what) {
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!data[i].mask) throw ValueError(std::string(what) + " sample " + std::to_string(i) + " has no mask");
}

void require_labels(std::span<const Example> data, const char* what) {
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data[i].label < 0 || data[i].label >= kNumClasses)
      throw ValueError(std::string(what) + " sample " + std::to_string(i) + " has no class label");
}

ValResult validate_segmentation(const UNetLite& model, std::span<const Example> val, const SegTrainConfig& cfg) {
  NoGradGuard guard;
  double loss_sum = 0.0, iou_sum = 0.0;
  for (std::size_t b = 0; b < val.size(); b += cfg.batch_size) {
    const std::size_t e = std::min(val.size(), b + cfg.batch_size);
    std::vector<Image> images;
    std::vector<Mask> masks;
    for (std::size_t i = b; i < e; ++i) {
      images.push_back(val[i].image);
      masks.push_back(*val[i].mask);
    }
    const auto probs = model.forward(stack_images(images, model.dtype()));
    loss_sum += seg_loss(probs, stack_masks(masks, model.dtype()), cfg).item() * static_cast<double>(e - b);
    for (std::size_t i = 0; i < e - b; ++i) iou_sum += iou(threshold_mask(slice_rows(probs, i, i + 1), cfg.threshold), masks[i]);
  }
  const auto n = static_cast<double>(val.size());
  return {loss_sum / n, iou_sum / n};
}

ValResult validate_classifier(const VggLite& model, std::span<const MaskedExample> val, std::size_t batch_size) {
  NoGradGuard guard;
  double loss_sum = 0.0;
  std::int64_t right = 0;
  for (std::size_t b = 0; b < val.size(); b += batch_size) {
    const std::size_t e = std::min(val.size(), b + batch_size);
    std::vector<Image> images;
    std::vector<int> labels;
    for (std::size_t i = b; i < e; ++i) {
      images.push_back(compose_mask(val[i].image, val[i].mask));
      labels.push_back(val[i].label);
    }
    const auto logits = model.forward(stack_images(images, model.dtype()));
    loss_sum += multiclass_ce(logits, labels).item() * static_cast<double>(e - b);
    const auto v = logits.to_vector();
    for (std::size_t i = 0; i < e - b; ++i) {
      const auto row = v.begin() + static_cast<std::ptrdiff_t>(i * kNumClasses);
      right += (std::max_element(row, row + kNumClasses) - row) == labels[i];
    }
  }
  const auto n = static_cast<double>(val.size());
  return {loss_sum / n, static_cast<double>(right) / n};
}

void record_validation(TrainResult& r, BestTracker& best, const Model& model, const OptimizerState& state,
                       const ValResult& v) {
  auto& row = r.log.rows.back();
  row.val_loss = v.loss;
  row.val_metric = v.metric;
  if (best.offer(v.metric, v.loss)) {
    r.log.best_row = r.log.rows.size() - 1;
    r.best_params = model.snapshot();
    r.best_optimizer = state;
    r.best_metric = v.metric;
  }
}

// One optimizer update plus scheduler step; appends a log row.
void update(const Tensor& loss, const std::vector<Tensor>& params, OptimizerState& state, TrainLog& log) {
  loss.backward();
  const double lr = state.lr;
  sgd_step(params, state);
  scheduler_step(state);
  TrainLogRow row;
  row.step = log.rows.empty() ? 1 : log.rows.back().step + 1;
  row.lr = lr;
  row.train_loss = loss.item();
  log.rows.push_back(row);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Optimizer

void SgdConfig::validate() const {
  if (!(lr > 0.0)) throw ValueError("learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValueError("momentum must be in [0, 1)");
  if (!(factor > 0.0 && factor <= 1.0)) throw ValueError("scheduler factor must be in (0, 1]");
}

OptimizerState make_optimizer_state(const SgdConfig& cfg, const std::vector<Tensor>& params) {
  cfg.validate();
  OptimizerState s;
  s.lr0 = cfg.lr;
  s.lr = cfg.lr;
  s.momentum = cfg.momentum;
  s.factor = cfg.factor;
  s.step = 0;
  for (const auto& p : params) s.velocity.emplace_back(p.numel(), 0.0);
  return s;
}

void sgd_step(const std::vector<Tensor>& params, OptimizerState& state) {
  if (state.velocity.size() != params.size())
    throw ValueError("optimizer state holds " + std::to_string(state.velocity.size()) + " buffers for " +
                     std::to_string(params.size()) + " parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad())
      throw GradError("parameter " + std::to_string(i) + " has no gradient; run backward() before sgd_step");
    if (state.velocity[i].size() != params[i].numel()) throw ShapeError("velocity size mismatch for parameter " + std::to_string(i));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    auto& v = state.velocity[i];
    const auto g = p.grad();
    auto theta = p.mutable_data();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      v[k] = state.momentum * v[k] + g[k];
      theta[k] = theta[k] - state.lr * v[k];
    }
    round_to_dtype(theta, p.dtype());
    p.zero_grad();
  }
}

double scheduler_step(OptimizerState& state) {
  state.lr *= state.factor;
  ++state.step;
  return state.lr;
}

// ---------------------------------------------------------------------------
// Logs

std::vector<std::size_t> TrainLog::validation_rows() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].val_metric) out.push_back(i);
  return out;
}

std::string TrainLog::to_csv() const {
  std::ostringstream os;
  os << "step,lr,train_loss,val_loss,val_metric\n";
  for (const auto& r : rows) {
    os << r.step << ',' << fmt(r.lr) << ',' << fmt(r.train_loss) << ',';
    if (r.val_loss) os << fmt(*r.val_loss);
    os << ',';
    if (r.val_metric) os << fmt(*r.val_metric);
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Segmentation

std::string to_string(SegLoss loss) { return loss == SegLoss::mse ? "mse" : "weighted_bce"; }

SegLoss parse_seg_loss(const std::string& name) {
  if (name == "weighted_bce") return SegLoss::weighted_bce;
  if (name == "mse") return SegLoss::mse;
  throw ValueError("unknown segmentation loss '" + name + "' (expected weighted_bce or mse)");
}

void SegTrainConfig::validate() const {
  sgd.validate();
  if (sequences < 1) throw ValueError("sequences must be >= 1");
  if (epochs_per_sequence < 1) throw ValueError("epochs per sequence must be >= 1");
  if (batch_size < 1) throw ValueError("batch size must be >= 1");
  if (!(weights.w1 > 0.0 && weights.w2 > 0.0)) throw ValueError("BCE weights must be positive");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValueError("threshold must be in [0, 1]");
  first_augment.validate();
  second_augment.validate();
}

SegTrainResult train_segmentation(UNetLite& model, std::span<const Example> train, std::span<const Example> val,
                                  const SegTrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw ValueError("segmentation training set is empty");
  require_masks(train, "training");
  require_masks(val, "validation");
  if (val.empty()) logging::warn("validation set is empty; validation skipped and the last parameters are kept");

  const auto params = model.parameters();
  SegTrainResult r;
  BestTracker best;
  OptimizerState state;
  std::uint64_t epoch = 0;
  std::optional<double> last_val_loss;
  for (int seq = 0; seq < cfg.sequences; ++seq) {
    if (seq > 0 && !r.best_params.empty()) {
      model.restore(r.best_params);
      const double warm = validate_segmentation(model, val, cfg).loss;
      r.warm_start_val_loss.push_back(warm);
      r.previous_final_val_loss.push_back(*last_val_loss);
      if (warm > *last_val_loss)
        logging::warn("sequence " + std::to_string(seq + 1) + " starts at validation loss " + fmt(warm) +
                      ", above the previous sequence's final " + fmt(*last_val_loss));
    }
    state = make_optimizer_state(cfg.sgd, params);
    r.sequence_starts.push_back(r.log.rows.size());
    const auto& spec = seq == 0 ? cfg.first_augment : cfg.second_augment;
    for (int e = 0; e < cfg.epochs_per_sequence; ++e, ++epoch) {
      const auto order = shuffled(train.size(), order_seed(cfg.seed, epoch));
      const auto aug = augment_seed(cfg.seed, epoch);
      for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
        std::vector<Image> images;
        std::vector<Mask> masks;
        for (std::size_t k = b; k < std::min(order.size(), b + cfg.batch_size); ++k) {
          const auto& ex = train[order[k]];
          auto pair = augment::apply_pipeline(ex.image, ex.mask, spec, aug, order[k]);
          images.push_back(std::move(pair.image));
          masks.push_back(std::move(*pair.mask));
        }
        const auto pred = model.forward(stack_images(images, model.dtype()));
        update(seg_loss(pred, stack_masks(masks, model.dtype()), cfg), params, state, r.log);
      }
      if (!val.empty()) {
        const auto v = validate_segmentation(model, val, cfg);
        last_val_loss = v.loss;
        record_validation(r, best, model, state, v);
      }
    }
  }
  if (r.best_params.empty()) {
    r.best_params = model.snapshot();
    r.best_optimizer = state;
  }
  model.restore(r.best_params);
  return r;
}

// ---------------------------------------------------------------------------
// Classification

std::vector<MaskedExample> masked_examples(std::span<const Example> examples, MaskSource source,
                                           const UNetLite* segmenter, double threshold, std::size_t batch_size) {
  require_labels(examples, "classification");
  std::vector<MaskedExample> out;
  out.reserve(examples.size());
  if (source == MaskSource::ground_truth) {
    require_masks(examples, "classification");
    for (const auto& e : examples) out.push_back({e.image, *e.mask, e.label});
    return out;
  }
  if (!segmenter) throw ValueError("segmenter mask source needs a segmentation model");
  std::vector<Image> images;
  for (const auto& e : examples) images.push_back(e.image);
  const auto probs = segment_probabilities(*segmenter, images, batch_size);
  for (std::size_t i = 0; i < examples.size(); ++i)
    out.push_back({examples[i].image, threshold_mask(probs[i], threshold), examples[i].label});
  return out;
}

void RegimeSpec::validate() const {
  if (outer_epochs < 1 || inner_epochs < 1) throw ValueError("outer and inner epochs must be >= 1");
  if (reset && alternating) throw ValueError("reset and alternating cannot both act at the inner-loop boundary");
  alternate.validate();
}

std::string RegimeSpec::flags() const {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += ',';
    s += name;
  };
  add(pretrained, "pre");
  add(reset, "reset");
  add(alternating, "alt");
  return s.empty() ? "none" : s;
}

RegimeSpec parse_regime_flags(const std::string& text, RegimeSpec base) {
  base.pretrained = base.reset = base.alternating = false;
  if (text == "none" || text.empty()) return base;
  std::istringstream in(text);
  std::string flag;
  while (std::getline(in, flag, ',')) {
    if (flag == "pre")
      base.pretrained = true;
    else if (flag == "reset")
      base.reset = true;
    else if (flag == "alt")
      base.alternating = true;
    else
      throw ValueError("unknown regime flag '" + flag + "' (expected pre, reset, alt or none)");
  }
  base.validate();
  return base;
}

void ClsTrainConfig::validate() const {
  sgd.validate();
  regime.validate();
  if (batch_size < 1) throw ValueError("batch size must be >= 1");
  augment.validate();
}

TrainResult train_classifier(VggLite& model, std::span<const MaskedExample> train,
                             std::span<const MaskedExample> val, const ClsTrainConfig& cfg,
                             const Checkpoint* init_from) {
  cfg.validate();
  if (train.empty()) throw ValueError("classification training set is empty");
  for (const auto* set : {&train, &val})
    for (const auto& e : *set)
      if (e.label < 0 || e.label >= kNumClasses) throw ValueError("classification sample without a class label");
  if (cfg.regime.pretrained) {
    if (!init_from) throw ValueError("pre-trained regime needs a ground-truth-trained checkpoint");
    load_parameters(model, *init_from);
  }
  if (val.empty()) logging::warn("validation set is empty; validation skipped and the last parameters are kept");

  const auto params = model.parameters();
  OptimizerState primary = make_optimizer_state(cfg.sgd, params);
  OptimizerState alternate = make_optimizer_state(cfg.regime.alternate, params);
  bool use_alternate = false;
  TrainResult r;
  BestTracker best;
  std::uint64_t epoch = 0;
  for (int outer = 0; outer < cfg.regime.outer_epochs; ++outer) {
    for (int inner = 0; inner < cfg.regime.inner_epochs; ++inner, ++epoch) {
      OptimizerState& state = use_alternate ? alternate : primary;
      const auto order = shuffled(train.size(), order_seed(cfg.seed, epoch));
      const auto aug = augment_seed(cfg.seed, epoch);
      for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
        std::vector<Image> images;
        std::vector<int> labels;
        for (std::size_t k = b; k < std::min(order.size(), b + cfg.batch_size); ++k) {
          const auto& ex = train[order[k]];
          const auto pair = augment::apply_pipeline(ex.image, ex.mask, cfg.augment, aug, order[k]);
          images.push_back(compose_mask(pair.image, *pair.mask));
          labels.push_back(ex.label);
        }
        update(multiclass_ce(model.forward(stack_images(images, model.dtype())), labels), params, state, r.log);
      }
      if (!val.empty()) record_validation(r, best, model, state, validate_classifier(model, val, cfg.batch_size));
    }
    if (cfg.regime.reset) primary = make_optimizer_state(cfg.sgd, params);
    if (cfg.regime.alternating) use_alternate = !use_alternate;
  }
  if (r.best_params.empty()) {
    r.best_params = model.snapshot();
    r.best_optimizer = use_alternate ? alternate : primary;
  }
  model.restore(r.best_params);
  return r;
}

// ---------------------------------------------------------------------------
// Evaluation

std::string to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::segmentation:
      return "segmentation";
    case EvalMode::classification:
      return "classification";
    case EvalMode::end_to_end:
      return "end-to-end";
  }
  return "?";
}

EvalMode parse_eval_mode(const std::string& name) {
  if (name == "segmentation") return EvalMode::segmentation;
  if (name == "classification") return EvalMode::classification;
  if (name == "end-to-end" || name == "end_to_end") return EvalMode::end_to_end;
  throw ValueError("unknown evaluation mode '" + name + "' (expected segmentation, classification or end-to-end)");
}

MetricsReport evaluate_segmentation(const UNetLite& model, std::span<const Example> data, double threshold,
                                    std::size_t batch_size) {
  require_masks(data, "segmentation evaluation");
  std::vector<Image> images;
  for (const auto& e : data) images.push_back(e.image);
  const auto probs = segment_probabilities(model, images, batch_size);
  std::vector<double> ious;
  for (std::size_t i = 0; i < data.size(); ++i) ious.push_back(iou(threshold_mask(probs[i], threshold), *data[i].mask));
  return segmentation_report(std::move(ious));
}

MetricsReport evaluate_classification(const VggLite& model, std::span<const Image> composed,
                                      std::span<const int> labels, std::size_t batch_size) {
  if (composed.size() != labels.size()) throw ShapeError("one label per image required");
  const auto probs = classify_probabilities(model, composed, batch_size);
  std::vector<int> preds;
  for (const auto& p : probs) preds.push_back(argmax(p));
  return classification_report(preds, labels);
}

MetricsReport evaluate_classification(const VggLite& model, std::span<const MaskedExample> data,
                                      std::size_t batch_size) {
  std::vector<Image> composed;
  std::vector<int> labels;
  for (const auto& e : data) {
    composed.push_back(compose_mask(e.image, e.mask));
    labels.push_back(e.label);
  }
  return evaluate_classification(model, composed, labels, batch_size);
}

MetricsReport evaluate_end_to_end(const Pipeline& pipeline, std::span<const Example> data, std::size_t batch_size) {
  require_labels(data, "end-to-end evaluation");
  std::vector<Image> images;
  std::vector<int> labels;
  for (const auto& e : data) {
    images.push_back(e.image);
    labels.push_back(e.label);
  }
  std::vector<int> preds;
  for (const auto& p : pipeline.predict_batch(images, batch_size)) preds.push_back(p.label);
  return classification_report(preds, labels);
}

// ---------------------------------------------------------------------------
// Regime grid

std::vector<RegimeRow> run_regime_grid(const VggConfig& vgg, const InitSpec& init, const UNetLite& segmenter,
                                       std::span<const Example> train, std::span<const Example> val,
                                       const RegimeGridConfig& cfg) {
  cfg.base.validate();
  if (val.empty()) throw ValueError("the regime grid needs a validation set");
  const auto gt_train = masked_examples(train, MaskSource::ground_truth);
  const auto gt_val = masked_examples(val, MaskSource::ground_truth);
  const auto seg_train = masked_examples(train, MaskSource::segmenter, &segmenter, cfg.threshold, cfg.base.batch_size);
  const auto seg_val = masked_examples(val, MaskSource::segmenter, &segmenter, cfg.threshold, cfg.base.batch_size);

  std::vector<RegimeRow> rows;
  ClsTrainConfig plain = cfg.base;
  plain.regime = parse_regime_flags("none", cfg.base.regime);
  VggLite gt_model(vgg, init);
  RegimeRow gt{"ground_truth", plain.regime, 0.0, train_classifier(gt_model, gt_train, gt_val, plain)};
  gt.accuracy = gt.result.best_metric.value_or(0.0);
  const auto pretrained = make_checkpoint(gt_model);

  RegimeRow separated{"separated", plain.regime, evaluate_classification(gt_model, seg_val, cfg.base.batch_size).accuracy,
                      {}};

  const char* flags[] = {"pre", "reset", "pre,alt", "pre,reset"};
  for (int i = 0; i < 4; ++i) {
    ClsTrainConfig c = cfg.base;
    c.regime = parse_regime_flags(flags[i], cfg.base.regime);
    VggLite m(vgg, init);
    RegimeRow row{std::to_string(i + 1), c.regime, 0.0, train_classifier(m, seg_train, seg_val, c, &pretrained)};
    row.accuracy = row.result.best_metric.value_or(0.0);
    rows.push_back(std::move(row));
  }
  rows.push_back(std::move(gt));
  rows.push_back(std::move(separated));
  return rows;
}

std::string regime_summary_csv(std::span<const RegimeRow> rows) {
  std::ostringstream os;
  os << "training,pre_trained,reset,alternating,accuracy\n";
  for (const auto& r : rows)
    os << r.training << ',' << (r.regime.pretrained ? 'x' : '-') << ',' << (r.regime.reset ? 'x' : '-') << ','
       << (r.regime.alternating ? 'x' : '-') << ',' << fmt(r.accuracy) << '\n';
  return os.str();
}

}  // namespace insul
