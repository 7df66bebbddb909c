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

#include "insul/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "insul/checkpoint.hpp"
#include "insul/error.hpp"

namespace insul {

namespace {

void require_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValueError(std::string(what) + " " + std::to_string(p) + " is outside [0, 1]");
}

template <typename Fn>
void for_each_chunk(std::size_t n, std::size_t batch_size, Fn&& fn) {
  if (batch_size == 0) throw ValueError("batch size must be positive");
  for (std::size_t begin = 0; begin < n; begin += batch_size) fn(begin, std::min(n, begin + batch_size));
}

double parse_number(const std::string& s, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ValueError("bad number '" + s + "' in grid '" + text + "'");
  return v;
}

}  // namespace

void PipelineConfig::validate() const { require_probability(threshold, "threshold"); }

Mask threshold_mask(const Tensor& probs, double p) {
  require_probability(p, "threshold");
  const auto& s = probs.shape();
  const bool ok = s.size() == 2 || (s.size() == 3 && s[0] == 1) || (s.size() == 4 && s[0] == 1 && s[1] == 1);
  if (!ok) throw ShapeError("threshold_mask expects [H,W], [1,H,W] or [1,1,H,W], got " + to_string(s));
  Mask m(s[s.size() - 1], s[s.size() - 2]);
  const auto d = probs.data();
  for (std::size_t i = 0; i < d.size(); ++i) m.bits[i] = d[i] >= p ? 1 : 0;
  return m;
}

Image compose_mask(const Image& image, const Mask& mask) {
  if (image.width != mask.width || image.height != mask.height)
    throw ShapeError("mask " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                     " does not match image " + std::to_string(image.width) + "x" + std::to_string(image.height));
  Image out = image;
  for (std::size_t i = 0; i < mask.bits.size(); ++i)
    if (!mask.bits[i])
      for (std::size_t c = 0; c < Image::kChannels; ++c) out.pixels[i * Image::kChannels + c] = 0;
  return out;
}

Tensor compose_mask(const Tensor& image, const Mask& mask) {
  const auto& s = image.shape();
  if (s.size() != 3 || s[0] != 3 || s[1] != mask.height || s[2] != mask.width)
    throw ShapeError("compose_mask expects image [3," + std::to_string(mask.height) + "," + std::to_string(mask.width) +
                     "], got " + to_string(s));
  const std::size_t hw = mask.bits.size();
  std::vector<double> m(3 * hw);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < hw; ++i) m[c * hw + i] = mask.bits[i];
  return mul(image, Tensor::from_data(s, std::move(m), image.dtype()));
}

std::vector<Tensor> segment_probabilities(const UNetLite& unet, std::span<const Image> images, std::size_t batch_size) {
  NoGradGuard guard;
  std::vector<Tensor> out;
  out.reserve(images.size());
  for_each_chunk(images.size(), batch_size, [&](std::size_t b, std::size_t e) {
    const auto probs = unet.forward(stack_images(images.subspan(b, e - b), unet.dtype()));
    for (std::size_t i = 0; i < e - b; ++i) out.push_back(reshape(slice_rows(probs, i, i + 1), {1, probs.dim(2), probs.dim(3)}));
  });
  return out;
}

std::vector<std::array<double, kNumClasses>> classify_probabilities(const VggLite& vgg, std::span<const Image> images,
                                                                    std::size_t batch_size) {
  NoGradGuard guard;
  std::vector<std::array<double, kNumClasses>> out;
  out.reserve(images.size());
  for_each_chunk(images.size(), batch_size, [&](std::size_t b, std::size_t e) {
    const auto logits = vgg.forward(stack_images(images.subspan(b, e - b), vgg.dtype()));
    const auto probs = softmax(logits.to(Dtype::f64)).to_vector();
    for (std::size_t i = 0; i < e - b; ++i) {
      std::array<double, kNumClasses> row{};
      std::copy_n(probs.begin() + static_cast<std::ptrdiff_t>(i * kNumClasses), kNumClasses, row.begin());
      out.push_back(row);
    }
  });
  return out;
}

int argmax(const std::array<double, kNumClasses>& probs) {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

Pipeline::Pipeline(UNetLite segmenter, VggLite classifier, double threshold)
    : unet_(std::move(segmenter)), vgg_(std::move(classifier)), threshold_(threshold) {
  require_probability(threshold, "threshold");
  const auto& u = unet_.config();
  const auto& v = vgg_.config();
  if (u.height != v.height || u.width != v.width)
    throw ArchitectureMismatch(u.descriptor(), v.descriptor() + " (classifier input size differs)");
}

Pipeline Pipeline::load(const PipelineConfig& cfg) {
  cfg.validate();
  return Pipeline(load_unet(cfg.segmenter), load_vgg(cfg.classifier), cfg.threshold);
}

Prediction Pipeline::predict(const Image& image) const { return predict_batch(std::span(&image, 1)).front(); }

std::vector<Prediction> Pipeline::predict_batch(std::span<const Image> images, std::size_t batch_size) const {
  const auto probs = segment_probabilities(unet_, images, batch_size);
  std::vector<Prediction> out(images.size());
  std::vector<Image> composed;
  composed.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    out[i].mask = threshold_mask(probs[i], threshold_);
    out[i].composed = compose_mask(images[i], out[i].mask);
    composed.push_back(out[i].composed);
  }
  const auto cls = classify_probabilities(vgg_, composed, batch_size);
  for (std::size_t i = 0; i < images.size(); ++i) {
    out[i].probabilities = cls[i];
    out[i].label = argmax(cls[i]);
  }
  return out;
}

Prediction Pipeline::classify_with_mask(const Image& image, const Mask& mask) const {
  Prediction p;
  p.mask = mask;
  p.composed = compose_mask(image, mask);
  p.probabilities = classify_probabilities(vgg_, std::span(&p.composed, 1)).front();
  p.label = argmax(p.probabilities);
  return p;
}

std::string to_record(const Prediction& prediction, const std::string& image_id) {
  nlohmann::ordered_json j;
  j["image"] = image_id;
  j["class"] = prediction.label;
  j["class_name"] = class_name(prediction.label);
  j["probabilities"] = prediction.probabilities;
  j["mask_area_fraction"] = prediction.mask.area_fraction();
  return j.dump();
}

SweepResult sweep_threshold(std::span<const Tensor> probs, std::span<const Mask> truths, std::span<const double> grid) {
  if (grid.empty()) throw ValueError("threshold grid is empty");
  if (probs.size() != truths.size()) throw ShapeError("sweep needs one truth mask per probability map");
  if (probs.empty()) throw ValueError("threshold sweep needs at least one image");
  for (double p : grid) require_probability(p, "grid value");
  SweepResult r;
  for (double p : grid) {
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) total += iou(threshold_mask(probs[i], p), truths[i]);
    r.points.push_back({p, total / static_cast<double>(probs.size())});
  }
  const auto best = std::max_element(r.points.begin(), r.points.end(),
                                     [](const SweepPoint& a, const SweepPoint& b) { return a.mean_iou < b.mean_iou; });
  r.best_p = best->p;
  r.best_iou = best->mean_iou;
  return r;
}

SweepResult sweep_threshold(const UNetLite& unet, std::span<const Example> examples, std::span<const double> grid,
                            std::size_t batch_size) {
  if (grid.empty()) throw ValueError("threshold grid is empty");
  std::vector<Image> images;
  std::vector<Mask> truths;
  for (const auto& e : examples) {
    if (!e.mask) throw ValueError("threshold sweep needs ground-truth masks for every sample");
    images.push_back(e.image);
    truths.push_back(*e.mask);
  }
  const auto probs = segment_probabilities(unet, images, batch_size);
  return sweep_threshold(probs, truths, grid);
}

std::string to_csv(const SweepResult& result) {
  std::ostringstream os;
  os << "p,mean_iou\n";
  for (const auto& pt : result.points) os << std::setprecision(6) << pt.p << ',' << std::setprecision(10) << pt.mean_iou << '\n';
  return os.str();
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ':')) parts.push_back(part);
    if (parts.size() != 3) throw ValueError("grid '" + text + "' must look like start:stop:step");
    const double a = parse_number(parts[0], text), b = parse_number(parts[1], text), s = parse_number(parts[2], text);
    if (!(s > 0.0) || b < a) throw ValueError("grid '" + text + "' needs step > 0 and stop >= start");
    const auto n = static_cast<std::size_t>(std::floor((b - a) / s + 1e-9)) + 1;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = a + static_cast<double>(i) * s;
      out.push_back(std::round(v * 1e12) / 1e12);
    }
  } else {
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) out.push_back(parse_number(part, text));
  }
  if (out.empty()) throw ValueError("threshold grid is empty");
  for (double p : out) require_probability(p, "grid value");
  return out;
}

}  // namespace insul
