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

#include "insul/metrics.hpp"

#include <iomanip>
#include <numeric>
#include <sstream>

#include "insul/error.hpp"

namespace insul {

const char* class_name(int label) {
  switch (label) {
    case 0: return "healthy";
    case 1: return "broken";
    case 2: return "burned/corroded";
    case 3: return "missing cap";
    default: return "unknown";
  }
}

std::size_t Mask::count() const {
  std::size_t n = 0;
  for (auto b : bits) n += b != 0;
  return n;
}

double Mask::area_fraction() const {
  return bits.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(bits.size());
}

void require_binary(const Mask& mask) {
  if (mask.bits.size() != mask.width * mask.height) throw ShapeError("mask buffer does not match its dimensions");
  for (auto b : mask.bits)
    if (b > 1) throw ValueError("mask is not binary (found value " + std::to_string(b) + ")");
}

double iou(const Mask& pred, const Mask& truth) {
  if (pred.width != truth.width || pred.height != truth.height)
    throw ShapeError("iou: mask sizes differ (" + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                     " vs " + std::to_string(truth.height) + "x" + std::to_string(truth.width) + ")");
  require_binary(pred);
  require_binary(truth);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.bits.size(); ++i) {
    const bool p = pred.bits[i], t = truth.bits[i];
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  const std::size_t denom = tp + fp + fn;
  return denom == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(denom);
}

double accuracy(std::span<const int> preds, std::span<const int> truths) {
  if (preds.size() != truths.size())
    throw ShapeError("accuracy: " + std::to_string(preds.size()) + " predictions vs " + std::to_string(truths.size()) +
                     " labels");
  if (preds.empty()) throw ValueError("accuracy of an empty sample set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == truths[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), std::int64_t{0});
  return n;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t n = 0;
  for (int c = 0; c < kNumClasses; ++c) n += counts[c][c];
  return n;
}

std::int64_t ConfusionMatrix::support(int cls) const {
  const auto& row = counts.at(static_cast<std::size_t>(cls));
  return std::accumulate(row.begin(), row.end(), std::int64_t{0});
}

ConfusionMatrix confusion_from_pairs(std::span<const int> preds, std::span<const int> truths) {
  if (preds.size() != truths.size())
    throw ShapeError("confusion_from_pairs: " + std::to_string(preds.size()) + " predictions vs " +
                     std::to_string(truths.size()) + " labels");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], t = truths[i];
    if (p < 0 || p >= kNumClasses || t < 0 || t >= kNumClasses)
      throw ValueError("class index out of range at position " + std::to_string(i));
    ++cm.counts[t][p];
  }
  return cm;
}

std::array<ClassScores, kNumClasses> per_class_prf(const ConfusionMatrix& cm) {
  std::array<ClassScores, kNumClasses> out{};
  for (int c = 0; c < kNumClasses; ++c) {
    const auto tp = cm.counts[c][c];
    std::int64_t fp = 0, fn = 0;
    for (int o = 0; o < kNumClasses; ++o) {
      if (o == c) continue;
      fp += cm.counts[o][c];
      fn += cm.counts[c][o];
    }
    auto& s = out[c];
    s.support = tp + fn;
    s.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    s.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return out;
}

MetricsReport classification_report(std::span<const int> preds, std::span<const int> truths) {
  MetricsReport r;
  r.has_classification = true;
  r.confusion = confusion_from_pairs(preds, truths);
  r.accuracy = accuracy(preds, truths);
  r.per_class = per_class_prf(r.confusion);
  return r;
}

MetricsReport segmentation_report(std::vector<double> iou_per_image) {
  MetricsReport r;
  r.has_segmentation = true;
  r.iou_per_image = std::move(iou_per_image);
  if (!r.iou_per_image.empty())
    r.mean_iou = std::accumulate(r.iou_per_image.begin(), r.iou_per_image.end(), 0.0) /
                 static_cast<double>(r.iou_per_image.size());
  return r;
}

std::string to_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "class,precision,recall,f1,support\n";
  double mp = 0, mr = 0, mf = 0;
  std::int64_t total = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& s = report.per_class[c];
    os << c << ',' << s.precision << ',' << s.recall << ',' << s.f1 << ',' << s.support << '\n';
    mp += s.precision;
    mr += s.recall;
    mf += s.f1;
    total += s.support;
  }
  os << "macro," << mp / kNumClasses << ',' << mr / kNumClasses << ',' << mf / kNumClasses << ',' << total << '\n';
  return os.str();
}

std::string to_text(const MetricsReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  if (report.has_segmentation) {
    os << "segmentation: " << report.iou_per_image.size() << " images, mean IoU " << report.mean_iou << '\n';
  }
  if (report.has_classification) {
    os << "classification: " << report.confusion.total() << " samples, accuracy " << report.accuracy << '\n';
    os << "  class               precision  recall  f1      support\n";
    for (int c = 0; c < kNumClasses; ++c) {
      const auto& s = report.per_class[c];
      os << "  " << c << ' ' << std::left << std::setw(18) << class_name(c) << std::right << std::setw(9)
         << s.precision << std::setw(8) << s.recall << std::setw(8) << s.f1 << std::setw(9) << s.support << '\n';
    }
    os << "  confusion (rows = truth, cols = prediction)\n";
    for (const auto& row : report.confusion.counts) {
      os << "   ";
      for (auto v : row) os << ' ' << std::setw(5) << v;
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace insul
