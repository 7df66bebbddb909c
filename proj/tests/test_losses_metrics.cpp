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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "insul/error.hpp"
#include "insul/layers.hpp"
#include "insul/losses.hpp"
#include "insul/metrics.hpp"
#include "oracles.hpp"

using namespace insul;

namespace {

double bce_oracle(const std::vector<double>& p, const std::vector<double>& y, double w1, double w2) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::min(std::max(p[i], 1e-7), 1 - 1e-7);
    s += w1 * y[i] * std::log(q) + w2 * (1 - y[i]) * std::log(1 - q);
  }
  return -s / static_cast<double>(p.size());
}

// The 14-sample validation outcome behind the per-class table: supports
// {4,4,4,2}; one sample each of 1->0, 2->0 and 0->3 misclassified.
void table_iv_pairs(std::vector<int>& preds, std::vector<int>& truths) {
  truths = {0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3};
  preds = {0, 0, 0, 3, 0, 1, 1, 1, 0, 2, 2, 2, 3, 3};
}

Mask random_mask(std::size_t w, std::size_t h, Prng& rng, double p) {
  Mask m(w, h);
  for (auto& b : m.bits) b = rng.bernoulli(p) ? 1 : 0;
  return m;
}

}  // namespace

TEST_CASE("weighted_bce examples") {
  auto t1 = Tensor::from_data({1}, {1.0}, Dtype::f64);
  CHECK(weighted_bce(Tensor::from_data({1}, {1 - 1e-7}, Dtype::f64), t1).item() < 1e-6);
  CHECK(weighted_bce(Tensor::from_data({1}, {0.5}, Dtype::f64), t1).item() == doctest::Approx(std::log(2.0)));

  Prng rng(1);
  auto p = oracle::random_values(16, rng, 0.0, 1.0);
  std::vector<double> y(16);
  for (auto& v : y) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  const double got = weighted_bce(Tensor::from_data({16}, p, Dtype::f64), Tensor::from_data({16}, y, Dtype::f64),
                                  {2.0, 1.0})
                         .item();
  const double ref = bce_oracle(p, y, 2.0, 1.0);
  CHECK(std::abs(got - ref) / std::abs(ref) < 1e-6);
  // Unit weights reduce to the unweighted cross-entropy.
  const double unit = weighted_bce(Tensor::from_data({16}, p, Dtype::f64), Tensor::from_data({16}, y, Dtype::f64)).item();
  CHECK(std::abs(unit - bce_oracle(p, y, 1, 1)) < 1e-12);
}

TEST_CASE("weighted_bce errors") {
  auto p = Tensor::from_data({2}, {0.2, 0.3});
  CHECK_THROWS_AS(weighted_bce(p, Tensor::from_data({3}, {0, 1, 0})), ShapeError);
  CHECK_THROWS_AS(weighted_bce(p, Tensor::from_data({2}, {0.5, 1})), ValueError);
  CHECK_THROWS_AS(weighted_bce(p, Tensor::from_data({2}, {0, 1}), {0.0, 1.0}), ValueError);
}

TEST_CASE("mse") {
  auto a = Tensor::from_data({2}, {0.3, 0.4}, Dtype::f64);
  CHECK(mse(a, a).item() == 0.0);
  CHECK(mse(Tensor::from_data({2}, {0, 0}), Tensor::from_data({2}, {1, 1})).item() == 1.0);
  Prng rng(2);
  auto p = oracle::random_values(32, rng);
  auto y = oracle::random_values(32, rng);
  double ref = 0;
  for (std::size_t i = 0; i < 32; ++i) ref += (y[i] - p[i]) * (y[i] - p[i]);
  ref /= 32;
  const double got = mse(Tensor::from_data({32}, p, Dtype::f64), Tensor::from_data({32}, y, Dtype::f64)).item();
  CHECK(std::abs(got - ref) / ref < 1e-7);
  CHECK_THROWS_AS(mse(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
}

TEST_CASE("multiclass_ce") {
  std::vector<int> t0{2};
  CHECK(multiclass_ce(Tensor::zeros({1, 4}, Dtype::f64), t0).item() == doctest::Approx(std::log(4.0)));
  std::vector<int> first{0};
  CHECK(multiclass_ce(Tensor::from_data({1, 4}, {10, -10, -10, -10}, Dtype::f64), first).item() < 1e-4);
  std::vector<int> bad{4};
  CHECK_THROWS_AS(multiclass_ce(Tensor::zeros({1, 4}), bad), ValueError);

  Prng rng(3);
  auto logits = oracle::random_tensor({6, 4}, rng, Dtype::f64, -4, 4);
  std::vector<int> labels{0, 3, 1, 2, 2, 0};
  double ref = 0;
  for (std::size_t b = 0; b < 6; ++b) {
    double z = 0;
    for (std::size_t k = 0; k < 4; ++k) z += std::exp(logits.at({b, k}));
    ref += -std::log(std::exp(logits.at({b, static_cast<std::size_t>(labels[b])})) / z);
  }
  ref /= 6;
  CHECK(std::abs(multiclass_ce(logits, labels).item() - ref) / ref < 1e-5);
}

TEST_CASE("loss gradients pass finite differences") {
  Prng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto probs = oracle::random_tensor({3, 5}, rng, Dtype::f64, 0.02, 0.98);
    std::vector<double> y(15);
    for (auto& v : y) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
    auto target = Tensor::from_data({3, 5}, y, Dtype::f64);
    const BceWeights w{rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0)};
    CHECK(grad_check([&](const Tensor& t) { return weighted_bce(t, target, w); }, probs) < 1e-4);
    CHECK(grad_check([&](const Tensor& t) { return mse(t, target); }, probs) < 1e-4);
    auto logits = oracle::random_tensor({4, 4}, rng, Dtype::f64, -3, 3);
    std::vector<int> labels(4);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(0, 3));
    CHECK(grad_check([&](const Tensor& t) { return multiclass_ce(t, labels); }, logits) < 1e-4);
  }
}

TEST_CASE("iou examples") {
  Mask a(4, 4);
  for (std::size_t x = 0; x < 4; ++x) a.at(1, x) = 1;
  CHECK(iou(a, a) == 1.0);
  Mask b(4, 4);
  for (std::size_t x = 0; x < 4; ++x) b.at(3, x) = 1;
  CHECK(iou(a, b) == 0.0);

  Mask top(4, 4), left(4, 4);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      top.at(y, x) = y < 2;
      left.at(y, x) = x < 2;
    }
  CHECK(iou(top, left) == doctest::Approx(1.0 / 3.0));

  CHECK(iou(Mask(3, 3), Mask(3, 3)) == 1.0);
  CHECK_THROWS_AS(iou(Mask(3, 3), Mask(3, 4)), ShapeError);
  Mask bad(2, 2);
  bad.bits[0] = 255;
  CHECK_THROWS_AS(iou(bad, Mask(2, 2)), ValueError);
}

TEST_CASE("iou equals pixel-set intersection over union") {
  Prng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    auto p = random_mask(8, 8, rng, rng.uniform());
    auto t = random_mask(8, 8, rng, rng.uniform());
    std::set<std::size_t> ps, ts, inter, uni;
    for (std::size_t i = 0; i < 64; ++i) {
      if (p.bits[i]) ps.insert(i);
      if (t.bits[i]) ts.insert(i);
    }
    std::set_intersection(ps.begin(), ps.end(), ts.begin(), ts.end(), std::inserter(inter, inter.end()));
    std::set_union(ps.begin(), ps.end(), ts.begin(), ts.end(), std::inserter(uni, uni.end()));
    const double ref = uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    CHECK(iou(p, t) == ref);
  }
}

TEST_CASE("accuracy") {
  std::vector<int> a{0, 1, 2, 3};
  CHECK(accuracy(a, a) == 1.0);
  std::vector<int> t{0, 1, 2, 0};
  CHECK(accuracy(a, t) == 0.75);
  std::vector<int> none;
  CHECK_THROWS_AS(accuracy(none, none), ValueError);

  std::vector<int> preds, truths;
  table_iv_pairs(preds, truths);
  CHECK(accuracy(preds, truths) == doctest::Approx(11.0 / 14.0));
  CHECK(std::round(accuracy(preds, truths) * 100) / 100 == doctest::Approx(0.79));
}

TEST_CASE("confusion_from_pairs") {
  std::vector<int> one{1};
  auto cm = confusion_from_pairs(one, one);
  CHECK(cm.counts[1][1] == 1);
  CHECK(cm.total() == 1);
  std::vector<int> bad{4};
  CHECK_THROWS_AS(confusion_from_pairs(bad, one), ValueError);

  std::vector<int> preds, truths;
  table_iv_pairs(preds, truths);
  auto full = confusion_from_pairs(preds, truths);
  CHECK(full.total() == 14);
  // Order invariance.
  Prng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::size_t> idx(14);
    for (std::size_t i = 0; i < 14; ++i) idx[i] = i;
    for (std::size_t i = 13; i > 0; --i) std::swap(idx[i], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
    std::vector<int> p2, t2;
    for (auto i : idx) {
      p2.push_back(preds[i]);
      t2.push_back(truths[i]);
    }
    CHECK(confusion_from_pairs(p2, t2) == full);
  }
}

TEST_CASE("per_class_prf") {
  ConfusionMatrix diag;
  for (int c = 0; c < kNumClasses; ++c) diag.counts[c][c] = c + 1;
  for (const auto& s : per_class_prf(diag)) {
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 1.0);
    CHECK(s.f1 == 1.0);
  }

  std::vector<int> preds, truths;
  table_iv_pairs(preds, truths);
  auto s = per_class_prf(confusion_from_pairs(preds, truths));
  CHECK(s[0].precision == doctest::Approx(0.6));
  CHECK(s[0].recall == doctest::Approx(0.75));
  CHECK(s[0].f1 == doctest::Approx(2.0 / 3.0));
  CHECK(s[3].precision == doctest::Approx(2.0 / 3.0));
  CHECK(s[3].recall == 1.0);
  CHECK(s[3].f1 == doctest::Approx(0.8));

  ConfusionMatrix empty_col;
  empty_col.counts[0][1] = 3;
  auto z = per_class_prf(empty_col);
  CHECK(z[0].f1 == 0.0);
  CHECK(z[2].precision == 0.0);
}

TEST_CASE("metric identities on random instances") {
  Prng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 30));
    std::vector<int> p(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<int>(rng.uniform_int(0, 3));
      t[i] = static_cast<int>(rng.uniform_int(0, 3));
    }
    auto cm = confusion_from_pairs(p, t);
    CHECK(accuracy(p, t) == static_cast<double>(cm.trace()) / static_cast<double>(n));
    for (const auto& s : per_class_prf(cm))
      if (s.precision > 0 && s.recall > 0)
        CHECK(std::abs(s.f1 - 2.0 / (1.0 / s.precision + 1.0 / s.recall)) < 1e-12);
  }
}

TEST_CASE("report serialization") {
  std::vector<int> preds, truths;
  table_iv_pairs(preds, truths);
  auto r = classification_report(preds, truths);
  auto csv = to_csv(r);
  CHECK(csv.rfind("class,precision,recall,f1,support\n", 0) == 0);
  CHECK(csv.find("\n0,0.6,0.75,0.666667,4\n") != std::string::npos);
  CHECK(csv.find("\nmacro,") != std::string::npos);
  auto text = to_text(r);
  CHECK(text.find("accuracy 0.7857") != std::string::npos);
  auto seg = segmentation_report({0.5, 1.0});
  CHECK(seg.mean_iou == 0.75);
  CHECK(to_text(seg).find("mean IoU 0.7500") != std::string::npos);
}
