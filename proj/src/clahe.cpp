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

#include <algorithm>
#include <array>
#include <cmath>

#include "insul/augment.hpp"
#include "insul/error.hpp"

namespace insul::augment {

namespace {

using Lut = std::array<double, 256>;

std::uint8_t luminance(const Image& im, std::size_t y, std::size_t x) {
  const double v = 0.299 * im.at(y, x, 0) + 0.587 * im.at(y, x, 1) + 0.114 * im.at(y, x, 2);
  return static_cast<std::uint8_t>(std::min(255L, std::lround(v)));
}

// Clipped-histogram equalization mapping for one tile. The clip limit is
// relative to a flat histogram: clip_limit * area / 256 counts per bin.
Lut tile_lut(const std::array<double, 256>& hist, double area, double clip_limit) {
  const double limit = std::max(1.0, clip_limit * area / 256.0);
  std::array<double, 256> h = hist;
  double excess = 0.0;
  for (auto& v : h)
    if (v > limit) {
      excess += v - limit;
      v = limit;
    }
  const double share = excess / 256.0;
  Lut lut;
  double cdf = 0.0;
  for (std::size_t i = 0; i < 256; ++i) {
    cdf += h[i] + share;
    lut[i] = cdf * 255.0 / area;
  }
  return lut;
}

// Position of a pixel between tile centres: lower tile index and weight of
// the upper one.
std::pair<std::size_t, double> tile_coord(std::size_t p, std::size_t n, std::size_t tiles) {
  const double t = (static_cast<double>(p) + 0.5) * static_cast<double>(tiles) / static_cast<double>(n) - 0.5;
  if (t <= 0.0) return {0, 0.0};
  const auto i = static_cast<std::size_t>(t);
  if (i >= tiles - 1) return {tiles - 1, 0.0};
  return {i, t - static_cast<double>(i)};
}

}  // namespace

Image clahe(const Image& im, double clip_limit, int tiles) {
  if (!(clip_limit > 0.0)) throw ValueError("CLAHE clip limit must be positive");
  if (tiles < 1) throw ValueError("CLAHE tile grid must be at least 1x1");
  if (im.width == 0 || im.height == 0) return im;
  std::size_t g = static_cast<std::size_t>(tiles);
  if (im.width < g || im.height < g) g = 1;

  const std::size_t w = im.width, h = im.height;
  std::vector<std::uint8_t> lum(w * h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) lum[y * w + x] = luminance(im, y, x);

  std::vector<std::array<double, 256>> hist(g * g, std::array<double, 256>{});
  std::vector<double> area(g * g, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t ty = y * g / h;
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t t = ty * g + x * g / w;
      hist[t][lum[y * w + x]] += 1.0;
      area[t] += 1.0;
    }
  }
  std::vector<Lut> luts(g * g);
  for (std::size_t t = 0; t < g * g; ++t) luts[t] = tile_lut(hist[t], area[t], clip_limit);

  Image out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    const auto [ty, wy] = tile_coord(y, h, g);
    const std::size_t ty1 = std::min(ty + 1, g - 1);
    for (std::size_t x = 0; x < w; ++x) {
      const auto [tx, wx] = tile_coord(x, w, g);
      const std::size_t tx1 = std::min(tx + 1, g - 1);
      const std::uint8_t v = lum[y * w + x];
      const double top = (1.0 - wx) * luts[ty * g + tx][v] + wx * luts[ty * g + tx1][v];
      const double bottom = (1.0 - wx) * luts[ty1 * g + tx][v] + wx * luts[ty1 * g + tx1][v];
      const long mapped = std::lround((1.0 - wy) * top + wy * bottom);
      const long delta = std::clamp(mapped, 0L, 255L) - static_cast<long>(v);
      for (std::size_t c = 0; c < Image::kChannels; ++c)
        out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(im.at(y, x, c) + delta, 0L, 255L));
    }
  }
  return out;
}

}  // namespace insul::augment
