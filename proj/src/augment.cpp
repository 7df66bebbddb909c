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

#include "insul/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "insul/error.hpp"

namespace insul::augment {

namespace {

constexpr std::array<std::string_view, 11> kNames = {
    "VerticalFlip", "HorizontalFlip", "ElasticTransform", "GridDistortion", "OpticalDistortion", "Transpose",
    "RandomRotate90", "CLAHE", "RandomBrightness", "RandomContrast", "RandomGamma",
};

std::uint8_t clip_round(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v));
}

// Copies `src` (w x h, ch channels) into a new buffer of ow x oh where output
// pixel (y, x) reads source pixel from(y, x).
template <typename From>
std::vector<std::uint8_t> permute(const std::vector<std::uint8_t>& src, std::size_t w, std::size_t ch,
                                  std::size_t ow, std::size_t oh, From from) {
  std::vector<std::uint8_t> out(ow * oh * ch);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      const auto [sy, sx] = from(y, x);
      const std::size_t s = (sy * w + sx) * ch, d = (y * ow + x) * ch;
      for (std::size_t c = 0; c < ch; ++c) out[d + c] = src[s + c];
    }
  return out;
}

enum class Dihedral { h, v, t, r1, r2, r3 };

std::vector<std::uint8_t> dihedral(const std::vector<std::uint8_t>& src, std::size_t w, std::size_t h,
                                   std::size_t ch, Dihedral kind, std::size_t& ow, std::size_t& oh) {
  using P = std::pair<std::size_t, std::size_t>;
  switch (kind) {
    case Dihedral::h:
      ow = w, oh = h;
      return permute(src, w, ch, ow, oh, [&](std::size_t y, std::size_t x) { return P{y, w - 1 - x}; });
    case Dihedral::v:
      ow = w, oh = h;
      return permute(src, w, ch, ow, oh, [&](std::size_t y, std::size_t x) { return P{h - 1 - y, x}; });
    case Dihedral::t:
      ow = h, oh = w;
      return permute(src, w, ch, ow, oh, [](std::size_t y, std::size_t x) { return P{x, y}; });
    case Dihedral::r1:
      ow = h, oh = w;
      return permute(src, w, ch, ow, oh, [&](std::size_t y, std::size_t x) { return P{x, w - 1 - y}; });
    case Dihedral::r2:
      ow = w, oh = h;
      return permute(src, w, ch, ow, oh, [&](std::size_t y, std::size_t x) { return P{h - 1 - y, w - 1 - x}; });
    case Dihedral::r3:
      ow = h, oh = w;
      return permute(src, w, ch, ow, oh, [&](std::size_t y, std::size_t x) { return P{h - 1 - x, y}; });
  }
  return {};
}

Image dihedral(const Image& im, Dihedral kind) {
  Image out;
  out.pixels = dihedral(im.pixels, im.width, im.height, Image::kChannels, kind, out.width, out.height);
  return out;
}

Mask dihedral(const Mask& m, Dihedral kind) {
  Mask out;
  out.bits = dihedral(m.bits, m.width, m.height, 1, kind, out.width, out.height);
  return out;
}

Dihedral rotation(int k) {
  static constexpr Dihedral table[] = {Dihedral::r1, Dihedral::r2, Dihedral::r3};
  return table[((k % 4) + 4) % 4 - 1];
}

template <typename T>
T rotate(const T& v, int k) {
  if (((k % 4) + 4) % 4 == 0) return v;
  return dihedral(v, rotation(k));
}

double reflect(double t, std::size_t n) {
  if (n == 1) return 0.0;
  const double last = static_cast<double>(n - 1);
  const double period = 2.0 * last;
  t = std::fmod(std::abs(t), period);
  return t > last ? period - t : t;
}

std::size_t reflect_index(long i, std::size_t n) {
  return static_cast<std::size_t>(reflect(static_cast<double>(i), n));
}

std::vector<double> gaussian_kernel(double sigma) {
  const long radius = std::max(1L, static_cast<long>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (auto& v : k) v /= total;
  return k;
}

// Separable smoothing with reflected borders.
std::vector<double> smooth(const std::vector<double>& f, std::size_t w, std::size_t h, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const long r = static_cast<long>(k.size() / 2);
  std::vector<double> tmp(f.size()), out(f.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (long i = -r; i <= r; ++i)
        s += k[static_cast<std::size_t>(i + r)] * f[y * w + reflect_index(static_cast<long>(x) + i, w)];
      tmp[y * w + x] = s;
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (long i = -r; i <= r; ++i)
        s += k[static_cast<std::size_t>(i + r)] * tmp[reflect_index(static_cast<long>(y) + i, h) * w + x];
      out[y * w + x] = s;
    }
  return out;
}

// Band edges for one axis of the grid distortion, in source coordinates.
std::vector<double> grid_edges(std::size_t n, int cells, double limit, Prng& rng) {
  std::vector<double> steps(static_cast<std::size_t>(cells));
  for (auto& s : steps) s = 1.0 + rng.uniform(-limit, limit);
  double total = 0.0;
  for (double s : steps) total += s;
  std::vector<double> edges(steps.size() + 1, 0.0);
  const double span = static_cast<double>(n - 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    acc += steps[i];
    edges[i + 1] = span * acc / total;
  }
  edges.back() = span;
  return edges;
}

double grid_map(double t, std::size_t n, const std::vector<double>& edges) {
  const std::size_t cells = edges.size() - 1;
  const double span = static_cast<double>(n - 1);
  if (span == 0.0) return 0.0;
  const double u = t / span * static_cast<double>(cells);
  const std::size_t i = std::min(cells - 1, static_cast<std::size_t>(u));
  const double frac = u - static_cast<double>(i);
  return edges[i] + frac * (edges[i + 1] - edges[i]);
}

std::string describe(Kind kind, const std::string& args = {}) {
  std::string s(to_string(kind));
  if (!args.empty()) s += "(" + args + ")";
  return s;
}

std::string fmt(const char* name, double v) {
  std::ostringstream os;
  os.precision(6);
  os << name << "=" << v;
  return os.str();
}

}  // namespace

std::string_view to_string(Kind kind) { return kNames[static_cast<std::size_t>(kind)]; }

Kind parse_kind(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<Kind>(i);
  throw ValueError("unknown augmentation '" + std::string(name) + "'");
}

bool is_geometric(Kind kind) {
  switch (kind) {
    case Kind::clahe:
    case Kind::random_brightness:
    case Kind::random_contrast:
    case Kind::random_gamma:
      return false;
    default:
      return true;
  }
}

Params default_params(Kind kind) {
  Params p;
  switch (kind) {
    case Kind::elastic:
      p.alpha = 2.0;
      p.sigma = 8.0;
      break;
    case Kind::grid_distortion:
      p.cells = 5;
      p.limit = 0.3;
      break;
    case Kind::optical_distortion:
      p.lo = -0.1, p.hi = 0.1;
      break;
    case Kind::random_brightness:
      p.lo = -0.2, p.hi = 0.2;
      break;
    case Kind::random_contrast:
    case Kind::random_gamma:
      p.lo = 0.8, p.hi = 1.2;
      break;
    default:
      break;
  }
  return p;
}

void Spec::validate() const {
  for (const auto& t : transforms) {
    const std::string name(to_string(t.kind));
    const auto& q = t.params;
    if (!(t.p >= 0.0 && t.p <= 1.0)) throw ValueError(name + ": probability must be in [0, 1]");
    if (!(q.lo <= q.hi)) throw ValueError(name + ": range lower bound exceeds upper bound");
    switch (t.kind) {
      case Kind::elastic:
        if (!(q.alpha >= 0.0)) throw ValueError(name + ": alpha must be non-negative");
        if (!(q.sigma > 0.0)) throw ValueError(name + ": sigma must be positive");
        break;
      case Kind::grid_distortion:
        if (q.cells < 1) throw ValueError(name + ": cells must be at least 1");
        if (!(q.limit >= 0.0 && q.limit < 1.0)) throw ValueError(name + ": limit must be in [0, 1)");
        break;
      case Kind::clahe:
        if (!(q.clip_limit > 0.0)) throw ValueError(name + ": clip limit must be positive");
        if (q.tiles < 1) throw ValueError(name + ": tiles must be at least 1");
        break;
      case Kind::random_contrast:
        if (!(q.lo >= 0.0)) throw ValueError(name + ": contrast factor must be non-negative");
        break;
      case Kind::random_gamma:
        if (!(q.lo > 0.0)) throw ValueError(name + ": gamma must be positive");
        break;
      default:
        break;
    }
  }
}

Spec default_spec() {
  static constexpr std::pair<Kind, double> rows[] = {
      {Kind::vertical_flip, 0.5},   {Kind::horizontal_flip, 0.5},    {Kind::elastic, 0.5},
      {Kind::grid_distortion, 0.5}, {Kind::optical_distortion, 0.8}, {Kind::transpose, 0.5},
      {Kind::random_rotate90, 0.5}, {Kind::clahe, 0.8},              {Kind::random_brightness, 0.5},
      {Kind::random_contrast, 0.5}, {Kind::random_gamma, 0.8},
  };
  Spec s;
  for (const auto& [kind, p] : rows) s.transforms.push_back({kind, p, default_params(kind)});
  return s;
}

Spec coarse_spec() {
  Spec full = default_spec(), s;
  for (const auto& t : full.transforms) {
    const bool warp = t.kind == Kind::elastic || t.kind == Kind::grid_distortion ||
                      t.kind == Kind::optical_distortion || t.kind == Kind::clahe;
    if (!warp) s.transforms.push_back(t);
  }
  return s;
}

Image hflip(const Image& im) { return dihedral(im, Dihedral::h); }
Image vflip(const Image& im) { return dihedral(im, Dihedral::v); }
Image transpose(const Image& im) { return dihedral(im, Dihedral::t); }
Image rot90(const Image& im, int k) { return rotate(im, k); }
Mask hflip(const Mask& m) { return dihedral(m, Dihedral::h); }
Mask vflip(const Mask& m) { return dihedral(m, Dihedral::v); }
Mask transpose(const Mask& m) { return dihedral(m, Dihedral::t); }
Mask rot90(const Mask& m, int k) { return rotate(m, k); }

Image brightness(const Image& im, double beta) {
  Image out = im;
  for (auto& v : out.pixels) v = clip_round(v + 255.0 * beta);
  return out;
}

Image contrast(const Image& im, double alpha) {
  Image out = im;
  for (auto& v : out.pixels) v = clip_round(128.0 + alpha * (v - 128.0));
  return out;
}

Image gamma(const Image& im, double g) {
  std::array<std::uint8_t, 256> lut;
  for (int v = 0; v < 256; ++v) lut[v] = clip_round(255.0 * std::pow(v / 255.0, g));
  Image out = im;
  for (auto& v : out.pixels) v = lut[v];
  return out;
}

WarpField WarpField::identity(std::size_t w, std::size_t h) {
  WarpField f{w, h, std::vector<double>(w * h), std::vector<double>(w * h)};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      f.sx[y * w + x] = static_cast<double>(x);
      f.sy[y * w + x] = static_cast<double>(y);
    }
  return f;
}

WarpField elastic_field(std::size_t w, std::size_t h, double alpha, double sigma, Prng& rng) {
  std::vector<double> dx(w * h), dy(w * h);
  for (auto& v : dx) v = rng.uniform(-1.0, 1.0);
  for (auto& v : dy) v = rng.uniform(-1.0, 1.0);
  dx = smooth(dx, w, h, sigma);
  dy = smooth(dy, w, h, sigma);
  double peak = 0.0;
  for (std::size_t i = 0; i < dx.size(); ++i) peak = std::max({peak, std::abs(dx[i]), std::abs(dy[i])});
  const double scale = peak > 0.0 ? alpha / peak : 0.0;
  WarpField f = WarpField::identity(w, h);
  for (std::size_t i = 0; i < dx.size(); ++i) {
    f.sx[i] += std::clamp(dx[i] * scale, -alpha, alpha);
    f.sy[i] += std::clamp(dy[i] * scale, -alpha, alpha);
  }
  return f;
}

WarpField grid_field(std::size_t w, std::size_t h, int cells, double limit, Prng& rng) {
  const auto xe = grid_edges(w, cells, limit, rng);
  const auto ye = grid_edges(h, cells, limit, rng);
  WarpField f{w, h, std::vector<double>(w * h), std::vector<double>(w * h)};
  for (std::size_t y = 0; y < h; ++y) {
    const double sy = grid_map(static_cast<double>(y), h, ye);
    for (std::size_t x = 0; x < w; ++x) {
      f.sx[y * w + x] = grid_map(static_cast<double>(x), w, xe);
      f.sy[y * w + x] = sy;
    }
  }
  return f;
}

WarpField optical_field(std::size_t w, std::size_t h, double k1) {
  WarpField f{w, h, std::vector<double>(w * h), std::vector<double>(w * h)};
  const double cx = (static_cast<double>(w) - 1.0) / 2.0, cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double norm = std::max(1.0, std::hypot(cx, cy));
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double u = (static_cast<double>(x) - cx) / norm, v = (static_cast<double>(y) - cy) / norm;
      const double s = 1.0 + k1 * (u * u + v * v);
      f.sx[y * w + x] = cx + u * s * norm;
      f.sy[y * w + x] = cy + v * s * norm;
    }
  return f;
}

Image warp(const Image& im, const WarpField& field) {
  if (field.width != im.width || field.height != im.height)
    throw ShapeError("warp field " + std::to_string(field.width) + "x" + std::to_string(field.height) +
                     " does not match image " + std::to_string(im.width) + "x" + std::to_string(im.height));
  Image out(im.width, im.height);
  const std::size_t w = im.width, h = im.height;
  for (std::size_t i = 0; i < w * h; ++i) {
    const double sx = reflect(field.sx[i], w), sy = reflect(field.sy[i], h);
    const auto x0 = static_cast<std::size_t>(sx), y0 = static_cast<std::size_t>(sy);
    const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const double fx = sx - static_cast<double>(x0), fy = sy - static_cast<double>(y0);
    for (std::size_t c = 0; c < Image::kChannels; ++c) {
      const double top = (1.0 - fx) * im.at(y0, x0, c) + fx * im.at(y0, x1, c);
      const double bottom = (1.0 - fx) * im.at(y1, x0, c) + fx * im.at(y1, x1, c);
      out.pixels[i * Image::kChannels + c] = clip_round((1.0 - fy) * top + fy * bottom);
    }
  }
  return out;
}

Mask warp(const Mask& m, const WarpField& field) {
  if (field.width != m.width || field.height != m.height)
    throw ShapeError("warp field does not match mask size");
  Mask out(m.width, m.height);
  for (std::size_t i = 0; i < m.bits.size(); ++i) {
    const auto x = static_cast<std::size_t>(std::lround(reflect(field.sx[i], m.width)));
    const auto y = static_cast<std::size_t>(std::lround(reflect(field.sy[i], m.height)));
    out.bits[i] = m.at(std::min(y, m.height - 1), std::min(x, m.width - 1));
  }
  return out;
}

AugmentedPair apply_pipeline(const Image& image, const std::optional<Mask>& mask, const Spec& spec,
                             std::uint64_t seed, std::uint64_t sample_index) {
  spec.validate();
  if (mask && (mask->width != image.width || mask->height != image.height))
    throw ShapeError("mask size does not match image size");
  AugmentedPair out{image, mask, {}};
  Prng rng(Prng::derive(seed, sample_index));

  auto geometric = [&](auto&& fn) {
    out.image = fn(out.image);
    if (out.mask) out.mask = fn(*out.mask);
  };
  auto warp_both = [&](const WarpField& f) {
    out.image = warp(out.image, f);
    if (out.mask) out.mask = warp(*out.mask, f);
  };

  for (const auto& t : spec.transforms) {
    if (!rng.bernoulli(t.p)) continue;
    const auto& q = t.params;
    const std::size_t w = out.image.width, h = out.image.height;
    switch (t.kind) {
      case Kind::vertical_flip:
        geometric([](const auto& v) { return vflip(v); });
        out.applied.push_back(describe(t.kind));
        break;
      case Kind::horizontal_flip:
        geometric([](const auto& v) { return hflip(v); });
        out.applied.push_back(describe(t.kind));
        break;
      case Kind::transpose:
        geometric([](const auto& v) { return transpose(v); });
        out.applied.push_back(describe(t.kind));
        break;
      case Kind::random_rotate90: {
        const int k = static_cast<int>(rng.uniform_int(0, 3));
        geometric([k](const auto& v) { return rot90(v, k); });
        out.applied.push_back(describe(t.kind, fmt("k", k)));
        break;
      }
      case Kind::elastic: {
        const auto f = elastic_field(w, h, q.alpha, q.sigma, rng);
        if (q.alpha > 0.0) warp_both(f);
        out.applied.push_back(describe(t.kind, fmt("alpha", q.alpha)));
        break;
      }
      case Kind::grid_distortion: {
        const auto f = grid_field(w, h, q.cells, q.limit, rng);
        if (q.limit > 0.0) warp_both(f);
        out.applied.push_back(describe(t.kind, fmt("limit", q.limit)));
        break;
      }
      case Kind::optical_distortion: {
        const double k1 = rng.uniform(q.lo, q.hi);
        if (k1 != 0.0) warp_both(optical_field(w, h, k1));
        out.applied.push_back(describe(t.kind, fmt("k1", k1)));
        break;
      }
      case Kind::clahe:
        out.image = clahe(out.image, q.clip_limit, q.tiles);
        out.applied.push_back(describe(t.kind, fmt("clip", q.clip_limit)));
        break;
      case Kind::random_brightness: {
        const double beta = rng.uniform(q.lo, q.hi);
        out.image = brightness(out.image, beta);
        out.applied.push_back(describe(t.kind, fmt("beta", beta)));
        break;
      }
      case Kind::random_contrast: {
        const double alpha = rng.uniform(q.lo, q.hi);
        out.image = contrast(out.image, alpha);
        out.applied.push_back(describe(t.kind, fmt("alpha", alpha)));
        break;
      }
      case Kind::random_gamma: {
        const double g = rng.uniform(q.lo, q.hi);
        out.image = gamma(out.image, g);
        out.applied.push_back(describe(t.kind, fmt("gamma", g)));
        break;
      }
    }
  }
  return out;
}

}  // namespace insul::augment
