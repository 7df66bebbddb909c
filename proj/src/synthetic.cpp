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

#include "insul/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "insul/error.hpp"
#include "insul/prng.hpp"

namespace insul::synth {

namespace {

using Rgb = std::array<double, 3>;

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

Rgb scaled(const Rgb& c, double f) { return {c[0] * f, c[1] * f, c[2] * f}; }

Rgb random_color(Prng& r, const Rgb& lo, const Rgb& hi) {
  return {r.uniform(lo[0], hi[0]), r.uniform(lo[1], hi[1]), r.uniform(lo[2], hi[2])};
}

void put(Image& im, std::size_t y, std::size_t x, const Rgb& c) {
  for (std::size_t k = 0; k < 3; ++k)
    im.at(y, x, k) = static_cast<std::uint8_t>(std::clamp(std::lround(c[k]), 0L, 255L));
}

// Smooth value noise in [0, 1]: random lattice values bilinearly interpolated.
class ValueNoise {
 public:
  ValueNoise(std::size_t w, std::size_t h, double cell, Prng& r)
      : cell_(cell), gw_(static_cast<std::size_t>(w / cell) + 2), gh_(static_cast<std::size_t>(h / cell) + 2) {
    lattice_.resize(gw_ * gh_);
    for (auto& v : lattice_) v = r.uniform();
  }
  double operator()(double x, double y) const {
    const double gx = x / cell_, gy = y / cell_;
    const auto ix = static_cast<std::size_t>(gx), iy = static_cast<std::size_t>(gy);
    const double fx = gx - static_cast<double>(ix), fy = gy - static_cast<double>(iy);
    const double sx = fx * fx * (3 - 2 * fx), sy = fy * fy * (3 - 2 * fy);
    auto at = [&](std::size_t a, std::size_t b) { return lattice_[std::min(b, gh_ - 1) * gw_ + std::min(a, gw_ - 1)]; };
    const double top = at(ix, iy) + (at(ix + 1, iy) - at(ix, iy)) * sx;
    const double bottom = at(ix, iy + 1) + (at(ix + 1, iy + 1) - at(ix, iy + 1)) * sx;
    return top + (bottom - top) * sy;
  }

 private:
  double cell_;
  std::size_t gw_, gh_;
  std::vector<double> lattice_;
};

void paint_gradient(Image& im, Prng& r) {
  const Rgb top = random_color(r, {60, 110, 170}, {130, 170, 235});
  const Rgb bottom = random_color(r, {130, 150, 170}, {190, 205, 225});
  const double angle = r.uniform(-0.6, 0.6);
  const double dx = std::sin(angle), dy = std::cos(angle);
  const double w = static_cast<double>(im.width), h = static_cast<double>(im.height);
  const double span = std::abs(dx) * w + std::abs(dy) * h;
  for (std::size_t y = 0; y < im.height; ++y)
    for (std::size_t x = 0; x < im.width; ++x) {
      const double t = ((static_cast<double>(x) - w / 2) * dx + (static_cast<double>(y) - h / 2) * dy) / span + 0.5;
      put(im, y, x, mix(top, bottom, std::clamp(t, 0.0, 1.0)));
    }
}

void paint_noise(Image& im, Prng& r) {
  const double m = static_cast<double>(std::min(im.width, im.height));
  const ValueNoise coarse(im.width, im.height, m / 4, r), fine(im.width, im.height, m / 16, r);
  const Rgb dark = random_color(r, {35, 50, 20}, {70, 90, 45});
  const Rgb light = random_color(r, {95, 110, 55}, {150, 145, 95});
  for (std::size_t y = 0; y < im.height; ++y)
    for (std::size_t x = 0; x < im.width; ++x) {
      const double t = 0.65 * coarse(static_cast<double>(x), static_cast<double>(y)) +
                       0.35 * fine(static_cast<double>(x), static_cast<double>(y));
      put(im, y, x, mix(dark, light, t));
    }
}

// Sky with lattice members and wires, loosely a tower structure.
void paint_clutter(Image& im, Prng& r) {
  paint_gradient(im, r);
  const double w = static_cast<double>(im.width), h = static_cast<double>(im.height);
  const double m = std::min(w, h);
  const int bars = static_cast<int>(r.uniform_int(5, 10));
  for (int b = 0; b < bars; ++b) {
    const double x0 = r.uniform(0, w), y0 = r.uniform(0, h);
    const double angle = r.uniform(0, std::numbers::pi);
    const double half = r.uniform(0.004, 0.018) * m + 0.5;
    const double shade = r.uniform(45, 110);
    const Rgb c{shade, shade, shade * r.uniform(0.95, 1.1)};
    const double nx = -std::sin(angle), ny = std::cos(angle);
    for (std::size_t y = 0; y < im.height; ++y)
      for (std::size_t x = 0; x < im.width; ++x) {
        const double d = (static_cast<double>(x) + 0.5 - x0) * nx + (static_cast<double>(y) + 0.5 - y0) * ny;
        if (std::abs(d) <= half) put(im, y, x, c);
      }
  }
  const int boxes = static_cast<int>(r.uniform_int(1, 4));
  for (int b = 0; b < boxes; ++b) {
    const double bw = r.uniform(0.05, 0.2) * m, bh = r.uniform(0.05, 0.2) * m;
    const double x0 = r.uniform(0, w - bw), y0 = r.uniform(0, h - bh);
    const Rgb c = random_color(r, {70, 70, 70}, {130, 125, 120});
    for (std::size_t y = static_cast<std::size_t>(y0); y < std::min(im.height, static_cast<std::size_t>(y0 + bh)); ++y)
      for (std::size_t x = static_cast<std::size_t>(x0); x < std::min(im.width, static_cast<std::size_t>(x0 + bw)); ++x)
        put(im, y, x, c);
  }
}

// A wedge-shaped piece knocked out of one side of a disc, expressed as the
// intersection of two half-planes in disc-local coordinates.
struct Break {
  int cap = -1;
  int count = 0;
  double n1u = 0, n1v = 0, d1 = 0, n2u = 0, n2v = 0, d2 = 0;
  bool removes(double du, double v) const {
    return n1u * du + n1v * v > d1 && n2u * du + n2v * v > d2;
  }
};

}  // namespace

std::string_view to_string(Background b) {
  switch (b) {
    case Background::gradient:
      return "gradient";
    case Background::noise:
      return "noise";
    case Background::clutter:
      return "clutter";
  }
  return "?";
}

void SceneSpec::validate() const {
  if (width < 8 || height < 8) throw ValueError("scene must be at least 8x8 pixels");
  if (min_caps < 3 || max_caps < min_caps) throw ValueError("cap count range must satisfy 3 <= min <= max");
  if (!(cap_radius > 0.0 && cap_radius <= 0.3)) throw ValueError("cap radius must be in (0, 0.3]");
  if (!(rod_width > 0.0 && rod_width < cap_radius)) throw ValueError("rod width must be in (0, cap radius)");
}

Scene render_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  Prng r(Prng::derive(seed, 0));
  Image backdrop(spec.width, spec.height);
  const auto kind = spec.background.value_or(static_cast<Background>(r.uniform_int(0, 2)));
  switch (kind) {
    case Background::gradient:
      paint_gradient(backdrop, r);
      break;
    case Background::noise:
      paint_noise(backdrop, r);
      break;
    case Background::clutter:
      paint_clutter(backdrop, r);
      break;
  }
  Scene scene = render_scene(spec, seed, backdrop);
  scene.background = kind;
  return scene;
}

Scene render_scene(const SceneSpec& spec, std::uint64_t seed, const Image& backdrop) {
  spec.validate();
  if (backdrop.width != spec.width || backdrop.height != spec.height)
    throw ShapeError("backdrop size does not match the scene size");
  Prng r(Prng::derive(seed, 1));
  Scene scene;
  scene.label = static_cast<int>(spec.defect);
  scene.image = backdrop;
  scene.mask = Mask(spec.width, spec.height);

  // Chain geometry in units of pixels, axis-aligned local frame (u along the
  // chain from its first cap, v across it).
  const double m = static_cast<double>(std::min(spec.width, spec.height));
  const int caps = static_cast<int>(r.uniform_int(spec.min_caps, spec.max_caps));
  scene.caps = caps;
  const double length = r.uniform(0.55, 0.72) * m;
  const double pitch = length / caps;
  const double half_thick = 0.34 * pitch;
  const double radius = spec.cap_radius * m * r.uniform(0.85, 1.15);
  const double rod = std::max(0.75, spec.rod_width * m / 2);
  const double fitting = 0.06 * m;
  const double theta = r.uniform(0.0, std::numbers::pi);
  const double cu = std::cos(theta), su = std::sin(theta);
  const double cx = static_cast<double>(spec.width) / 2 + r.uniform(-0.05, 0.05) * m;
  const double cy = static_cast<double>(spec.height) / 2 + r.uniform(-0.05, 0.05) * m;

  const bool porcelain = r.bernoulli(0.5);
  const Rgb body = porcelain ? random_color(r, {200, 195, 185}, {240, 238, 230}) : random_color(r, {60, 150, 130}, {110, 200, 175});
  const Rgb metal = random_color(r, {120, 120, 125}, {165, 165, 170});
  const Rgb soot = random_color(r, {45, 28, 15}, {80, 50, 30});

  int missing = -1;
  Break brk;
  std::vector<bool> burned(static_cast<std::size_t>(caps), false);
  switch (spec.defect) {
    case Defect::missing_cap:
      missing = static_cast<int>(r.uniform_int(1, caps - 2));
      break;
    case Defect::burned: {
      const int first = static_cast<int>(r.uniform_int(0, caps - 3));
      const int count = static_cast<int>(r.uniform_int(2, 3));
      for (int i = first; i < first + count && i < caps; ++i) burned[static_cast<std::size_t>(i)] = true;
      break;
    }
    case Defect::broken: {
      brk.cap = static_cast<int>(r.uniform_int(1, caps - 3));
      brk.count = static_cast<int>(r.uniform_int(1, 2));
      const double side = r.bernoulli(0.5) ? 1.0 : -1.0;
      const double spread = r.uniform(0.4, 0.8);
      const double tilt = r.uniform(-0.3, 0.3);
      brk.n1u = std::sin(tilt + spread), brk.n1v = side * std::cos(tilt + spread);
      brk.n2u = std::sin(tilt - spread), brk.n2v = side * std::cos(tilt - spread);
      brk.d1 = r.uniform(-0.15, 0.1) * radius;
      brk.d2 = r.uniform(-0.15, 0.1) * radius;
      break;
    }
    case Defect::healthy:
      break;
  }

  const ValueNoise blotch(spec.width, spec.height, std::max(2.0, m / 24), r);
  for (std::size_t y = 0; y < spec.height; ++y)
    for (std::size_t x = 0; x < spec.width; ++x) {
      const double dx = static_cast<double>(x) + 0.5 - cx, dy = static_cast<double>(y) + 0.5 - cy;
      const double u = dx * cu + dy * su + length / 2;
      const double v = -dx * su + dy * cu;

      std::optional<Rgb> color;
      const int i = static_cast<int>(std::floor(u / pitch));
      if (i >= 0 && i < caps && i != missing) {
        const double du = u - (i + 0.5) * pitch;
        const double e = (du / half_thick) * (du / half_thick) + (v / radius) * (v / radius);
        if (e <= 1.0 && !(i >= brk.cap && i < brk.cap + brk.count && brk.removes(du, v) && std::abs(v) > rod)) {
          const double shade = (0.6 + 0.4 * std::sqrt(std::max(0.0, 1 - (v / radius) * (v / radius)))) *
                               (0.85 + 0.15 * std::sqrt(std::max(0.0, 1 - (du / half_thick) * (du / half_thick))));
          Rgb c = scaled(body, shade);
          if (burned[static_cast<std::size_t>(i)])
            c = mix(c, soot, 0.65 + 0.3 * blotch(static_cast<double>(x), static_cast<double>(y)));
          color = c;
        }
      }
      if (!color && std::abs(v) <= rod && u >= -fitting && u <= length + fitting) {
        const double t = std::abs(v) / rod;
        color = scaled(metal, 1.0 - 0.35 * t * t);
      }
      if (!color) {
        // End fittings: small discs at both ends of the rod.
        const double r2 = 0.45 * radius;
        for (double end : {-fitting, length + fitting})
          if ((u - end) * (u - end) + v * v <= r2 * r2) color = scaled(metal, 0.9);
      }
      if (color) {
        put(scene.image, y, x, *color);
        scene.mask.at(y, x) = 1;
      }
    }

  // Sensor noise on every pixel; does not move pixels in or out of the mask.
  Prng noise(Prng::derive(seed, 2));
  for (auto& p : scene.image.pixels)
    p = static_cast<std::uint8_t>(std::clamp(static_cast<long>(p) + noise.uniform_int(-4, 4), 0L, 255L));
  return scene;
}

std::vector<Scene> render_balanced(const SceneSpec& spec, int per_class, std::uint64_t seed,
                                   std::uint64_t first_index) {
  std::vector<Scene> out;
  for (int i = 0; i < per_class * kNumClasses; ++i) {
    SceneSpec s = spec;
    s.defect = static_cast<Defect>(i % kNumClasses);
    out.push_back(render_scene(s, Prng::derive(seed, first_index + static_cast<std::uint64_t>(i))));
  }
  return out;
}

std::vector<Sample> generate_dataset(const GenerateOptions& options, const fs::path& out_dir) {
  options.scene.validate();
  if (options.train_per_class < 0 || options.val_per_class < 0)
    throw ValueError("per-class counts must be non-negative");
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (!ec) fs::create_directories(out_dir / "masks", ec);
  if (ec) throw IoError("cannot create dataset directory '" + out_dir.string() + "': " + ec.message());

  std::vector<Sample> samples;
  std::uint64_t index = 0;
  for (Split split : {Split::train, Split::val}) {
    const int n = (split == Split::train ? options.train_per_class : options.val_per_class) * kNumClasses;
    for (int i = 0; i < n; ++i, ++index) {
      SceneSpec s = options.scene;
      s.defect = static_cast<Defect>(i % kNumClasses);
      const Scene scene = render_scene(s, Prng::derive(options.seed, index));
      char name[64];
      std::snprintf(name, sizeof name, "%s_%04d.png", std::string(to_string(split)).c_str(), i);
      Sample sample{out_dir / "images" / name, out_dir / "masks" / name, scene.label, split};
      write_image(sample.image, scene.image);
      write_mask(*sample.mask, scene.mask);
      samples.push_back(std::move(sample));
    }
  }
  write_manifest(out_dir / "manifest.csv", samples);
  return samples;
}

}  // namespace insul::synth
