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

#include <fstream>
#include <sstream>

#include "insul/data.hpp"
#include "insul/error.hpp"
#include "insul/log.hpp"
#include "insul/prng.hpp"
#include "insul/synthetic.hpp"
#include "temp_dir.hpp"

using namespace insul;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

Image random_image(std::size_t w, std::size_t h, Prng& rng) {
  Image im(w, h);
  for (auto& v : im.pixels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return im;
}

}  // namespace

TEST_CASE("png round trips") {
  testing::TempDir dir;
  Prng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = static_cast<std::size_t>(rng.uniform_int(1, 40));
    const auto h = static_cast<std::size_t>(rng.uniform_int(1, 40));
    const auto im = random_image(w, h, rng);
    write_image(dir / "a.png", im);
    CHECK(read_image(dir / "a.png") == im);
    Mask m(w, h);
    for (auto& b : m.bits) b = rng.bernoulli(0.5);
    write_mask(dir / "m.png", m);
    CHECK(read_mask(dir / "m.png") == m);
  }
}

TEST_CASE("mask ingestion thresholds at 128") {
  testing::TempDir dir;
  Image im(3, 1);
  const std::uint8_t values[] = {255, 0, 200};
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t c = 0; c < 3; ++c) im.at(0, x, c) = values[x];
  write_image(dir / "m.png", im);
  std::vector<std::string> warnings;
  logging::ScopedSink sink([&](const std::string& w) { warnings.push_back(w); });
  const auto m = read_mask(dir / "m.png");
  CHECK(m.bits == std::vector<std::uint8_t>{1, 0, 1});
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("thresholded at 128") != std::string::npos);

  Mask clean(2, 1);
  clean.bits = {1, 0};
  write_mask(dir / "c.png", clean);
  (void)read_mask(dir / "c.png");
  CHECK(warnings.size() == 1);
}

TEST_CASE("png errors") {
  testing::TempDir dir;
  write_text(dir / "x.png", "P6 not a png at all");
  CHECK_THROWS_AS(read_image(dir / "x.png"), FormatError);
  CHECK_THROWS_AS(read_image(dir / "missing.png"), IoError);
  Mask bad(1, 1);
  bad.bits[0] = 7;
  CHECK_THROWS_AS(write_mask(dir / "b.png", bad), ValueError);
}

TEST_CASE("tensor conversion") {
  Image im(2, 1);
  im.at(0, 0, 0) = 255;
  im.at(0, 1, 2) = 51;
  const auto t = to_tensor(im, Dtype::f64);
  CHECK(t.shape() == Shape{3, 1, 2});
  CHECK(t.at({0, 0, 0}) == 1.0);
  CHECK(t.at({1, 0, 0}) == 0.0);
  CHECK(t.at({2, 0, 1}) == doctest::Approx(0.2));

  Prng rng(22);
  const auto r = random_image(9, 7, rng);
  CHECK(from_tensor(to_tensor(r)) == r);
  for (auto dtype : {Dtype::f32, Dtype::f64}) {
    const auto back = to_tensor(from_tensor(to_tensor(r, dtype)), Dtype::f64).to_vector();
    const auto orig = to_tensor(r, Dtype::f64).to_vector();
    for (std::size_t i = 0; i < orig.size(); ++i) CHECK(std::abs(back[i] - orig[i]) <= 1.0 / 510.0);
  }
  // Out-of-range values clip; halves round up.
  const auto odd = Tensor::from_data({3, 1, 1}, {-0.5, 2.0, 0.5 / 255.0}, Dtype::f64);
  const auto c = from_tensor(odd);
  CHECK(c.pixels == std::vector<std::uint8_t>{0, 255, 1});

  const Image imgs[] = {r, r};
  const auto b = stack_images(imgs);
  CHECK(b.shape() == Shape{2, 3, 7, 9});
  CHECK_THROWS_AS((stack_images(std::vector<Image>{r, Image(2, 2)})), ShapeError);
}

TEST_CASE("manifest") {
  testing::TempDir dir;
  fs::create_directories(dir / "images");
  write_image(dir / "images/a.png", Image(2, 2));
  write_image(dir / "images/b.png", Image(2, 2));
  write_mask(dir / "images/am.png", Mask(2, 2));

  write_text(dir / "empty.csv", "image,mask,label,split\n");
  CHECK(load_manifest(dir / "empty.csv").empty());

  const std::vector<Sample> rows = {
      {dir / "images/a.png", dir / "images/am.png", 2, Split::train},
      {dir / "images/b.png", std::nullopt, std::nullopt, Split::val},
  };
  write_manifest(dir / "m.csv", rows);
  CHECK(slurp(dir / "m.csv") == "image,mask,label,split\nimages/a.png,images/am.png,2,train\nimages/b.png,,,val\n");
  CHECK(load_manifest(dir / "m.csv") == rows);
  CHECK(select(rows, Split::val).size() == 1);

  write_text(dir / "bad_label.csv", "image,mask,label,split\nimages/a.png,,1,train\nimages/a.png,,5,train\n");
  try {
    load_manifest(dir / "bad_label.csv");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  write_text(dir / "bad_header.csv", "image,label\n");
  CHECK_THROWS_AS(load_manifest(dir / "bad_header.csv"), FormatError);
  write_text(dir / "bad_split.csv", "image,mask,label,split\nimages/a.png,,1,test\n");
  CHECK_THROWS_AS(load_manifest(dir / "bad_split.csv"), FormatError);
  write_text(dir / "dangling.csv", "image,mask,label,split\nimages/nope.png,,1,train\n");
  try {
    load_manifest(dir / "dangling.csv");
    FAIL("expected IoError");
  } catch (const FormatError&) {
    FAIL("dangling path is not a format error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("nope.png") != std::string::npos);
  }
}

TEST_CASE("synthetic scenes") {
  synth::SceneSpec spec;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    spec.defect = static_cast<Defect>(seed % 4);
    const auto s = synth::render_scene(spec, seed);
    CHECK(s.label == static_cast<int>(seed % 4));
    const double f = s.mask.area_fraction();
    CHECK(f >= 0.02);
    CHECK(f <= 0.5);
    CHECK(s.caps >= 6);
    CHECK(s.caps <= 12);
  }
  const auto a = synth::render_scene(spec, 7), b = synth::render_scene(spec, 7);
  CHECK(a.image == b.image);
  CHECK(a.mask == b.mask);

  // The defect is the only difference between scenes sharing a seed.
  synth::SceneSpec healthy, missing = spec;
  missing.defect = Defect::missing_cap;
  healthy.defect = Defect::healthy;
  const auto h = synth::render_scene(healthy, 3), m = synth::render_scene(missing, 3);
  CHECK(m.mask.count() < h.mask.count());

  spec.min_caps = 2;
  CHECK_THROWS_AS(synth::render_scene(spec, 0), ValueError);
}

TEST_CASE("synthetic mask covers exactly the insulator pixels") {
  // Over a black and a white backdrop the insulator pixels are identical and
  // every background pixel differs, so equality recovers the painted set.
  synth::SceneSpec spec;
  spec.width = spec.height = 64;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    spec.defect = static_cast<Defect>(seed % 4);
    const auto black = synth::render_scene(spec, seed, Image(64, 64, 0));
    const auto white = synth::render_scene(spec, seed, Image(64, 64, 255));
    Mask painted(64, 64);
    for (std::size_t i = 0; i < painted.bits.size(); ++i) {
      bool same = true;
      for (std::size_t c = 0; c < 3; ++c) same &= black.image.pixels[i * 3 + c] == white.image.pixels[i * 3 + c];
      painted.bits[i] = same;
    }
    CHECK(painted == black.mask);
    CHECK(black.mask == white.mask);
    CHECK(synth::render_scene(spec, seed).mask == black.mask);
  }
}

TEST_CASE("generate_dataset") {
  testing::TempDir dir;
  synth::GenerateOptions opt;
  opt.scene.width = opt.scene.height = 32;
  opt.train_per_class = 1;
  opt.seed = 9;
  const auto rows = synth::generate_dataset(opt, dir / "a");
  CHECK(rows.size() == 4);
  CHECK(load_manifest(dir / "a/manifest.csv") == rows);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) files += e.is_regular_file();
  CHECK(files == 9);
  for (int c = 0; c < 4; ++c) CHECK(rows[static_cast<std::size_t>(c)].label == c);

  synth::generate_dataset(opt, dir / "b");
  for (const auto& e : fs::recursive_directory_iterator(dir / "a"))
    if (e.is_regular_file()) CHECK(slurp(e.path()) == slurp(dir / "b" / fs::relative(e.path(), dir / "a")));

  opt.val_per_class = 2;
  const auto both = synth::generate_dataset(opt, dir / "c");
  CHECK(select(both, Split::train).size() == 4);
  CHECK(select(both, Split::val).size() == 8);

  const auto examples = load_examples(both);
  CHECK(examples.size() == 12);
  CHECK(examples[0].mask.has_value());
}
