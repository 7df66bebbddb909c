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

// Runs the insul binary end to end.

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "insul/checkpoint.hpp"
#include "insul/data.hpp"
#include "insul/pipeline.hpp"
#include "temp_dir.hpp"

using namespace insul;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run insul_cli(const testing::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.path().string() + "' && '" INSUL_CLI_PATH "' " + args + " >'" + out.string() +
                          "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Tiny networks at 32x32 so each command finishes in well under a second.
const std::string kSmall =
    "--image-size 32 --set unet.depth=2 --set unet.base_channels=4 --set vgg.blocks=[[8,1],[16,1]] "
    "--set vgg.hidden=16 ";

}  // namespace

TEST_CASE("gen-data") {
  testing::TempDir dir;
  auto r = insul_cli(dir, "gen-data --per-class 1 --val-per-class 0 --image-size 32 --seed 5 --out a");
  REQUIRE(r.code == 0);
  CHECK(load_manifest(dir / "a/manifest.csv").size() == 4);
  REQUIRE(insul_cli(dir, "gen-data --per-class 1 --val-per-class 0 --image-size 32 --seed 5 --out b").code == 0);
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir / "a");
    CHECK(slurp(e.path()) == slurp(dir / "b" / rel));
  }

  std::ofstream(dir / "blocker") << "a file, not a directory";
  r = insul_cli(dir, "gen-data --per-class 1 --out blocker/sub");
  CHECK(r.code == 2);
  CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("validation errors exit 1 and name the keys") {
  testing::TempDir dir;
  auto r = insul_cli(dir, "train-seg");
  CHECK(r.code == 1);
  CHECK(r.err.find("data.manifest") != std::string::npos);

  r = insul_cli(dir, "train-cls --manifest m.csv --regime reset,alt --set classification.lr=-1 --set bogus=1");
  CHECK(r.code == 1);
  CHECK(r.err.find("bogus: unknown key") != std::string::npos);
  CHECK(r.err.find("classification.regime") != std::string::npos);
  CHECK(r.err.find("learning rate") != std::string::npos);

  CHECK(insul_cli(dir, "train-seg --no-such-flag").code == 1);
  CHECK(insul_cli(dir, "").code == 1);
  CHECK(insul_cli(dir, "--help").code == 0);
}

TEST_CASE("dry run prints the resolved config and trains nothing") {
  testing::TempDir dir;
  std::ofstream(dir / "cfg.json") << R"({"classification": {"regime": "alt", "lr": 0.02}, "seed": 4})";
  const auto r = insul_cli(dir, "--config cfg.json train-cls --manifest m.csv --segmenter s.ckpt --init-from g.ckpt "
                                "--regime pre,reset --run-dir out --dry-run");
  REQUIRE(r.code == 0);
  const auto cfg = nlohmann::json::parse(r.out);
  CHECK(cfg["classification"]["regime"] == "pre,reset");
  CHECK(cfg["classification"]["lr"] == 0.02);
  CHECK(cfg["seed"] == 4);
  CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("train, sweep, eval, predict, ablate") {
  testing::TempDir dir;
  REQUIRE(insul_cli(dir, "gen-data --per-class 1 --val-per-class 1 --image-size 32 --seed 2 --out data").code == 0);
  const std::string common = kSmall + "--manifest data/manifest.csv ";

  auto r = insul_cli(dir, common + "train-seg --run-dir seg --set segmentation.epochs_per_sequence=1");
  REQUIRE(r.code == 0);
  for (auto f : {"config.json", "metadata.txt", "train_log.csv", "segmenter.ckpt"}) CHECK(fs::exists(dir / "seg" / f));
  CHECK(slurp(dir / "seg/metadata.txt").find("started: ") != std::string::npos);
  CHECK(slurp(dir / "seg/config.json").find("started") == std::string::npos);

  SUBCASE("identical runs give identical artifacts") {
    REQUIRE(insul_cli(dir, common + "train-seg --run-dir seg2 --set segmentation.epochs_per_sequence=1").code == 0);
    CHECK(slurp(dir / "seg/train_log.csv") == slurp(dir / "seg2/train_log.csv"));
    CHECK(slurp(dir / "seg/segmenter.ckpt") == slurp(dir / "seg2/segmenter.ckpt"));
  }
  SUBCASE("sweep emits one row per grid value") {
    r = insul_cli(dir, common + "sweep --segmenter seg/segmenter.ckpt --grid 0.1:0.9:0.1 --run-dir sw");
    REQUIRE(r.code == 0);
    std::istringstream csv(slurp(dir / "sw/sweep.csv"));
    std::string line;
    int rows = -1;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 9);
  }
  SUBCASE("overfit checkpoints predict the healthy sample as class 0") {
    // The classifier trains on segmenter-composed images, which is exactly
    // what predict feeds it.
    auto samples = select(load_manifest(dir / "data/manifest.csv"), Split::train);
    write_manifest(dir / "train.csv", samples);
    r = insul_cli(dir, kSmall + "train-seg --manifest train.csv --run-dir fit --set segmentation.sequences=1 "
                                "--set segmentation.epochs_per_sequence=60 --set segmentation.batch_size=1 "
                                "--set segmentation.first_augment=none");
    REQUIRE(r.code == 0);
    r = insul_cli(dir, kSmall +
                           "train-cls --segmenter fit/segmenter.ckpt --run-dir cls --set classification.augment=none "
                           "--set classification.lr=0.01 --set classification.momentum=0.9 "
                           "--set classification.factor=1 --set classification.outer_epochs=10 "
                           "--set classification.inner_epochs=10 --set classification.batch_size=4 "
                           "--manifest train.csv");
    REQUIRE(r.code == 0);
    fs::path healthy;
    for (const auto& s : samples)
      if (s.label == 0) healthy = s.image;
    r = insul_cli(dir, kSmall + "predict --segmenter fit/segmenter.ckpt --classifier cls/classifier.ckpt --run-dir p '" +
                           healthy.string() + "'");
    REQUIRE(r.code == 0);
    const auto rec = nlohmann::json::parse(slurp(dir / "p/predictions.jsonl"));
    CHECK(rec["class"] == 0);
    CHECK(rec["class_name"] == "healthy");
  }
  SUBCASE("eval with a self-consistent classifier reports accuracy 1") {
    // Relabel the data with the classifier's own predictions on
    // ground-truth-composed images.
    VggLite vgg({{{8, 1}, {16, 1}}, 16, 3, 32, 32}, {InitScheme::he_normal, 0.0, 3});
    save_checkpoint(dir / "oracle.ckpt", vgg);
    auto samples = load_manifest(dir / "data/manifest.csv");
    std::vector<Image> composed;
    for (const auto& s : samples) composed.push_back(compose_mask(read_image(s.image), read_mask(*s.mask)));
    const auto probs = classify_probabilities(vgg, composed);
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i].label = argmax(probs[i]);
    write_manifest(dir / "data/oracle.csv", samples);
    r = insul_cli(dir, kSmall + "eval --mode classification --classifier oracle.ckpt --manifest data/oracle.csv "
                                "--split train --run-dir ev");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("accuracy 1.0000") != std::string::npos);
    CHECK(fs::exists(dir / "ev/metrics.csv"));
  }
  SUBCASE("architecture mismatch names both descriptors") {
    r = insul_cli(dir, common + "eval --segmenter seg/segmenter.ckpt --classifier seg/segmenter.ckpt --run-dir bad");
    CHECK(r.code == 2);
    CHECK(r.err.find("expected: vgg-lite") != std::string::npos);
    CHECK(r.err.find("found:    unet-lite") != std::string::npos);
  }
  SUBCASE("ablate writes the regime summary") {
    r = insul_cli(dir, common + "ablate --segmenter seg/segmenter.ckpt --run-dir abl "
                                "--set classification.outer_epochs=1 --set classification.inner_epochs=1");
    REQUIRE(r.code == 0);
    const auto csv = slurp(dir / "abl/regime_summary.csv");
    CHECK(csv.rfind("training,pre_trained,reset,alternating,accuracy\n", 0) == 0);
    CHECK(csv.find("\n4,x,x,-,") != std::string::npos);
    CHECK(csv.find("\nseparated,") != std::string::npos);
  }
}
