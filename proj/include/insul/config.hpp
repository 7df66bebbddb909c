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

// Run configuration: one JSON document holding every tunable.
//
//   {
//     "seed": 0,
//     "run_dir": "runs/default",
//     "data":           {"manifest": "", "image_size": 128},
//     "generate":       {"per_class": 10, "val_per_class": 2, "out": "data"},
//     "init":           {"scheme": "he_normal", "value": 0.0},
//     "unet":           {"depth": 3, "base_channels": 16},
//     "vgg":            {"blocks": [[16, 2], [32, 2], [64, 2]], "hidden": 64},
//     "segmentation":   {"lr", "momentum", "factor", "sequences", "epochs_per_sequence",
//                        "batch_size", "loss", "w1", "w2", "threshold",
//                        "first_augment", "second_augment"},
//     "classification": {"lr", "momentum", "factor", "batch_size", "regime",
//                        "outer_epochs", "inner_epochs", "alternate": {"lr", "momentum", "factor"},
//                        "augment", "mask_source", "init_from"},
//     "pipeline":       {"threshold": 0.5, "segmenter": "", "classifier": ""},
//     "sweep":          {"grid": "0.1:0.9:0.1"}
//   }
//
// Every key is optional and falls back to the default above. An augmentation
// spec is either a preset name ("default", "coarse", "none") or a list of
// {"kind": "VerticalFlip", "p": 0.5, ...params} objects.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "insul/models.hpp"
#include "insul/pipeline.hpp"
#include "insul/training.hpp"

namespace insul {

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path run_dir = "runs/default";

  std::filesystem::path manifest;
  int image_size = 128;

  int per_class = 10;
  int val_per_class = 2;
  std::filesystem::path generate_out = "data";

  InitScheme init_scheme = InitScheme::he_normal;
  double init_value = 0.0;
  UNetConfig unet;
  VggConfig vgg;

  SegTrainConfig segmentation;
  ClsTrainConfig classification;
  MaskSource mask_source = MaskSource::segmenter;
  std::filesystem::path cls_init_from;  // ground-truth checkpoint for pre-trained regimes

  PipelineConfig pipeline;
  std::string sweep_grid = "0.1:0.9:0.1";

  InitSpec init() const { return {init_scheme, init_value, seed}; }
};

/// Reads a configuration document. Collects every problem (unknown keys,
/// wrong types, out-of-range values) and throws one ConfigError listing them.
RunConfig config_from_json(const nlohmann::json& doc);
/// Loads a JSON file. Throws IoError when unreadable and ConfigError on a
/// parse or validation failure.
nlohmann::json load_config_json(const std::filesystem::path& path);

/// The effective configuration with every key present.
nlohmann::ordered_json config_to_json(const RunConfig& cfg);

/// Sets `doc[a][b]... = value` for a dotted key. The value is parsed as JSON
/// when possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& dotted_key, const std::string& value);

/// Throws ConfigError naming each key in `keys` whose path is empty.
/// Known keys: data.manifest, pipeline.segmenter, pipeline.classifier,
/// classification.init_from.
void require_paths(const RunConfig& cfg, std::span<const std::string> keys);

augment::Spec augment_preset(const std::string& name);

std::string to_string(MaskSource source);
MaskSource parse_mask_source(const std::string& name);

}  // namespace insul
