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

#include "insul/config.hpp"

#include <fstream>
#include <functional>
#include <set>

#include "insul/error.hpp"

namespace insul {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string join_key(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Walks a document and records problems instead of throwing, so a single
// pass reports everything wrong with a file.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& problems) : problems_(problems) {}

  // Returns false (and records a problem) unless `j` is an object whose keys
  // all appear in `allowed`.
  bool object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
      problems_.push_back((path.empty() ? "configuration" : path) + ": expected an object");
      return false;
    }
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
      if (!ok.contains(k)) problems_.push_back(join_key(path, k) + ": unknown key");
    return true;
  }

  void number(const json& j, const std::string& path, const char* key, double& out) {
    with(j, path, key, [&](const json& v, const std::string& p) {
      if (!v.is_number()) return fail(p, "expected a number");
      out = v.get<double>();
    });
  }

  template <typename Int>
  void integer(const json& j, const std::string& path, const char* key, Int& out) {
    with(j, path, key, [&](const json& v, const std::string& p) {
      if (!v.is_number_integer()) return fail(p, "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v.is_number_unsigned() || v.get<std::int64_t>() >= 0) {
          out = v.get<Int>();
          return;
        }
        return fail(p, "expected a non-negative integer");
      } else {
        out = v.get<Int>();
      }
    });
  }

  void string(const json& j, const std::string& path, const char* key, std::string& out) {
    with(j, path, key, [&](const json& v, const std::string& p) {
      if (!v.is_string()) return fail(p, "expected a string");
      out = v.get<std::string>();
    });
  }

  void path(const json& j, const std::string& prefix, const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    string(j, prefix, key, s);
    out = s;
  }

  // Parses a string value with `parse`, turning library errors into problems.
  template <typename T, typename Parse>
  void named(const json& j, const std::string& path, const char* key, T& out, Parse parse) {
    with(j, path, key, [&](const json& v, const std::string& p) {
      if (!v.is_string()) return fail(p, "expected a string");
      try {
        out = parse(v.get<std::string>());
      } catch (const Error& e) {
        fail(p, e.what());
      }
    });
  }

  void fail(const std::string& path, const std::string& msg) { problems_.push_back(path + ": " + msg); }

  void with(const json& j, const std::string& path, const char* key,
            const std::function<void(const json&, const std::string&)>& fn) {
    auto it = j.find(key);
    if (it != j.end()) fn(*it, join_key(path, key));
  }

 private:
  std::vector<std::string>& problems_;
};

void read_sgd(Reader& r, const json& j, const std::string& path, SgdConfig& sgd) {
  r.number(j, path, "lr", sgd.lr);
  r.number(j, path, "momentum", sgd.momentum);
  r.number(j, path, "factor", sgd.factor);
}

augment::Spec read_augment(Reader& r, const json& v, const std::string& path) {
  if (v.is_string()) {
    try {
      return augment_preset(v.get<std::string>());
    } catch (const Error& e) {
      r.fail(path, e.what());
      return {};
    }
  }
  if (!v.is_array()) {
    r.fail(path, "expected a preset name or a list of transforms");
    return {};
  }
  augment::Spec spec;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& t = v[i];
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (!r.object(t, p, {"kind", "p", "lo", "hi", "alpha", "sigma", "cells", "limit", "clip_limit", "tiles"})) continue;
    if (!t.contains("kind") || !t["kind"].is_string()) {
      r.fail(p + ".kind", "required transform name");
      continue;
    }
    augment::Kind kind;
    try {
      kind = augment::parse_kind(t["kind"].get<std::string>());
    } catch (const Error& e) {
      r.fail(p + ".kind", e.what());
      continue;
    }
    augment::Transform tr{kind, 1.0, augment::default_params(kind)};
    r.number(t, p, "p", tr.p);
    r.number(t, p, "lo", tr.params.lo);
    r.number(t, p, "hi", tr.params.hi);
    r.number(t, p, "alpha", tr.params.alpha);
    r.number(t, p, "sigma", tr.params.sigma);
    r.integer(t, p, "cells", tr.params.cells);
    r.number(t, p, "limit", tr.params.limit);
    r.number(t, p, "clip_limit", tr.params.clip_limit);
    r.integer(t, p, "tiles", tr.params.tiles);
    spec.transforms.push_back(tr);
  }
  return spec;
}

ordered_json augment_to_json(const augment::Spec& spec) {
  ordered_json out = ordered_json::array();
  for (const auto& t : spec.transforms) {
    ordered_json o;
    o["kind"] = std::string(augment::to_string(t.kind));
    o["p"] = t.p;
    o["lo"] = t.params.lo;
    o["hi"] = t.params.hi;
    o["alpha"] = t.params.alpha;
    o["sigma"] = t.params.sigma;
    o["cells"] = t.params.cells;
    o["limit"] = t.params.limit;
    o["clip_limit"] = t.params.clip_limit;
    o["tiles"] = t.params.tiles;
    out.push_back(std::move(o));
  }
  return out;
}

// Runs a validator and records its message under `section`.
void check(std::vector<std::string>& problems, const std::string& section, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    problems.push_back(section + ": " + e.what());
  }
}

}  // namespace

augment::Spec augment_preset(const std::string& name) {
  if (name == "default") return augment::default_spec();
  if (name == "coarse") return augment::coarse_spec();
  if (name == "none") return {};
  throw ValueError("unknown augmentation preset '" + name + "' (expected default, coarse or none)");
}

std::string to_string(MaskSource source) {
  return source == MaskSource::ground_truth ? "ground_truth" : "segmenter";
}

MaskSource parse_mask_source(const std::string& name) {
  if (name == "ground_truth") return MaskSource::ground_truth;
  if (name == "segmenter") return MaskSource::segmenter;
  throw ValueError("unknown mask source '" + name + "' (expected ground_truth or segmenter)");
}

RunConfig config_from_json(const json& doc) {
  RunConfig cfg;
  std::vector<std::string> problems;
  Reader r(problems);
  if (!r.object(doc, "", {"seed", "run_dir", "data", "generate", "init", "unet", "vgg", "segmentation",
                          "classification", "pipeline", "sweep"}))
    throw ConfigError(problems);

  r.integer(doc, "", "seed", cfg.seed);
  r.path(doc, "", "run_dir", cfg.run_dir);

  r.with(doc, "", "data", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"manifest", "image_size"})) return;
    r.path(j, p, "manifest", cfg.manifest);
    r.integer(j, p, "image_size", cfg.image_size);
  });
  r.with(doc, "", "generate", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"per_class", "val_per_class", "out"})) return;
    r.integer(j, p, "per_class", cfg.per_class);
    r.integer(j, p, "val_per_class", cfg.val_per_class);
    r.path(j, p, "out", cfg.generate_out);
  });
  r.with(doc, "", "init", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"scheme", "value"})) return;
    r.named(j, p, "scheme", cfg.init_scheme, parse_init_scheme);
    r.number(j, p, "value", cfg.init_value);
  });
  r.with(doc, "", "unet", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"depth", "base_channels"})) return;
    r.integer(j, p, "depth", cfg.unet.depth);
    r.integer(j, p, "base_channels", cfg.unet.base_channels);
  });
  r.with(doc, "", "vgg", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"blocks", "hidden"})) return;
    r.with(j, p, "blocks", [&](const json& b, const std::string& bp) {
      std::vector<std::pair<int, int>> blocks;
      bool ok = b.is_array();
      if (ok)
        for (const auto& e : b) {
          if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
            ok = false;
            break;
          }
          blocks.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
      if (!ok) return r.fail(bp, "expected a list of [channels, convs] pairs");
      cfg.vgg.blocks = std::move(blocks);
    });
    r.integer(j, p, "hidden", cfg.vgg.hidden);
  });
  r.with(doc, "", "segmentation", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"lr", "momentum", "factor", "sequences", "epochs_per_sequence", "batch_size", "loss", "w1",
                         "w2", "threshold", "first_augment", "second_augment"}))
      return;
    auto& s = cfg.segmentation;
    read_sgd(r, j, p, s.sgd);
    r.integer(j, p, "sequences", s.sequences);
    r.integer(j, p, "epochs_per_sequence", s.epochs_per_sequence);
    r.integer(j, p, "batch_size", s.batch_size);
    r.named(j, p, "loss", s.loss, parse_seg_loss);
    r.number(j, p, "w1", s.weights.w1);
    r.number(j, p, "w2", s.weights.w2);
    r.number(j, p, "threshold", s.threshold);
    r.with(j, p, "first_augment", [&](const json& v, const std::string& vp) { s.first_augment = read_augment(r, v, vp); });
    r.with(j, p, "second_augment",
           [&](const json& v, const std::string& vp) { s.second_augment = read_augment(r, v, vp); });
  });
  r.with(doc, "", "classification", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"lr", "momentum", "factor", "batch_size", "regime", "outer_epochs", "inner_epochs",
                         "alternate", "augment", "mask_source", "init_from"}))
      return;
    auto& c = cfg.classification;
    read_sgd(r, j, p, c.sgd);
    r.integer(j, p, "batch_size", c.batch_size);
    r.integer(j, p, "outer_epochs", c.regime.outer_epochs);
    r.integer(j, p, "inner_epochs", c.regime.inner_epochs);
    r.with(j, p, "alternate", [&](const json& a, const std::string& ap) {
      if (r.object(a, ap, {"lr", "momentum", "factor"})) read_sgd(r, a, ap, c.regime.alternate);
    });
    // Flags last so they keep the epoch counts and alternate optimizer read above.
    r.named(j, p, "regime", c.regime, [&](const std::string& s) { return parse_regime_flags(s, c.regime); });
    r.with(j, p, "augment", [&](const json& v, const std::string& vp) { c.augment = read_augment(r, v, vp); });
    r.named(j, p, "mask_source", cfg.mask_source, parse_mask_source);
    r.path(j, p, "init_from", cfg.cls_init_from);
  });
  r.with(doc, "", "pipeline", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"threshold", "segmenter", "classifier"})) return;
    r.number(j, p, "threshold", cfg.pipeline.threshold);
    r.path(j, p, "segmenter", cfg.pipeline.segmenter);
    r.path(j, p, "classifier", cfg.pipeline.classifier);
  });
  r.with(doc, "", "sweep", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"grid"})) return;
    r.string(j, p, "grid", cfg.sweep_grid);
  });

  cfg.segmentation.seed = cfg.seed;
  cfg.classification.seed = cfg.seed;
  cfg.unet.height = cfg.unet.width = cfg.image_size;
  cfg.vgg.height = cfg.vgg.width = cfg.image_size;

  if (cfg.image_size < 1) problems.push_back("data.image_size: must be positive");
  if (cfg.per_class < 1) problems.push_back("generate.per_class: must be positive");
  if (cfg.val_per_class < 0) problems.push_back("generate.val_per_class: must be non-negative");
  check(problems, "unet", [&] { cfg.unet.validate(); });
  check(problems, "vgg", [&] { cfg.vgg.validate(); });
  check(problems, "segmentation", [&] { cfg.segmentation.validate(); });
  check(problems, "classification", [&] { cfg.classification.validate(); });
  check(problems, "pipeline", [&] { cfg.pipeline.validate(); });
  check(problems, "sweep.grid", [&] { parse_grid(cfg.sweep_grid); });

  if (!problems.empty()) throw ConfigError(problems);
  return cfg;
}

json load_config_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({path.string() + ": " + e.what()});
  }
}

ordered_json config_to_json(const RunConfig& cfg) {
  ordered_json o;
  o["seed"] = cfg.seed;
  o["run_dir"] = cfg.run_dir.string();
  o["data"] = {{"manifest", cfg.manifest.string()}, {"image_size", cfg.image_size}};
  o["generate"] = {{"per_class", cfg.per_class}, {"val_per_class", cfg.val_per_class},
                   {"out", cfg.generate_out.string()}};
  o["init"] = {{"scheme", to_string(cfg.init_scheme)}, {"value", cfg.init_value}};
  o["unet"] = {{"depth", cfg.unet.depth}, {"base_channels", cfg.unet.base_channels}};
  ordered_json blocks = ordered_json::array();
  for (const auto& [ch, n] : cfg.vgg.blocks) blocks.push_back({ch, n});
  o["vgg"] = {{"blocks", blocks}, {"hidden", cfg.vgg.hidden}};

  const auto& s = cfg.segmentation;
  ordered_json seg;
  seg["lr"] = s.sgd.lr;
  seg["momentum"] = s.sgd.momentum;
  seg["factor"] = s.sgd.factor;
  seg["sequences"] = s.sequences;
  seg["epochs_per_sequence"] = s.epochs_per_sequence;
  seg["batch_size"] = s.batch_size;
  seg["loss"] = to_string(s.loss);
  seg["w1"] = s.weights.w1;
  seg["w2"] = s.weights.w2;
  seg["threshold"] = s.threshold;
  seg["first_augment"] = augment_to_json(s.first_augment);
  seg["second_augment"] = augment_to_json(s.second_augment);
  o["segmentation"] = std::move(seg);

  const auto& c = cfg.classification;
  ordered_json cls;
  cls["lr"] = c.sgd.lr;
  cls["momentum"] = c.sgd.momentum;
  cls["factor"] = c.sgd.factor;
  cls["batch_size"] = c.batch_size;
  cls["regime"] = c.regime.flags();
  cls["outer_epochs"] = c.regime.outer_epochs;
  cls["inner_epochs"] = c.regime.inner_epochs;
  cls["alternate"] = {{"lr", c.regime.alternate.lr},
                      {"momentum", c.regime.alternate.momentum},
                      {"factor", c.regime.alternate.factor}};
  cls["augment"] = augment_to_json(c.augment);
  cls["mask_source"] = to_string(cfg.mask_source);
  cls["init_from"] = cfg.cls_init_from.string();
  o["classification"] = std::move(cls);

  o["pipeline"] = {{"threshold", cfg.pipeline.threshold},
                   {"segmenter", cfg.pipeline.segmenter.string()},
                   {"classifier", cfg.pipeline.classifier.string()}};
  o["sweep"] = {{"grid", cfg.sweep_grid}};
  return o;
}

void apply_override(json& doc, const std::string& dotted_key, const std::string& value) {
  if (dotted_key.empty()) throw ConfigError({"empty override key"});
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted_key.find('.', start);
    const std::string part = dotted_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError({dotted_key + ": malformed key"});
    if (!node->is_object()) *node = json::object();
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json parsed = json::parse(value, nullptr, false);
  *node = parsed.is_discarded() ? json(value) : std::move(parsed);
}

void require_paths(const RunConfig& cfg, std::span<const std::string> keys) {
  std::vector<std::string> problems;
  for (const auto& key : keys) {
    std::filesystem::path p;
    if (key == "data.manifest")
      p = cfg.manifest;
    else if (key == "pipeline.segmenter")
      p = cfg.pipeline.segmenter;
    else if (key == "pipeline.classifier")
      p = cfg.pipeline.classifier;
    else if (key == "classification.init_from")
      p = cfg.cls_init_from;
    else
      throw ValueError("require_paths: unknown key '" + key + "'");
    if (p.empty()) problems.push_back(key + ": required path is not set");
  }
  if (!problems.empty()) throw ConfigError(problems);
}

}  // namespace insul
