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

// insul: command-line front end.
//
// Exit codes: 0 success, 1 invalid arguments or configuration, 2 runtime
// failure (I/O, corrupt or mismatched checkpoints, bad data).

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "insul/checkpoint.hpp"
#include "insul/config.hpp"
#include "insul/data.hpp"
#include "insul/error.hpp"
#include "insul/log.hpp"
#include "insul/synthetic.hpp"
#include "insul/training.hpp"

namespace {

using namespace insul;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

// Owns the run directory: config echo up front, metadata with timestamps
// at the end. Everything else written here is timestamp-free.
class RunDir {
 public:
  RunDir(const RunConfig& cfg, std::string command_line) : dir_(cfg.run_dir), command_(std::move(command_line)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create run directory " + dir_.string() + ": " + ec.message());
    started_ = utc_now();
    write_text(dir_ / "config.json", config_to_json(cfg).dump(2) + "\n");
  }
  void finish() const {
    write_text(dir_ / "metadata.txt", "command: " + command_ + "\nstarted: " + started_ + "\nfinished: " + utc_now() +
                                          "\nversion: 0.1.0\n");
  }
  fs::path operator/(const std::string& name) const { return dir_ / name; }

 private:
  fs::path dir_;
  std::string command_;
  std::string started_;
};

struct Loaded {
  std::vector<Example> train;
  std::vector<Example> val;
};

Loaded load_data(const RunConfig& cfg) {
  const auto samples = load_manifest(cfg.manifest);
  Loaded d;
  const auto train = select(samples, Split::train);
  const auto val = select(samples, Split::val);
  d.train = load_examples(train);
  d.val = load_examples(val);
  const auto size = static_cast<std::size_t>(cfg.image_size);
  for (const auto* set : {&d.train, &d.val})
    for (const auto& e : *set)
      if (e.image.width != size || e.image.height != size)
        throw ShapeError("dataset image is " + std::to_string(e.image.width) + "x" + std::to_string(e.image.height) +
                         " but data.image_size is " + std::to_string(size));
  return d;
}

void print_report(const MetricsReport& r, const RunDir& run, const std::string& stem) {
  const auto text = to_text(r);
  std::cout << text;
  write_text(run / (stem + ".txt"), text);
  if (r.has_classification) write_text(run / (stem + ".csv"), to_csv(r));
  if (r.has_segmentation) {
    std::ostringstream iou;
    iou.precision(10);
    iou << "image,iou\n";
    for (std::size_t i = 0; i < r.iou_per_image.size(); ++i) iou << i << "," << r.iou_per_image[i] << "\n";
    write_text(run / (stem + "_iou.csv"), iou.str());
  }
}

// ---------------------------------------------------------------------------
// Commands

void gen_data(const RunConfig& cfg) {
  synth::GenerateOptions opt;
  opt.train_per_class = cfg.per_class;
  opt.val_per_class = cfg.val_per_class;
  opt.seed = cfg.seed;
  opt.scene.width = opt.scene.height = static_cast<std::size_t>(cfg.image_size);
  const auto samples = synth::generate_dataset(opt, cfg.generate_out);
  std::cout << "wrote " << samples.size() << " samples to " << (cfg.generate_out / "manifest.csv").string() << "\n";
}

void train_seg(const RunConfig& cfg, const RunDir& run) {
  const auto data = load_data(cfg);
  UNetLite model(cfg.unet, cfg.init());
  const auto r = train_segmentation(model, data.train, data.val, cfg.segmentation);
  write_text(run / "train_log.csv", r.log.to_csv());
  save_checkpoint(run / "segmenter.ckpt", model, &r.best_optimizer);
  for (std::size_t i = 0; i < r.warm_start_val_loss.size(); ++i)
    std::cout << "sequence " << i + 2 << " warm-start val loss " << r.warm_start_val_loss[i] << " (previous final "
              << r.previous_final_val_loss[i] << ")\n";
  std::cout << "steps " << r.log.rows.size() << ", best val IoU "
            << (r.best_metric ? std::to_string(*r.best_metric) : std::string("n/a")) << "\n";
}

void train_cls(const RunConfig& cfg, const RunDir& run) {
  const auto data = load_data(cfg);
  std::optional<UNetLite> unet;
  if (cfg.mask_source == MaskSource::segmenter) unet.emplace(load_unet(cfg.pipeline.segmenter));
  const auto* seg = unet ? &*unet : nullptr;
  const double p = cfg.pipeline.threshold;
  const auto train = masked_examples(data.train, cfg.mask_source, seg, p);
  const auto val = masked_examples(data.val, cfg.mask_source, seg, p);
  std::optional<Checkpoint> init;
  if (cfg.classification.regime.pretrained) init = read_checkpoint(cfg.cls_init_from);
  VggLite model(cfg.vgg, cfg.init());
  const auto r = train_classifier(model, train, val, cfg.classification, init ? &*init : nullptr);
  write_text(run / "train_log.csv", r.log.to_csv());
  save_checkpoint(run / "classifier.ckpt", model, &r.best_optimizer);
  std::cout << "regime " << cfg.classification.regime.flags() << ", steps " << r.log.rows.size()
            << ", best val accuracy " << (r.best_metric ? std::to_string(*r.best_metric) : std::string("n/a")) << "\n";
}

void eval(const RunConfig& cfg, EvalMode mode, const std::string& split, const RunDir& run) {
  const auto data = load_data(cfg);
  const auto& set = split == "train" ? data.train : data.val;
  if (set.empty()) throw ValueError("the " + split + " split is empty");
  MetricsReport report;
  switch (mode) {
    case EvalMode::segmentation:
      report = evaluate_segmentation(load_unet(cfg.pipeline.segmenter), set, cfg.pipeline.threshold);
      break;
    case EvalMode::classification:
      report = evaluate_classification(load_vgg(cfg.pipeline.classifier),
                                       masked_examples(set, MaskSource::ground_truth));
      break;
    case EvalMode::end_to_end:
      report = evaluate_end_to_end(Pipeline::load(cfg.pipeline), set);
      break;
  }
  print_report(report, run, "metrics");
}

void sweep(const RunConfig& cfg, const std::string& split, const RunDir& run) {
  const auto data = load_data(cfg);
  const auto& set = split == "train" ? data.train : data.val;
  if (set.empty()) throw ValueError("the " + split + " split is empty");
  const auto r = sweep_threshold(load_unet(cfg.pipeline.segmenter), set, parse_grid(cfg.sweep_grid));
  const auto csv = to_csv(r);
  write_text(run / "sweep.csv", csv);
  std::cout << csv << "best p " << r.best_p << " mean IoU " << r.best_iou << "\n";
}

void predict(const RunConfig& cfg, const std::vector<std::string>& image_paths, const RunDir& run) {
  std::vector<Image> images;
  std::vector<std::string> ids;
  if (!image_paths.empty()) {
    for (const auto& p : image_paths) {
      images.push_back(read_image(p));
      ids.push_back(p);
    }
  } else {
    for (const auto& s : load_manifest(cfg.manifest)) {
      images.push_back(read_image(s.image));
      ids.push_back(s.image.string());
    }
  }
  const auto pipeline = Pipeline::load(cfg.pipeline);
  const auto preds = pipeline.predict_batch(images);
  std::string lines;
  for (std::size_t i = 0; i < preds.size(); ++i) lines += to_record(preds[i], ids[i]) + "\n";
  write_text(run / "predictions.jsonl", lines);
  std::cout << lines;
}

void ablate(const RunConfig& cfg, const RunDir& run) {
  const auto data = load_data(cfg);
  const auto unet = load_unet(cfg.pipeline.segmenter);
  RegimeGridConfig grid{cfg.classification, cfg.pipeline.threshold};
  const auto rows = run_regime_grid(cfg.vgg, cfg.init(), unet, data.train, data.val, grid);
  for (const auto& row : rows)
    if (!row.result.log.rows.empty()) write_text(run / ("train_log_" + row.training + ".csv"), row.result.log.to_csv());
  const auto csv = regime_summary_csv(rows);
  write_text(run / "regime_summary.csv", csv);
  std::cout << csv;
}

// ---------------------------------------------------------------------------

struct Options {
  std::string config_file;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> overrides;  // applied after --set
  bool dry_run = false;
  std::string eval_mode = "end-to-end";
  std::string split = "val";
  std::vector<std::string> images;
};

// Registers a flag that, when given, overrides `key` in the config document.
void override_flag(CLI::App* app, Options& opt, const std::string& flag, const std::string& key,
                   const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&opt, key](const std::string& v) { opt.overrides.emplace_back(key, v); }, help + " (" + key + ")");
}

RunConfig resolve(const Options& opt) {
  nlohmann::json doc = opt.config_file.empty() ? nlohmann::json::object() : load_config_json(opt.config_file);
  for (const auto& s : opt.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError({"--set expects key=value, got '" + s + "'"});
    apply_override(doc, s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [k, v] : opt.overrides) apply_override(doc, k, v);
  return config_from_json(doc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"insul: insulator segmentation and defect classification"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("-c,--config", opt.config_file, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", opt.sets, "Override a config key, e.g. --set classification.lr=0.01");
  app.add_flag("--dry-run", opt.dry_run, "Print the resolved configuration and exit");
  override_flag(&app, opt, "--seed", "seed", "Random seed");
  override_flag(&app, opt, "--run-dir", "run_dir", "Output directory");
  override_flag(&app, opt, "--manifest", "data.manifest", "Dataset manifest");
  override_flag(&app, opt, "--image-size", "data.image_size", "Square input size");

  auto* gen = app.add_subcommand("gen-data", "Render a synthetic dataset");
  override_flag(gen, opt, "--per-class", "generate.per_class", "Training images per class");
  override_flag(gen, opt, "--val-per-class", "generate.val_per_class", "Validation images per class");
  override_flag(gen, opt, "--out", "generate.out", "Output directory");

  app.add_subcommand("train-seg", "Train the segmenter");
  auto* tcls = app.add_subcommand("train-cls", "Train the classifier");
  override_flag(tcls, opt, "--regime", "classification.regime", "Regime flags: none or a subset of pre,reset,alt");
  override_flag(tcls, opt, "--mask-source", "classification.mask_source", "ground_truth or segmenter");
  override_flag(tcls, opt, "--init-from", "classification.init_from", "Checkpoint for pre-trained regimes");

  auto* ev = app.add_subcommand("eval", "Evaluate checkpoints");
  ev->add_option("--mode", opt.eval_mode, "segmentation, classification or end-to-end")
      ->check(CLI::IsMember({"segmentation", "classification", "end-to-end"}));
  auto* sw = app.add_subcommand("sweep", "Mean IoU over a grid of thresholds");
  override_flag(sw, opt, "--grid", "sweep.grid", "start:stop:step or a comma list");
  for (auto* sub : {ev, sw})
    sub->add_option("--split", opt.split, "train or val")->check(CLI::IsMember({"train", "val"}));

  auto* pred = app.add_subcommand("predict", "Run the two-stage pipeline");
  pred->add_option("images", opt.images, "Image files (default: every manifest image)");
  auto* abl = app.add_subcommand("ablate", "Run the classifier regime grid");

  for (auto* sub : {tcls, ev, sw, pred, abl}) {
    override_flag(sub, opt, "--segmenter", "pipeline.segmenter", "Segmenter checkpoint");
    override_flag(sub, opt, "--threshold", "pipeline.threshold", "Mask threshold");
  }
  for (auto* sub : {ev, pred}) override_flag(sub, opt, "--classifier", "pipeline.classifier", "Classifier checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  std::string command_line;
  for (int i = 0; i < argc; ++i) command_line += (i ? " " : "") + std::string(argv[i]);

  try {
    const RunConfig cfg = resolve(opt);
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();

    std::vector<std::string> required;
    if (name != "gen-data") required.push_back("data.manifest");
    if (name == "train-cls" && cfg.mask_source == MaskSource::segmenter) required.push_back("pipeline.segmenter");
    if (name == "train-cls" && cfg.classification.regime.pretrained) required.push_back("classification.init_from");
    if (name == "sweep" || name == "ablate" || name == "predict" ||
        (name == "eval" && opt.eval_mode != "classification"))
      required.push_back("pipeline.segmenter");
    if (name == "predict" || (name == "eval" && opt.eval_mode != "segmentation"))
      required.push_back("pipeline.classifier");
    if (name == "predict" && !opt.images.empty()) std::erase(required, "data.manifest");
    require_paths(cfg, required);

    if (opt.dry_run) {
      std::cout << config_to_json(cfg).dump(2) << "\n";
      return kExitOk;
    }
    if (name == "gen-data") {
      gen_data(cfg);
      return kExitOk;
    }

    RunDir run(cfg, command_line);
    if (name == "train-seg") train_seg(cfg, run);
    if (name == "train-cls") train_cls(cfg, run);
    if (name == "eval") eval(cfg, parse_eval_mode(opt.eval_mode), opt.split, run);
    if (name == "sweep") sweep(cfg, opt.split, run);
    if (name == "predict") predict(cfg, opt.images, run);
    if (name == "ablate") ablate(cfg, run);
    run.finish();
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ArchitectureMismatch& e) {
    std::cerr << "error: checkpoint does not match the configured model\n  expected: " << e.expected()
              << "\n  found:    " << e.found() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
