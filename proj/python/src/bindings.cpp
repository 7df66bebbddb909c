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

// Python bindings. Images cross the boundary as uint8 arrays of shape
// (H, W, 3) and masks as uint8 arrays of shape (H, W) holding 0 or 1.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "insul/augment.hpp"
#include "insul/checkpoint.hpp"
#include "insul/data.hpp"
#include "insul/error.hpp"
#include "insul/metrics.hpp"
#include "insul/pipeline.hpp"
#include "insul/synthetic.hpp"

namespace py = pybind11;
using namespace insul;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Image image_from_array(const U8Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("image must have shape (H, W, 3)");
  Image im(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)));
  std::memcpy(im.pixels.data(), a.data(), im.pixels.size());
  return im;
}

U8Array image_to_array(const Image& im) {
  U8Array a({static_cast<py::ssize_t>(im.height), static_cast<py::ssize_t>(im.width), py::ssize_t{3}});
  std::memcpy(a.mutable_data(), im.pixels.data(), im.pixels.size());
  return a;
}

Mask mask_from_array(const U8Array& a) {
  if (a.ndim() != 2) throw py::value_error("mask must have shape (H, W)");
  Mask m(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)));
  const auto* src = a.data();
  for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = src[i] ? 1 : 0;
  return m;
}

U8Array mask_to_array(const Mask& m) {
  U8Array a({static_cast<py::ssize_t>(m.height), static_cast<py::ssize_t>(m.width)});
  std::memcpy(a.mutable_data(), m.bits.data(), m.bits.size());
  return a;
}

py::dict prediction_dict(const Prediction& p) {
  py::dict d;
  d["label"] = p.label;
  d["class_name"] = class_name(p.label);
  d["probabilities"] = std::vector<double>(p.probabilities.begin(), p.probabilities.end());
  d["mask"] = mask_to_array(p.mask);
  d["mask_area_fraction"] = p.mask.area_fraction();
  return d;
}

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  d["accuracy"] = r.accuracy;
  py::list per_class;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& s = r.per_class[c];
    py::dict row;
    row["class"] = c;
    row["precision"] = s.precision;
    row["recall"] = s.recall;
    row["f1"] = s.f1;
    row["support"] = s.support;
    per_class.append(row);
  }
  d["per_class"] = per_class;
  py::list confusion;
  for (const auto& row : r.confusion.counts) confusion.append(std::vector<std::int64_t>(row.begin(), row.end()));
  d["confusion"] = confusion;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "insulscan native core";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ValueError>(m, "ValueError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ArchitectureMismatch>(m, "ArchitectureMismatch", base.ptr());

  py::list names;
  for (int c = 0; c < kNumClasses; ++c) names.append(class_name(c));
  m.attr("CLASS_NAMES") = py::tuple(names);

  m.def("read_image", [](const fs::path& p) { return image_to_array(read_image(p)); }, py::arg("path"));
  m.def("write_image", [](const fs::path& p, const U8Array& a) { write_image(p, image_from_array(a)); },
        py::arg("path"), py::arg("image"));
  m.def("read_mask", [](const fs::path& p) { return mask_to_array(read_mask(p)); }, py::arg("path"));
  m.def("write_mask", [](const fs::path& p, const U8Array& a) { write_mask(p, mask_from_array(a)); },
        py::arg("path"), py::arg("mask"));
  m.def(
      "load_manifest",
      [](const fs::path& p) {
        py::list rows;
        for (const auto& s : load_manifest(p)) {
          py::dict d;
          d["image"] = s.image.string();
          d["mask"] = s.mask ? py::object(py::str(s.mask->string())) : py::object(py::none());
          d["label"] = s.label ? py::object(py::int_(*s.label)) : py::object(py::none());
          d["split"] = std::string(to_string(s.split));
          rows.append(d);
        }
        return rows;
      },
      py::arg("path"));

  m.def("iou", [](const U8Array& p, const U8Array& t) { return iou(mask_from_array(p), mask_from_array(t)); },
        py::arg("pred"), py::arg("truth"));
  m.def("accuracy", [](const std::vector<int>& p, const std::vector<int>& t) { return accuracy(p, t); },
        py::arg("preds"), py::arg("truths"));
  m.def(
      "classification_report",
      [](const std::vector<int>& p, const std::vector<int>& t) { return report_dict(classification_report(p, t)); },
      py::arg("preds"), py::arg("truths"));
  m.def("parse_grid", &parse_grid, py::arg("text"));

  m.def("hflip", [](const U8Array& a) { return image_to_array(augment::hflip(image_from_array(a))); });
  m.def("vflip", [](const U8Array& a) { return image_to_array(augment::vflip(image_from_array(a))); });
  m.def("transpose", [](const U8Array& a) { return image_to_array(augment::transpose(image_from_array(a))); });
  m.def("rot90", [](const U8Array& a, int k) { return image_to_array(augment::rot90(image_from_array(a), k)); },
        py::arg("image"), py::arg("k") = 1);
  m.def(
      "compose_mask",
      [](const U8Array& im, const U8Array& mk) { return image_to_array(compose_mask(image_from_array(im), mask_from_array(mk))); },
      py::arg("image"), py::arg("mask"));

  m.def(
      "render_scene",
      [](std::size_t size, std::uint64_t seed, std::optional<int> label) {
        synth::SceneSpec spec;
        spec.width = spec.height = size;
        if (label) spec.defect = static_cast<Defect>(*label);
        auto s = synth::render_scene(spec, seed);
        return py::make_tuple(image_to_array(s.image), mask_to_array(s.mask), s.label);
      },
      py::arg("size") = 128, py::arg("seed") = 0, py::arg("label") = py::none(),
      "Returns (image, mask, label) for one synthetic scene.");

  m.def(
      "init_segmenter",
      [](const fs::path& path, int size, int depth, int base_channels, std::uint64_t seed) {
        save_checkpoint(path, UNetLite({depth, base_channels, 3, size, size}, {InitScheme::he_normal, 0.0, seed}));
      },
      py::arg("path"), py::arg("size") = 128, py::arg("depth") = 3, py::arg("base_channels") = 16,
      py::arg("seed") = 0, "Writes a freshly initialised UNet-lite checkpoint.");
  m.def(
      "init_classifier",
      [](const fs::path& path, int size, const std::vector<std::pair<int, int>>& blocks, int hidden,
         std::uint64_t seed) {
        save_checkpoint(path, VggLite({blocks, hidden, 3, size, size}, {InitScheme::he_normal, 0.0, seed}));
      },
      py::arg("path"), py::arg("size") = 128,
      py::arg("blocks") = std::vector<std::pair<int, int>>{{16, 2}, {32, 2}, {64, 2}}, py::arg("hidden") = 64,
      py::arg("seed") = 0, "Writes a freshly initialised VGG-lite checkpoint.");

  py::class_<Pipeline>(m, "Pipeline")
      .def_static(
          "load",
          [](const fs::path& segmenter, const fs::path& classifier, double threshold) {
            PipelineConfig cfg;
            cfg.segmenter = segmenter;
            cfg.classifier = classifier;
            cfg.threshold = threshold;
            return Pipeline::load(cfg);
          },
          py::arg("segmenter"), py::arg("classifier"), py::arg("threshold") = 0.5)
      .def_property_readonly("threshold", &Pipeline::threshold)
      .def(
          "predict", [](const Pipeline& p, const U8Array& a) { return prediction_dict(p.predict(image_from_array(a))); },
          py::arg("image"))
      .def(
          "classify_with_mask",
          [](const Pipeline& p, const U8Array& im, const U8Array& mk) {
            return prediction_dict(p.classify_with_mask(image_from_array(im), mask_from_array(mk)));
          },
          py::arg("image"), py::arg("mask"));
}
