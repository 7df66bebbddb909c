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

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>

#include "insul/data.hpp"
#include "insul/error.hpp"
#include "insul/log.hpp"

namespace insul {

namespace {

bool has_png_signature(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

std::vector<std::uint8_t> read_png(const fs::path& path, png_uint_32 format, std::size_t& w, std::size_t& h) {
  if (!has_png_signature(path)) throw FormatError("unsupported image format (not PNG): '" + path.string() + "'");
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw FormatError("cannot decode '" + path.string() + "': " + img.message);
  img.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw FormatError("cannot decode '" + path.string() + "': " + img.message);
  }
  w = img.width;
  h = img.height;
  return buf;
}

void write_png(const fs::path& path, png_uint_32 format, std::size_t w, std::size_t h, const std::uint8_t* data) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, data, 0, nullptr))
    throw IoError("cannot write '" + path.string() + "': " + img.message);
}

}  // namespace

Image read_image(const fs::path& path) {
  Image im;
  im.pixels = read_png(path, PNG_FORMAT_RGB, im.width, im.height);
  return im;
}

void write_image(const fs::path& path, const Image& image) {
  write_png(path, PNG_FORMAT_RGB, image.width, image.height, image.pixels.data());
}

Mask read_mask(const fs::path& path) {
  Mask m;
  auto gray = read_png(path, PNG_FORMAT_GRAY, m.width, m.height);
  bool intermediate = false;
  m.bits.resize(gray.size());
  for (std::size_t i = 0; i < gray.size(); ++i) {
    intermediate |= gray[i] != 0 && gray[i] != 255;
    m.bits[i] = gray[i] >= 128 ? 1 : 0;
  }
  if (intermediate) logging::warn("mask '" + path.string() + "' has values other than 0 and 255; thresholded at 128");
  return m;
}

void write_mask(const fs::path& path, const Mask& mask) {
  require_binary(mask);
  std::vector<std::uint8_t> gray(mask.bits.size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask.bits[i] ? 255 : 0;
  write_png(path, PNG_FORMAT_GRAY, mask.width, mask.height, gray.data());
}

}  // namespace insul
