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

// Checkpoint file layout. All integers little-endian.
//
//   offset  size  field
//   0       8     magic "INSLCKPT"
//   8       4     u32 format version (kCheckpointVersion)
//   12      4     u32 descriptor length D
//   16      D     descriptor text (Model::descriptor())
//           4     u32 parameter count P
//   P times:
//           4     u32 name length N, then N bytes of name
//           4     u32 rank R, then R x u64 dims
//           4*n   n = prod(dims) IEEE-754 binary32 values
//           1     u8 optimizer flag (0 or 1)
//   if flag == 1:
//           8*4   f64 lr0, momentum, factor, lr
//           8     u64 step
//           4     u32 velocity count V, then per velocity:
//                 u64 length L, L x f64 values
//           8     u64 FNV-1a hash of every preceding byte
//
// Parameters are stored as binary32, so a 64-bit model does not round trip.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "insul/models.hpp"

namespace insul {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// SGD state carried alongside the parameters.
struct OptimizerState {
  double lr0 = 0.0;
  double momentum = 0.0;
  double factor = 1.0;
  double lr = 0.0;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> velocity;  // one buffer per parameter, may be empty

  bool operator==(const OptimizerState&) const = default;
};

struct Checkpoint {
  std::string descriptor;
  std::vector<std::pair<std::string, std::vector<float>>> params;
  std::vector<Shape> shapes;
  std::optional<OptimizerState> optimizer;
};

Checkpoint make_checkpoint(const Model& model, const OptimizerState* optimizer = nullptr);
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws CorruptFileError (with byte offset) on truncation, bad magic or a
/// hash mismatch, VersionError on an unknown version.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Model& model, const OptimizerState* optimizer = nullptr);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies parameters into `model`. Throws ArchitectureMismatch when the
/// descriptors differ.
void load_parameters(Model& model, const Checkpoint& ckpt);

/// Rebuilds the network named by the checkpoint descriptor and loads it.
/// Throws ArchitectureMismatch when the checkpoint holds the other network.
UNetLite load_unet(const std::filesystem::path& path);
VggLite load_vgg(const std::filesystem::path& path);

}  // namespace insul
