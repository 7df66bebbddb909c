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

#pragma once

#include <cstdint>
#include <random>

namespace insul {

/// Deterministic random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard <random> distributions are implementation-defined,
/// so every draw below is derived from raw 64-bit words with explicitly
/// written transforms: uniform reals use the top 53 bits, normals use the
/// Box-Muller transform (the spare value is cached). Two generators built
/// from the same seed produce the same values on any conforming platform.
class Prng {
 public:
  explicit Prng(std::uint64_t seed = 0) : engine_(seed), seed_(seed) {}

  /// Mixes a base seed with a stream index (SplitMix64 finalizer). Used to
  /// give every sample its own independent stream.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t position() const noexcept { return drawn_; }

  std::uint64_t next_u64() {
    ++drawn_;
    return engine_();
  }
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  std::uint64_t drawn_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace insul
