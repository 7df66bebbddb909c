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
#include <stdexcept>
#include <string>
#include <vector>

namespace insul {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A numeric input lies outside the domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An argument value is invalid (bad axis, class out of range, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// Autograd misuse: non-scalar loss, disconnected graph, missing gradient.
class GradError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public IoError {
 public:
  using IoError::IoError;
};

/// A checkpoint file is truncated or damaged. `offset` is the byte position
/// at which decoding failed.
class CorruptFileError : public IoError {
 public:
  CorruptFileError(const std::string& what, std::uint64_t offset)
      : IoError(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class VersionError : public IoError {
 public:
  using IoError::IoError;
};

/// Parameters were requested for one architecture but belong to another.
class ArchitectureMismatch : public Error {
 public:
  ArchitectureMismatch(const std::string& expected, const std::string& found)
      : Error("architecture mismatch: expected '" + expected + "', found '" + found + "'"),
        expected_(expected),
        found_(found) {}
  const std::string& expected() const noexcept { return expected_; }
  const std::string& found() const noexcept { return found_; }

 private:
  std::string expected_;
  std::string found_;
};

/// Configuration validation failure carrying every problem found.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string out = "invalid configuration:";
    for (const auto& s : p) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> problems_;
};

}  // namespace insul
