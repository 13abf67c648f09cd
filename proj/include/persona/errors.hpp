// Copyright 2026 The persona-steer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace persona {

// Stable numeric codes; the C API and the CLI exit codes are derived from
// these.
enum class ErrorCode : int {
  kDimension = 1,
  kDegenerateDirection,
  kNotUnit,
  kFormat,
  kIo,
  kPairing,
  kMissingData,
  kConfig,
  kInput,
  kState,
  kNotFound,
  kMode,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error(ErrorCode::kDimension, w) {}
};

struct DegenerateDirectionError : Error {
  explicit DegenerateDirectionError(const std::string& w)
      : Error(ErrorCode::kDegenerateDirection, w) {}
};

struct NotUnitError : Error {
  explicit NotUnitError(const std::string& w) : Error(ErrorCode::kNotUnit, w) {}
};

// reason() is one of "magic", "length", "nonfinite", "duplicate", "empty",
// "header", "version".
class FormatError : public Error {
 public:
  FormatError(std::string reason, const std::string& detail)
      : Error(ErrorCode::kFormat, "format error (" + reason + "): " + detail),
        reason_(std::move(reason)) {}
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCode::kIo, w) {}
};

struct PairingError : Error {
  explicit PairingError(const std::string& w) : Error(ErrorCode::kPairing, w) {}
};

class MissingDataError : public Error {
 public:
  explicit MissingDataError(std::string trait)
      : Error(ErrorCode::kMissingData, "missing data for trait '" + trait + "'"),
        trait_(std::move(trait)) {}
  const std::string& trait() const noexcept { return trait_; }

 private:
  std::string trait_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorCode::kConfig, w) {}
};

struct InputError : Error {
  explicit InputError(const std::string& w) : Error(ErrorCode::kInput, w) {}
};

struct StateError : Error {
  explicit StateError(const std::string& w) : Error(ErrorCode::kState, w) {}
};

// resource() is e.g. "session" or "persona".
class NotFoundError : public Error {
 public:
  NotFoundError(std::string resource, const std::string& id)
      : Error(ErrorCode::kNotFound, resource + " '" + id + "' not found"),
        resource_(std::move(resource)) {}
  const std::string& resource() const noexcept { return resource_; }

 private:
  std::string resource_;
};

struct ModeError : Error {
  explicit ModeError(const std::string& w) : Error(ErrorCode::kMode, w) {}
};

}  // namespace persona
