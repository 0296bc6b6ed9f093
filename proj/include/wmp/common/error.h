// Copyright 2026 The wm_policy Authors
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

#ifndef WMP_COMMON_ERROR_H_
#define WMP_COMMON_ERROR_H_

#include <stdexcept>
#include <string>

namespace wmp {

// Base class for every error raised by the library. `kind()` is a short
// machine-readable tag used by the CLI when it reports failures.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error("shape", message) {}
};

class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(const std::string& message)
      : Error("non_finite", message) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message)
      : Error("invalid_argument", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

class CheckpointError : public Error {
 public:
  explicit CheckpointError(const std::string& message)
      : Error("checkpoint", message) {}
};

}  // namespace wmp

#endif  // WMP_COMMON_ERROR_H_
