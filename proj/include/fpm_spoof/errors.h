// Copyright 2026 The fpm-spoof Authors.
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
#include <string_view>

namespace fpm_spoof {

// Error classes surfaced by the library. The CLI prints the class name as a
// machine-parsable token, so names are stable.
enum class ErrorKind {
  kParse,
  kValidation,
  kInsufficientData,
  kIo,
  kDecode,
  kEmptyAudio,
  kShape,
  kRole,
  kConfig,
  kLabelSpace,
  kOneClassViolation,
  kCalibrationMismatch,
  kEvaluation,
  kLoad,
  kUsage,
};

std::string_view ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace fpm_spoof
