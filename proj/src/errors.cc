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

#include "fpm_spoof/errors.h"

namespace fpm_spoof {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse_error";
    case ErrorKind::kValidation: return "validation_error";
    case ErrorKind::kInsufficientData: return "insufficient_data";
    case ErrorKind::kIo: return "io_error";
    case ErrorKind::kDecode: return "decode_error";
    case ErrorKind::kEmptyAudio: return "empty_audio";
    case ErrorKind::kShape: return "shape_error";
    case ErrorKind::kRole: return "role_error";
    case ErrorKind::kConfig: return "config_error";
    case ErrorKind::kLabelSpace: return "label_space_error";
    case ErrorKind::kOneClassViolation: return "one_class_violation";
    case ErrorKind::kCalibrationMismatch: return "calibration_mismatch";
    case ErrorKind::kEvaluation: return "evaluation_error";
    case ErrorKind::kLoad: return "load_error";
    case ErrorKind::kUsage: return "usage_error";
  }
  return "error";
}

}  // namespace fpm_spoof
