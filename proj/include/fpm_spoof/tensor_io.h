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

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpm_spoof/matrix.h"

namespace fpm_spoof {

// Portable tensor file: one line of JSON header terminated by '\n', followed
// by prod(shape) little-endian f32 values in row-major order. The header
// always carries "shape" and "dtype":"f32"; other keys are free-form
// ("kind", "ds_applied", ...).
struct TensorFile {
  nlohmann::ordered_json header;
  std::vector<int> shape;
  std::vector<float> data;
};

void WriteTensorFile(const std::filesystem::path& path, const TensorFile& tensor);
TensorFile ReadTensorFile(const std::filesystem::path& path);

// Header keys other than shape/dtype are taken from `extra`.
TensorFile MatrixToTensorFile(const Matrix& m, const std::string& kind,
                              const nlohmann::ordered_json& extra = {});
Matrix TensorFileToMatrix(const TensorFile& tensor);

// Grayscale 8-bit PNG, min-max scaled; row 0 of the matrix (lowest mel bin)
// is drawn at the bottom. Min and max are stored as PNG text chunks and
// returned in the form {"min": .., "max": ..}.
nlohmann::ordered_json WriteHeatmapPng(const std::filesystem::path& path,
                                       const Matrix& m);

}  // namespace fpm_spoof
