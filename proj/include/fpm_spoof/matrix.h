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

#include <cstddef>
#include <vector>

namespace fpm_spoof {

// Dense row-major float matrix. Used for spectrograms and anomaly maps, where
// rows are mel bins (frequency) and columns are frames (time).
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> values;

  Matrix() = default;
  Matrix(int r, int c, float fill = 0.0f)
      : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}

  float& at(int r, int c) {
    return values[static_cast<std::size_t>(r) * cols + c];
  }
  float at(int r, int c) const {
    return values[static_cast<std::size_t>(r) * cols + c];
  }
  std::size_t size() const { return values.size(); }
  bool SameShape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }

  bool operator==(const Matrix&) const = default;
};

// Mean of all entries, accumulated in double. Zero for an empty matrix.
double Mean(const Matrix& m);

}  // namespace fpm_spoof
