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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fpm_spoof/backbone.h"
#include "fpm_spoof/io_util.h"
#include "fpm_spoof/tensor.h"

namespace fpm_spoof::testing {

// Scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            ("fpm_spoof_test_" + HexDigest(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<float> Sine(double hz, double amplitude, std::size_t n, int rate) {
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<float>(amplitude *
                                std::sin(2.0 * std::numbers::pi * hz * i / rate));
  }
  return out;
}

inline Tensor RandomTensor(int n, int c, int h, int w, std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.0f, 1.0f);
  Tensor t(n, c, h, w);
  for (float& v : t.data) v = dist(rng);
  return t;
}

// Small-width network used where training cost matters.
inline BackboneConfig TinyBackbone() {
  BackboneConfig c;
  c.stage_channels = {4, 8, 8, 16};
  return c;
}

}  // namespace fpm_spoof::testing
