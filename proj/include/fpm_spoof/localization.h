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
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpm_spoof/anomaly.h"
#include "fpm_spoof/manifest.h"
#include "fpm_spoof/matrix.h"

namespace fpm_spoof {

enum class PairSource { kVocoderResynthesis, kSyntheticInjection };
std::string_view PairSourceName(PairSource source);
PairSource ParsePairSource(std::string_view token);

struct PairedClip {
  std::string real_path;
  std::string fake_path;
  PairSource source = PairSource::kVocoderResynthesis;
};

// Pairs manifest: one {"real_path","fake_path","source"} object per line.
// Relative paths resolve against the manifest's directory.
std::vector<PairedClip> LoadPairs(const std::filesystem::path& path);
void WritePairs(const std::vector<PairedClip>& pairs, const std::filesystem::path& path);

// |real - fake| on log-mel values (truncated to the common frame count),
// min-max normalized to [0, 1]; an all-zero difference stays all-zero.
Matrix GroundTruthMap(const Matrix& real_log_mel, const Matrix& fake_log_mel);

// Binary map with ones inside a sidecar region, clipped to the grid.
Matrix RegionMap(const AnomalyRegion& region, int rows, int cols);

struct LocalizationReport {
  std::optional<double> correlation;  // null when either map is constant
  std::optional<double> pixel_auc;    // null without both classes of pixel
  std::optional<double> energy_ratio; // null when the outside mean is zero
  bool correlation_undefined = false;
  std::size_t n_positive = 0;
  std::size_t n_pixels = 0;
};

LocalizationReport Localize(const Matrix& pred, const Matrix& gt, double tau = 0.5);
nlohmann::ordered_json ToJson(const LocalizationReport& report);

struct MapComparison {
  double real_mean = 0.0, real_max = 0.0;
  double fake_mean = 0.0, fake_max = 0.0;
  double mean_diff = 0.0;  // fake - real
  double max_diff = 0.0;
};

MapComparison CompareRealFakeMaps(const Matrix& real_map, const Matrix& fake_map);
nlohmann::ordered_json ToJson(const MapComparison& c);

// Full per-pair experiment: ground truth from unstandardized log-mels of the
// two files (truncated to common length), predicted clip maps from the
// detector, and the metrics above.
struct PairResult {
  Matrix ground_truth;
  Matrix real_map;
  Matrix fake_map;
  LocalizationReport report;
  MapComparison comparison;
};

PairResult RunPair(const Detector& detector, const std::filesystem::path& real_path,
                   const std::filesystem::path& fake_path,
                   const CalibrationStats* stats = nullptr, double tau = 0.5);

}  // namespace fpm_spoof
