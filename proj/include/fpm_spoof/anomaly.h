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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpm_spoof/backbone.h"
#include "fpm_spoof/feature_cache.h"
#include "fpm_spoof/manifest.h"
#include "fpm_spoof/matrix.h"

namespace fpm_spoof {

struct LayerAnomalyMap {
  Matrix values;  // H_l x W_l
  int layer_index = 0;
};

// Per-position discrepancy 1/2 * ||t_hat - s_hat||^2 for a batch-of-one layer
// pair. Values lie in [0, 2].
LayerAnomalyMap ComputeLayerAnomalyMap(const Tensor& teacher, const Tensor& student,
                                       int layer_index);
std::array<LayerAnomalyMap, 3> LayerAnomalyMaps(const FeaturePyramid& teacher,
                                                const FeaturePyramid& student);
// One triple of layer maps per batch element.
std::vector<std::array<LayerAnomalyMap, 3>> LayerAnomalyMapsBatch(
    const std::array<Tensor, 3>& teacher, const std::array<Tensor, 3>& student);

// Bilinear resize with half-pixel centers (corners not aligned). Target must
// be at least the source size in both dimensions.
Matrix UpsampleBilinear(const Matrix& map, int rows, int cols);

enum class FusionMode { kMean, kProduct };
std::string_view FusionModeName(FusionMode mode);
FusionMode ParseFusionMode(std::string_view token);

struct AnomalyMap {
  Matrix values;  // aligned with the input mel (F x T)
  bool ds_applied = false;
};

AnomalyMap FuseMaps(const std::array<Matrix, 3>& upsampled, bool ds_applied,
                    FusionMode mode = FusionMode::kMean);

// Mean of all map entries.
double AnomalyScore(const AnomalyMap& map);

// Mergeable running mean / second central moment.
struct Moments {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void Add(double x);
  void Merge(const Moments& other);
  double PopulationStd() const;
};

struct CalibrationStats {
  std::array<double, 3> mean{};
  std::array<double, 3> std{};
  std::array<std::int64_t, 3> n_positions{};
  std::array<bool, 3> std_guarded{};
  std::int64_t n_clips = 0;
  std::int64_t n_segments = 0;
  double epsilon = 1e-8;
  std::string frontend_fingerprint;
  std::string backbone_fingerprint;

  bool any_guarded() const {
    return std_guarded[0] || std_guarded[1] || std_guarded[2];
  }
};

nlohmann::ordered_json ToJson(const CalibrationStats& stats);
CalibrationStats CalibrationStatsFromJson(const nlohmann::json& j);
void SaveCalibrationStats(const CalibrationStats& stats,
                          const std::filesystem::path& path);
CalibrationStats LoadCalibrationStats(const std::filesystem::path& path);

// Builds stats from per-layer moments; a std at or below `epsilon` is replaced
// by `epsilon` and flagged.
CalibrationStats StatsFromMoments(const std::array<Moments, 3>& moments,
                                  double epsilon);

// Pointwise (a - mean_l) / std_l on every layer map.
std::array<LayerAnomalyMap, 3> ApplyDs(const std::array<LayerAnomalyMap, 3>& maps,
                                       const CalibrationStats& stats);

struct DetectionScore {
  std::string path;
  double score = 0.0;
  int n_segments = 0;
  std::vector<double> per_segment_scores;
  bool ds_applied = false;
};

struct ClipResult {
  DetectionScore score;
  std::vector<AnomalyMap> segment_maps;
};

// Concatenates per-segment maps along time into one clip-level map.
Matrix ClipMap(const ClipResult& result);

struct CalibrationOptions {
  double epsilon = 1e-8;
  int workers = 1;
};

// Teacher/student pair used at inference. Holds references; the models must
// outlive the detector. All methods are const and safe to call concurrently.
class Detector {
 public:
  // Throws Error(kConfig) when the networks' topologies or frontends differ,
  // Error(kRole) when roles are wrong.
  Detector(const Backbone& teacher, const Backbone& student,
           FusionMode fusion = FusionMode::kMean,
           std::optional<std::filesystem::path> cache_dir = CacheDirFromEnv());

  const FrontendConfig& frontend() const { return teacher_.frontend(); }
  std::string FrontendFingerprint() const;
  std::string BackboneFingerprint() const;

  // Raw layer maps for every mel in the list (inference mode).
  std::vector<std::array<LayerAnomalyMap, 3>> LayerMaps(
      const std::vector<MelSpectrogram>& mels) const;

  // Throws Error(kCalibrationMismatch) unless both fingerprints match.
  void CheckStats(const CalibrationStats& stats) const;

  // load -> segment -> mel -> pyramids -> layer maps -> optional DS ->
  // upsample -> fuse -> per-segment score; clip score is the segment mean.
  ClipResult ScoreMels(const std::string& path,
                       const std::vector<MelSpectrogram>& mels,
                       const CalibrationStats* stats = nullptr) const;
  ClipResult ScoreClip(const std::filesystem::path& path,
                       const CalibrationStats* stats = nullptr) const;

  // Pools per-position discrepancies per layer over all segments of all
  // calibration clips. Clips are processed in path order so the result does
  // not depend on manifest order.
  CalibrationStats Calibrate(const Manifest& calib,
                             const CalibrationOptions& options = {}) const;

  const FeatureSource& features() const { return features_; }

 private:
  const Backbone& teacher_;
  const Backbone& student_;
  FusionMode fusion_;
  FeatureSource features_;
};

}  // namespace fpm_spoof
