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

#include "fpm_spoof/anomaly.h"

#include <algorithm>
#include <cmath>

#include "fpm_spoof/errors.h"
#include "fpm_spoof/fpm_loss.h"
#include "fpm_spoof/io_util.h"
#include "fpm_spoof/parallel.h"

namespace fpm_spoof {

LayerAnomalyMap ComputeLayerAnomalyMap(const Tensor& teacher, const Tensor& student,
                                       int layer_index) {
  if (!teacher.SameShape(student) || teacher.n != 1) {
    Fail(ErrorKind::kShape, "layer anomaly map: teacher " + teacher.ShapeString() +
                                " vs student " + student.ShapeString());
  }
  LayerAnomalyMap out{Matrix(teacher.h, teacher.w), layer_index};
  std::vector<double> d(teacher.plane());
  LayerDiscrepancy<float>(teacher.data.data(), student.data.data(), 1, teacher.c,
                          teacher.h, teacher.w, d.data());
  for (std::size_t i = 0; i < d.size(); ++i) out.values.values[i] = static_cast<float>(d[i]);
  return out;
}

std::array<LayerAnomalyMap, 3> LayerAnomalyMaps(const FeaturePyramid& teacher,
                                                const FeaturePyramid& student) {
  return {ComputeLayerAnomalyMap(teacher.maps[0], student.maps[0], 0),
          ComputeLayerAnomalyMap(teacher.maps[1], student.maps[1], 1),
          ComputeLayerAnomalyMap(teacher.maps[2], student.maps[2], 2)};
}

std::vector<std::array<LayerAnomalyMap, 3>> LayerAnomalyMapsBatch(
    const std::array<Tensor, 3>& teacher, const std::array<Tensor, 3>& student) {
  const int n = teacher[0].n;
  std::vector<std::array<LayerAnomalyMap, 3>> out(n);
  for (int l = 0; l < 3; ++l) {
    const Tensor& t = teacher[l];
    const Tensor& s = student[l];
    if (!t.SameShape(s) || t.n != n) {
      Fail(ErrorKind::kShape, "layer " + std::to_string(l) + ": teacher " +
                                  t.ShapeString() + " vs student " + s.ShapeString());
    }
    std::vector<double> d(static_cast<std::size_t>(n) * t.plane());
    LayerDiscrepancy<float>(t.data.data(), s.data.data(), n, t.c, t.h, t.w, d.data());
    for (int i = 0; i < n; ++i) {
      LayerAnomalyMap m{Matrix(t.h, t.w), l};
      for (std::size_t p = 0; p < t.plane(); ++p) {
        m.values.values[p] = static_cast<float>(d[i * t.plane() + p]);
      }
      out[i][l] = std::move(m);
    }
  }
  return out;
}

Matrix UpsampleBilinear(const Matrix& map, int rows, int cols) {
  if (rows < map.rows || cols < map.cols || map.rows <= 0 || map.cols <= 0) {
    Fail(ErrorKind::kShape, "upsample target smaller than source");
  }
  auto axis = [](int in, int out) {
    struct Tap { int i0, i1; double frac; };
    std::vector<Tap> taps(out);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      double src = (o + 0.5) * scale - 0.5;
      if (src < 0.0) src = 0.0;
      int i0 = static_cast<int>(std::floor(src));
      if (i0 > in - 1) i0 = in - 1;
      const int i1 = std::min(i0 + 1, in - 1);
      taps[o] = {i0, i1, src - i0};
    }
    return taps;
  };
  const auto ry = axis(map.rows, rows);
  const auto rx = axis(map.cols, cols);
  Matrix out(rows, cols);
  for (int y = 0; y < rows; ++y) {
    const auto& ty = ry[y];
    for (int x = 0; x < cols; ++x) {
      const auto& tx = rx[x];
      const double top = (1.0 - tx.frac) * map.at(ty.i0, tx.i0) + tx.frac * map.at(ty.i0, tx.i1);
      const double bot = (1.0 - tx.frac) * map.at(ty.i1, tx.i0) + tx.frac * map.at(ty.i1, tx.i1);
      out.at(y, x) = static_cast<float>((1.0 - ty.frac) * top + ty.frac * bot);
    }
  }
  return out;
}

std::string_view FusionModeName(FusionMode mode) {
  return mode == FusionMode::kMean ? "mean" : "product";
}

FusionMode ParseFusionMode(std::string_view token) {
  if (token == "mean") return FusionMode::kMean;
  if (token == "product") return FusionMode::kProduct;
  Fail(ErrorKind::kConfig, "unknown fusion mode '" + std::string(token) + "'");
}

AnomalyMap FuseMaps(const std::array<Matrix, 3>& upsampled, bool ds_applied,
                    FusionMode mode) {
  if (!upsampled[0].SameShape(upsampled[1]) || !upsampled[0].SameShape(upsampled[2])) {
    Fail(ErrorKind::kShape, "fuse_maps: layer maps differ in shape");
  }
  AnomalyMap out{Matrix(upsampled[0].rows, upsampled[0].cols), ds_applied};
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double a = upsampled[0].values[i];
    const double b = upsampled[1].values[i];
    const double c = upsampled[2].values[i];
    out.values.values[i] =
        static_cast<float>(mode == FusionMode::kMean ? (a + b + c) / 3.0 : a * b * c);
  }
  return out;
}

double AnomalyScore(const AnomalyMap& map) { return Mean(map.values); }

void Moments::Add(double x) {
  ++count;
  const double delta = x - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (x - mean);
}

void Moments::Merge(const Moments& o) {
  if (o.count == 0) return;
  if (count == 0) {
    *this = o;
    return;
  }
  const double total = static_cast<double>(count + o.count);
  const double delta = o.mean - mean;
  mean += delta * static_cast<double>(o.count) / total;
  m2 += o.m2 + delta * delta * static_cast<double>(count) * o.count / total;
  count += o.count;
}

double Moments::PopulationStd() const {
  return count > 0 ? std::sqrt(std::max(0.0, m2 / static_cast<double>(count))) : 0.0;
}

nlohmann::ordered_json ToJson(const CalibrationStats& s) {
  nlohmann::ordered_json j;
  j["kind"] = "calibration_stats";
  j["format_version"] = 1;
  j["mean"] = s.mean;
  j["std"] = s.std;
  j["n_positions"] = s.n_positions;
  j["std_guarded"] = s.std_guarded;
  j["n_clips"] = s.n_clips;
  j["n_segments"] = s.n_segments;
  j["epsilon"] = s.epsilon;
  j["frontend_fingerprint"] = s.frontend_fingerprint;
  j["backbone_fingerprint"] = s.backbone_fingerprint;
  return j;
}

CalibrationStats CalibrationStatsFromJson(const nlohmann::json& j) {
  CalibrationStats s;
  try {
    s.mean = j.at("mean").get<std::array<double, 3>>();
    s.std = j.at("std").get<std::array<double, 3>>();
    s.n_positions = j.at("n_positions").get<std::array<std::int64_t, 3>>();
    s.std_guarded = j.at("std_guarded").get<std::array<bool, 3>>();
    s.n_clips = j.at("n_clips").get<std::int64_t>();
    s.n_segments = j.at("n_segments").get<std::int64_t>();
    s.epsilon = j.at("epsilon").get<double>();
    s.frontend_fingerprint = j.at("frontend_fingerprint").get<std::string>();
    s.backbone_fingerprint = j.at("backbone_fingerprint").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kParse, std::string("calibration stats: ") + e.what());
  }
  for (double sd : s.std) {
    if (!(sd > 0.0)) Fail(ErrorKind::kValidation, "calibration std must be > 0");
  }
  return s;
}

void SaveCalibrationStats(const CalibrationStats& stats,
                          const std::filesystem::path& path) {
  WriteFile(path, ToJson(stats).dump(2) + "\n");
}

CalibrationStats LoadCalibrationStats(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ReadFile(path));
  } catch (const nlohmann::json::parse_error& e) {
    Fail(ErrorKind::kParse, path.string() + ": " + e.what());
  }
  return CalibrationStatsFromJson(j);
}

CalibrationStats StatsFromMoments(const std::array<Moments, 3>& moments,
                                  double epsilon) {
  CalibrationStats s;
  s.epsilon = epsilon;
  for (int l = 0; l < 3; ++l) {
    s.mean[l] = moments[l].mean;
    s.n_positions[l] = moments[l].count;
    const double sd = moments[l].PopulationStd();
    s.std_guarded[l] = !(sd > epsilon);
    s.std[l] = s.std_guarded[l] ? epsilon : sd;
  }
  return s;
}

std::array<LayerAnomalyMap, 3> ApplyDs(const std::array<LayerAnomalyMap, 3>& maps,
                                       const CalibrationStats& stats) {
  std::array<LayerAnomalyMap, 3> out = maps;
  for (int l = 0; l < 3; ++l) {
    const double mu = stats.mean[l];
    const double sd = stats.std[l];
    for (float& v : out[l].values.values) v = static_cast<float>((v - mu) / sd);
  }
  return out;
}

Matrix ClipMap(const ClipResult& result) {
  if (result.segment_maps.empty()) return {};
  const int rows = result.segment_maps.front().values.rows;
  int cols = 0;
  for (const auto& m : result.segment_maps) cols += m.values.cols;
  Matrix out(rows, cols);
  int offset = 0;
  for (const auto& m : result.segment_maps) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < m.values.cols; ++c) out.at(r, offset + c) = m.values.at(r, c);
    }
    offset += m.values.cols;
  }
  return out;
}

Detector::Detector(const Backbone& teacher, const Backbone& student,
                   FusionMode fusion, std::optional<std::filesystem::path> cache_dir)
    : teacher_(teacher), student_(student), fusion_(fusion),
      features_(teacher.frontend(), std::move(cache_dir)) {
  if (teacher.role() != Role::kTeacher || student.role() != Role::kStudent) {
    Fail(ErrorKind::kRole, "detector needs a teacher and a student model");
  }
  if (!teacher.config().SameTopology(student.config())) {
    Fail(ErrorKind::kConfig, "teacher and student topologies differ");
  }
  if (!(teacher.frontend() == student.frontend())) {
    Fail(ErrorKind::kConfig, "teacher and student frontends differ");
  }
}

std::string Detector::FrontendFingerprint() const {
  return HexDigest(Fnv1a(ToJson(frontend()).dump()));
}

std::string Detector::BackboneFingerprint() const {
  return HexDigest(Fnv1a(teacher_.WeightDigest() + ":" + student_.WeightDigest()));
}

std::vector<std::array<LayerAnomalyMap, 3>> Detector::LayerMaps(
    const std::vector<MelSpectrogram>& mels) const {
  if (mels.empty()) return {};
  std::vector<const Matrix*> ptrs;
  for (const auto& m : mels) ptrs.push_back(&m.values);
  const Tensor x = StackMels(ptrs);
  const PyramidBatch t = teacher_.Infer(x, false);
  const PyramidBatch s = student_.Infer(x, false);
  return LayerAnomalyMapsBatch(t.maps, s.maps);
}

void Detector::CheckStats(const CalibrationStats& stats) const {
  if (stats.frontend_fingerprint != FrontendFingerprint() ||
      stats.backbone_fingerprint != BackboneFingerprint()) {
    Fail(ErrorKind::kCalibrationMismatch,
         "calibration stats were computed for different models or frontend");
  }
}

ClipResult Detector::ScoreMels(const std::string& path,
                               const std::vector<MelSpectrogram>& mels,
                               const CalibrationStats* stats) const {
  if (stats != nullptr) CheckStats(*stats);
  ClipResult result;
  result.score.path = path;
  result.score.ds_applied = stats != nullptr;
  const auto layer_maps = LayerMaps(mels);
  double total = 0.0;
  for (std::size_t i = 0; i < layer_maps.size(); ++i) {
    const auto maps = stats != nullptr ? ApplyDs(layer_maps[i], *stats) : layer_maps[i];
    const int rows = mels[i].values.rows, cols = mels[i].values.cols;
    std::array<Matrix, 3> up = {UpsampleBilinear(maps[0].values, rows, cols),
                                UpsampleBilinear(maps[1].values, rows, cols),
                                UpsampleBilinear(maps[2].values, rows, cols)};
    AnomalyMap fused = FuseMaps(up, stats != nullptr, fusion_);
    const double seg_score = AnomalyScore(fused);
    result.score.per_segment_scores.push_back(seg_score);
    total += seg_score;
    result.segment_maps.push_back(std::move(fused));
  }
  result.score.n_segments = static_cast<int>(layer_maps.size());
  result.score.score = layer_maps.empty() ? 0.0 : total / layer_maps.size();
  return result;
}

ClipResult Detector::ScoreClip(const std::filesystem::path& path,
                               const CalibrationStats* stats) const {
  return ScoreMels(path.string(), features_.Load(path), stats);
}

CalibrationStats Detector::Calibrate(const Manifest& calib,
                                     const CalibrationOptions& options) const {
  RequireRealOnly(calib, "calibration");
  std::vector<const ManifestEntry*> entries;
  for (const auto& e : calib.entries) entries.push_back(&e);
  std::sort(entries.begin(), entries.end(),
            [](const ManifestEntry* a, const ManifestEntry* b) { return a->path < b->path; });

  // Per-clip moments are computed in parallel and merged in path order.
  std::vector<std::array<Moments, 3>> per_clip(entries.size());
  std::vector<std::int64_t> segments(entries.size(), 0);
  ParallelFor(entries.size(), options.workers, [&](std::size_t i) {
    const auto mels = features_.Load(calib.Resolve(*entries[i]));
    segments[i] = static_cast<std::int64_t>(mels.size());
    for (const auto& triple : LayerMaps(mels)) {
      for (int l = 0; l < 3; ++l) {
        for (float v : triple[l].values.values) per_clip[i][l].Add(v);
      }
    }
  });
  std::array<Moments, 3> total;
  std::int64_t n_segments = 0;
  for (std::size_t i = 0; i < per_clip.size(); ++i) {
    for (int l = 0; l < 3; ++l) total[l].Merge(per_clip[i][l]);
    n_segments += segments[i];
  }
  CalibrationStats stats = StatsFromMoments(total, options.epsilon);
  stats.n_clips = static_cast<std::int64_t>(entries.size());
  stats.n_segments = n_segments;
  stats.frontend_fingerprint = FrontendFingerprint();
  stats.backbone_fingerprint = BackboneFingerprint();
  return stats;
}

}  // namespace fpm_spoof
