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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fpm_spoof/anomaly.h"
#include "fpm_spoof/errors.h"
#include "fpm_spoof/wav_io.h"
#include "test_util.h"

namespace fpm_spoof {
namespace {

using testing::TempDir;
using testing::TinyBackbone;

TEST(Upsample, HalfPixelBilinear) {
  Matrix m(2, 2);
  m.values = {0, 1, 0, 1};
  const Matrix up = UpsampleBilinear(m, 2, 4);
  const std::vector<float> row = {0.0f, 0.25f, 0.75f, 1.0f};
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 4; ++c) EXPECT_FLOAT_EQ(up.at(r, c), row[c]);
  }
}

TEST(Upsample, ConstantPreservedAndConvexBounds) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-3.0f, 5.0f);
  std::uniform_int_distribution<int> dim(1, 9), mult(1, 5);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = dim(rng), w = dim(rng);
    Matrix m(h, w);
    for (float& v : m.values) v = u(rng);
    const int rows = h * mult(rng) + trial % 3, cols = w * mult(rng) + trial % 2;
    const Matrix up = UpsampleBilinear(m, rows, cols);
    ASSERT_EQ(up.rows, rows);
    ASSERT_EQ(up.cols, cols);
    const auto [lo, hi] = std::minmax_element(m.values.begin(), m.values.end());
    for (float v : up.values) {
      ASSERT_GE(v, *lo - 1e-5f);
      ASSERT_LE(v, *hi + 1e-5f);
    }
    const Matrix flat = UpsampleBilinear(Matrix(h, w, 2.5f), rows, cols);
    for (float v : flat.values) ASSERT_FLOAT_EQ(v, 2.5f);
  }
}

TEST(Upsample, SmallerTargetIsShapeError) {
  EXPECT_THROW(UpsampleBilinear(Matrix(4, 4), 2, 8), Error);
}

TEST(Fusion, MeanAndProduct) {
  const std::array<Matrix, 3> maps = {Matrix(2, 3, 1.0f), Matrix(2, 3, 2.0f), Matrix(2, 3, 3.0f)};
  const AnomalyMap mean = FuseMaps(maps, false);
  const AnomalyMap prod = FuseMaps(maps, true, FusionMode::kProduct);
  for (float v : mean.values.values) EXPECT_FLOAT_EQ(v, 2.0f);
  for (float v : prod.values.values) EXPECT_FLOAT_EQ(v, 6.0f);
  EXPECT_FALSE(mean.ds_applied);
  EXPECT_TRUE(prod.ds_applied);
  EXPECT_DOUBLE_EQ(AnomalyScore(mean), 2.0);
  EXPECT_THROW(FuseMaps({Matrix(2, 3), Matrix(2, 3), Matrix(3, 2)}, false), Error);
  EXPECT_EQ(ParseFusionMode("product"), FusionMode::kProduct);
  EXPECT_THROW(ParseFusionMode("max"), Error);
}

TEST(Moments, WelfordMatchesTwoPassAndMergeIsAssociative) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(4.0, 2.0);
  std::vector<double> xs(1000);
  for (double& x : xs) x = g(rng);
  Moments all, a, b;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    all.Add(xs[i]);
    (i < 337 ? a : b).Add(xs[i]);
  }
  a.Merge(b);
  double mean = 0.0, sq = 0.0;
  for (double x : xs) mean += x / xs.size();
  for (double x : xs) sq += (x - mean) * (x - mean) / xs.size();
  EXPECT_NEAR(all.mean, mean, 1e-12);
  EXPECT_NEAR(all.PopulationStd(), std::sqrt(sq), 1e-10);
  EXPECT_NEAR(a.mean, mean, 1e-12);
  EXPECT_NEAR(a.PopulationStd(), std::sqrt(sq), 1e-10);
  EXPECT_EQ(a.count, 1000);
}

TEST(Ds, AffinePerLayer) {
  std::array<LayerAnomalyMap, 3> maps;
  for (int l = 0; l < 3; ++l) maps[l] = {Matrix(2, 2), l};
  maps[0].values.values = {1, 2, 3, 4};
  maps[1].values.values = {0, 0, 1, 1};
  maps[2].values.values = {5, 5, 5, 5};
  CalibrationStats s;
  s.mean = {2.0, 0.5, 1.0};
  s.std = {0.5, 0.25, 2.0};
  const auto out = ApplyDs(maps, s);
  for (int l = 0; l < 3; ++l) {
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_FLOAT_EQ(out[l].values.values[i],
                      (maps[l].values.values[i] - s.mean[l]) / s.std[l]);
    }
  }
}

TEST(Ds, GuardOnDegenerateStd) {
  std::array<Moments, 3> m;
  for (int i = 0; i < 10; ++i) {
    m[0].Add(1.0);
    m[1].Add(i);
    m[2].Add(0.0);
  }
  const CalibrationStats s = StatsFromMoments(m, 1e-6);
  EXPECT_TRUE(s.std_guarded[0]);
  EXPECT_FALSE(s.std_guarded[1]);
  EXPECT_TRUE(s.std_guarded[2]);
  EXPECT_DOUBLE_EQ(s.std[0], 1e-6);
  EXPECT_TRUE(s.any_guarded());
  EXPECT_EQ(s.n_positions[1], 10);
}

TEST(Ds, EqualStdPreservesRanking) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  CalibrationStats s;
  s.mean = {0.3, 0.1, 0.7};
  s.std = {0.4, 0.4, 0.4};
  std::vector<std::pair<double, double>> scores;
  for (int clip = 0; clip < 40; ++clip) {
    std::array<LayerAnomalyMap, 3> maps;
    std::array<Matrix, 3> raw_up, ds_up;
    const int dims[3][2] = {{4, 8}, {2, 4}, {1, 2}};
    for (int l = 0; l < 3; ++l) {
      maps[l] = {Matrix(dims[l][0], dims[l][1]), l};
      for (float& v : maps[l].values.values) v = u(rng);
    }
    const auto ds = ApplyDs(maps, s);
    for (int l = 0; l < 3; ++l) {
      raw_up[l] = UpsampleBilinear(maps[l].values, 8, 16);
      ds_up[l] = UpsampleBilinear(ds[l].values, 8, 16);
    }
    scores.emplace_back(AnomalyScore(FuseMaps(raw_up, false)),
                        AnomalyScore(FuseMaps(ds_up, true)));
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (scores[i].first - scores[j].first > 1e-6) {
        ASSERT_GT(scores[i].second, scores[j].second);
      }
    }
  }
}

TEST(CalibrationStats, JsonRoundTripIsByteStable) {
  TempDir dir;
  CalibrationStats s;
  s.mean = {0.1, 0.2, 0.30000000000000004};
  s.std = {1.5, 1e-8, 2.0};
  s.std_guarded = {false, true, false};
  s.n_positions = {2000, 500, 125};
  s.n_clips = 3;
  s.n_segments = 4;
  s.frontend_fingerprint = "abc";
  s.backbone_fingerprint = "def";
  SaveCalibrationStats(s, dir / "a.json");
  const CalibrationStats back = LoadCalibrationStats(dir / "a.json");
  EXPECT_EQ(back.mean, s.mean);
  EXPECT_EQ(back.std, s.std);
  EXPECT_EQ(back.std_guarded, s.std_guarded);
  SaveCalibrationStats(back, dir / "b.json");
  EXPECT_EQ(ReadFile(dir / "a.json"), ReadFile(dir / "b.json"));
  s.std[0] = 0.0;
  EXPECT_THROW(CalibrationStatsFromJson(ToJson(s)), Error);
}

// A few short clips plus a tiny teacher/student pair.
class DetectorFixture : public ::testing::Test {
 protected:
  DetectorFixture()
      : teacher_(TeacherConfig(), frontend_, Role::kTeacher, 1),
        student_(TinyBackbone(), frontend_, Role::kStudent, 2) {
    std::mt19937_64 rng(9);
    std::normal_distribution<float> g(0.0f, 0.05f);
    for (int i = 0; i < 5; ++i) {
      auto x = testing::Sine(200.0 + 150.0 * i, 0.3, 64000 + 40000 * (i % 2), 16000);
      for (float& v : x) v += g(rng);
      const std::string name = "clip" + std::to_string(i) + ".wav";
      WriteWavMono(dir_ / name, x, 16000);
      calib_.entries.push_back({name, Label::kReal, "s", Split::kCalib, std::nullopt});
    }
    calib_.base_dir = dir_.path();
  }

  static BackboneConfig TeacherConfig() {
    BackboneConfig c = TinyBackbone();
    c.n_classes = 2;
    return c;
  }

  TempDir dir_;
  FrontendConfig frontend_;
  Backbone teacher_;
  Backbone student_;
  Manifest calib_;
};

TEST_F(DetectorFixture, CalibrationMeanEqualsBruteForce) {
  const Detector det(teacher_, student_, FusionMode::kMean, std::nullopt);
  const CalibrationStats s = det.Calibrate(calib_);
  EXPECT_EQ(s.n_clips, 5);
  EXPECT_EQ(s.n_segments, 7);
  for (int l = 0; l < 3; ++l) {
    double sum = 0.0, count = 0.0;
    for (const auto& e : calib_.entries) {
      for (const auto& triple : det.LayerMaps(det.features().Load(calib_.Resolve(e)))) {
        for (float v : triple[l].values.values) {
          sum += v;
          count += 1;
        }
      }
    }
    EXPECT_NEAR(s.mean[l], sum / count, 1e-9 * std::max(1.0, std::abs(s.mean[l])));
    EXPECT_EQ(s.n_positions[l], static_cast<std::int64_t>(count));
  }
}

TEST_F(DetectorFixture, DsStandardizesCalibrationSet) {
  const Detector det(teacher_, student_, FusionMode::kMean, std::nullopt);
  const CalibrationStats s = det.Calibrate(calib_);
  for (int l = 0; l < 3; ++l) {
    Moments m;
    for (const auto& e : calib_.entries) {
      for (const auto& triple : det.LayerMaps(det.features().Load(calib_.Resolve(e)))) {
        const auto ds = ApplyDs(triple, s);
        for (float v : ds[l].values.values) m.Add(v);
      }
    }
    EXPECT_LT(std::abs(m.mean), 1e-6);
    EXPECT_LT(std::abs(m.PopulationStd() - 1.0), 1e-3);
  }
}

TEST_F(DetectorFixture, CalibrationIgnoresOrderAndWorkers) {
  const Detector det(teacher_, student_, FusionMode::kMean, std::nullopt);
  const CalibrationStats a = det.Calibrate(calib_);
  Manifest shuffled = calib_;
  std::reverse(shuffled.entries.begin(), shuffled.entries.end());
  std::swap(shuffled.entries[0], shuffled.entries[2]);
  const CalibrationStats b = det.Calibrate(shuffled, {1e-8, 3});
  EXPECT_EQ(ToJson(a).dump(), ToJson(b).dump());
}

TEST_F(DetectorFixture, IdenticalStudentGivesZeroScores) {
  Backbone copy(TinyBackbone(), frontend_, Role::kStudent, 99);
  copy.CopyFeatureWeightsFrom(teacher_);
  const Detector det(teacher_, copy, FusionMode::kMean, std::nullopt);
  const CalibrationStats s = det.Calibrate(calib_);
  for (int l = 0; l < 3; ++l) {
    EXPECT_EQ(s.mean[l], 0.0);
    EXPECT_TRUE(s.std_guarded[l]);
    EXPECT_EQ(s.std[l], s.epsilon);
  }
  const ClipResult r = det.ScoreClip(calib_.Resolve(calib_.entries[1]), &s);
  EXPECT_EQ(r.score.score, 0.0);
  EXPECT_TRUE(r.score.ds_applied);
}

TEST_F(DetectorFixture, ScoreIsMeanOfSegmentsAndMapMean) {
  const Detector det(teacher_, student_, FusionMode::kMean, std::nullopt);
  const ClipResult r = det.ScoreClip(calib_.Resolve(calib_.entries[1]));
  ASSERT_EQ(r.score.n_segments, 2);
  ASSERT_EQ(r.segment_maps.size(), 2u);
  EXPECT_FALSE(r.score.ds_applied);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(r.segment_maps[i].values.rows, 80);
    EXPECT_EQ(r.segment_maps[i].values.cols, 400);
    EXPECT_NEAR(r.score.per_segment_scores[i], Mean(r.segment_maps[i].values), 1e-12);
  }
  EXPECT_NEAR(r.score.score, (r.score.per_segment_scores[0] + r.score.per_segment_scores[1]) / 2,
              1e-12);
  EXPECT_EQ(ClipMap(r).cols, 800);
  const ClipResult again = det.ScoreClip(calib_.Resolve(calib_.entries[1]));
  EXPECT_EQ(again.score.score, r.score.score);
}

TEST_F(DetectorFixture, ForeignStatsAreRejected) {
  const Detector det(teacher_, student_, FusionMode::kMean, std::nullopt);
  CalibrationStats s = det.Calibrate(calib_);
  Backbone other(TinyBackbone(), frontend_, Role::kStudent, 3);
  const Detector det2(teacher_, other, FusionMode::kMean, std::nullopt);
  try {
    det2.ScoreClip(calib_.Resolve(calib_.entries[0]), &s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCalibrationMismatch);
  }
}

TEST_F(DetectorFixture, CalibrationRejectsFakeEntries) {
  const Detector det(teacher_, student_, FusionMode::kMean, std::nullopt);
  Manifest m = calib_;
  m.entries[0].label = Label::kFake;
  try {
    det.Calibrate(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kOneClassViolation);
  }
}

TEST_F(DetectorFixture, RoleAndTopologyChecks) {
  EXPECT_THROW(Detector(student_, student_, FusionMode::kMean, std::nullopt), Error);
  BackboneConfig wide = TinyBackbone();
  wide.stage_channels = {8, 8, 8, 16};
  Backbone other(wide, frontend_, Role::kStudent, 1);
  EXPECT_THROW(Detector(teacher_, other, FusionMode::kMean, std::nullopt), Error);
}

}  // namespace
}  // namespace fpm_spoof
