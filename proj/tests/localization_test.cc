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

#include <cmath>
#include <random>

#include "fpm_spoof/errors.h"
#include "fpm_spoof/localization.h"
#include "fpm_spoof/wav_io.h"
#include "test_util.h"

namespace fpm_spoof {
namespace {

using testing::TempDir;

Matrix RandomMatrix(int rows, int cols, std::mt19937_64& rng, float lo = -2, float hi = 2) {
  std::uniform_real_distribution<float> u(lo, hi);
  Matrix m(rows, cols);
  for (float& v : m.values) v = u(rng);
  return m;
}

TEST(GroundTruth, IdenticalMelsGiveZeroMap) {
  std::mt19937_64 rng(1);
  const Matrix a = RandomMatrix(8, 12, rng);
  const Matrix gt = GroundTruthMap(a, a);
  for (float v : gt.values) EXPECT_EQ(v, 0.0f);
}

TEST(GroundTruth, RangeIsExactlyUnitAndScaleInvariant) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = RandomMatrix(6, 10, rng), b = RandomMatrix(6, 10, rng);
    const Matrix gt = GroundTruthMap(a, b);
    const auto [lo, hi] = std::minmax_element(gt.values.begin(), gt.values.end());
    EXPECT_EQ(*lo, 0.0f);
    EXPECT_EQ(*hi, 1.0f);
    // Scaling the difference by alpha leaves the normalized map unchanged.
    Matrix b2 = b;
    const float alpha = 3.0f;
    for (std::size_t i = 0; i < b2.size(); ++i) b2.values[i] = a.values[i] + alpha * (b.values[i] - a.values[i]);
    const Matrix gt2 = GroundTruthMap(a, b2);
    for (std::size_t i = 0; i < gt.size(); ++i) ASSERT_NEAR(gt.values[i], gt2.values[i], 1e-5);
  }
}

TEST(GroundTruth, TruncatesToCommonLengthAndChecksBins) {
  Matrix a(4, 10, 1.0f), b(4, 7, 1.0f);
  b.at(2, 3) = 5.0f;
  const Matrix gt = GroundTruthMap(a, b);
  EXPECT_EQ(gt.cols, 7);
  EXPECT_EQ(gt.at(2, 3), 1.0f);
  EXPECT_EQ(Mean(gt), 1.0 / 28.0);
  try {
    GroundTruthMap(Matrix(4, 5), Matrix(5, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(GroundTruth, MassConcentratesInInjectedRegion) {
  std::mt19937_64 rng(3);
  const Matrix real = RandomMatrix(20, 40, rng);
  Matrix fake = real;
  std::normal_distribution<float> small(0.0f, 0.05f);
  for (float& v : fake.values) v += small(rng);
  const AnomalyRegion region{"f", "r", "band_tone", 10, 25, 4, 12};
  for (int r = region.f0; r < region.f1; ++r) {
    for (int c = region.t0; c < region.t1; ++c) fake.at(r, c) += 2.0f;
  }
  const Matrix gt = GroundTruthMap(real, fake);
  const Matrix mask = RegionMap(region, 20, 40);
  double in = 0, out = 0, n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    (mask.values[i] > 0 ? in : out) += gt.values[i];
    (mask.values[i] > 0 ? n_in : n_out) += 1;
  }
  EXPECT_EQ(n_in, 8 * 15);
  EXPECT_GT(in / n_in, 5 * out / n_out);
}

TEST(Localize, PredEqualsGt) {
  std::mt19937_64 rng(4);
  const Matrix gt = GroundTruthMap(RandomMatrix(10, 10, rng), RandomMatrix(10, 10, rng));
  const LocalizationReport r = Localize(gt, gt);
  ASSERT_TRUE(r.correlation.has_value());
  EXPECT_NEAR(*r.correlation, 1.0, 1e-9);
  ASSERT_TRUE(r.pixel_auc.has_value());
  EXPECT_EQ(*r.pixel_auc, 1.0);
  ASSERT_TRUE(r.energy_ratio.has_value());
  EXPECT_GT(*r.energy_ratio, 1.0);
  EXPECT_EQ(r.n_pixels, 100u);
}

TEST(Localize, ConstantPredIsUninformative) {
  std::mt19937_64 rng(5);
  const Matrix gt = GroundTruthMap(RandomMatrix(10, 10, rng), RandomMatrix(10, 10, rng));
  const LocalizationReport r = Localize(Matrix(10, 10, 0.3f), gt);
  EXPECT_FALSE(r.correlation.has_value());
  EXPECT_TRUE(r.correlation_undefined);
  EXPECT_EQ(*r.pixel_auc, 0.5);
  EXPECT_NEAR(*r.energy_ratio, 1.0, 1e-12);
  const auto j = ToJson(r);
  EXPECT_TRUE(j["correlation"].is_null());
}

TEST(Localize, PixelAucInvariantToIncreasingRescale) {
  std::mt19937_64 rng(6);
  const Matrix gt = GroundTruthMap(RandomMatrix(12, 9, rng), RandomMatrix(12, 9, rng));
  const Matrix pred = RandomMatrix(12, 9, rng, 0.0f, 1.0f);
  Matrix warped = pred;
  for (float& v : warped.values) v = std::exp(4.0f * v);
  const auto a = Localize(pred, gt), b = Localize(warped, gt);
  EXPECT_EQ(*a.pixel_auc, *b.pixel_auc);
  EXPECT_GT(std::abs(*a.correlation - *b.correlation), 1e-6);
}

TEST(Localize, ShapeMismatchIsShapeError) {
  EXPECT_THROW(Localize(Matrix(3, 4), Matrix(4, 3)), Error);
}

TEST(Compare, IdenticalIsZeroAndSwapNegates) {
  std::mt19937_64 rng(7);
  const Matrix a = RandomMatrix(5, 5, rng), b = RandomMatrix(5, 5, rng);
  const MapComparison same = CompareRealFakeMaps(a, a);
  EXPECT_EQ(same.mean_diff, 0.0);
  EXPECT_EQ(same.max_diff, 0.0);
  const MapComparison ab = CompareRealFakeMaps(a, b), ba = CompareRealFakeMaps(b, a);
  EXPECT_DOUBLE_EQ(ab.mean_diff, -ba.mean_diff);
  EXPECT_DOUBLE_EQ(ab.max_diff, -ba.max_diff);
  EXPECT_DOUBLE_EQ(ab.real_mean, ba.fake_mean);
}

TEST(Pairs, RoundTripResolvesRelativePaths) {
  TempDir dir;
  WritePairs({{"real/a.wav", "fake/a.wav", PairSource::kSyntheticInjection}}, dir / "p.jsonl");
  const auto pairs = LoadPairs(dir / "p.jsonl");
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].real_path, (dir / "real/a.wav").string());
  EXPECT_EQ(pairs[0].source, PairSource::kSyntheticInjection);
  EXPECT_THROW(ParsePairSource("waveglow"), Error);
}

TEST(RunPair, IdenticalFilesGiveZeroTruthAndEqualMaps) {
  TempDir dir;
  const FrontendConfig f;
  BackboneConfig tc = testing::TinyBackbone();
  tc.n_classes = 2;
  const Backbone teacher(tc, f, Role::kTeacher, 1);
  const Backbone student(testing::TinyBackbone(), f, Role::kStudent, 2);
  const Detector det(teacher, student, FusionMode::kMean, std::nullopt);
  const auto x = testing::Sine(330.0, 0.3, 70000, 16000);
  WriteWavMono(dir / "a.wav", x, 16000);
  WriteWavMono(dir / "b.wav", x, 16000);
  const PairResult r = RunPair(det, dir / "a.wav", dir / "b.wav");
  EXPECT_EQ(r.ground_truth.rows, 80);
  EXPECT_EQ(r.ground_truth.cols, 400);
  for (float v : r.ground_truth.values) ASSERT_EQ(v, 0.0f);
  EXPECT_EQ(r.real_map, r.fake_map);
  EXPECT_EQ(r.comparison.mean_diff, 0.0);
}

}  // namespace
}  // namespace fpm_spoof
