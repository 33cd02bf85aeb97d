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
#include <cstring>
#include <functional>
#include <limits>
#include <random>

#include "fpm_spoof/errors.h"
#include "fpm_spoof/io_util.h"
#include "fpm_spoof/plot.h"
#include "fpm_spoof/run_config.h"
#include "fpm_spoof/tensor_io.h"
#include "test_util.h"

namespace fpm_spoof {
namespace {

using testing::TempDir;

ErrorKind KindOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::kUsage;
}

TEST(TensorFile, RoundTripIsBitExactAndByteStable) {
  TempDir dir;
  std::mt19937_64 rng(1);
  std::normal_distribution<float> g(0.0f, 100.0f);
  Matrix m(7, 13);
  for (float& v : m.values) v = g(rng);
  m.values[0] = -0.0f;
  m.values[1] = std::numeric_limits<float>::denorm_min();
  m.values[2] = std::numeric_limits<float>::max();
  WriteTensorFile(dir / "a.tensor", MatrixToTensorFile(m, "anomaly_map", {{"ds_applied", true}}));
  const TensorFile t = ReadTensorFile(dir / "a.tensor");
  EXPECT_EQ(t.shape, (std::vector<int>{7, 13}));
  EXPECT_EQ(t.header["kind"], "anomaly_map");
  EXPECT_EQ(t.header["ds_applied"], true);
  const Matrix back = TensorFileToMatrix(t);
  ASSERT_EQ(back.values.size(), m.values.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(std::memcmp(&back.values[i], &m.values[i], 4), 0) << i;
  }
  WriteTensorFile(dir / "b.tensor", t);
  EXPECT_EQ(ReadFile(dir / "a.tensor"), ReadFile(dir / "b.tensor"));
}

TEST(TensorFile, LayoutIsHeaderLineThenLittleEndianF32) {
  TempDir dir;
  Matrix m(1, 2);
  m.values = {1.0f, -2.0f};
  WriteTensorFile(dir / "t.tensor", MatrixToTensorFile(m, "x"));
  const std::string bytes = ReadFile(dir / "t.tensor");
  const auto nl = bytes.find('\n');
  ASSERT_NE(nl, std::string::npos);
  const auto header = nlohmann::json::parse(bytes.substr(0, nl));
  EXPECT_EQ(header["dtype"], "f32");
  ASSERT_EQ(bytes.size(), nl + 1 + 8);
  const std::string payload = bytes.substr(nl + 1);
  EXPECT_EQ(payload, std::string("\x00\x00\x80\x3f\x00\x00\x00\xc0", 8));
}

TEST(TensorFile, MalformedFilesAreParseErrors) {
  TempDir dir;
  WriteFile(dir / "noheader", "abc");
  EXPECT_EQ(KindOf([&] { ReadTensorFile(dir / "noheader"); }), ErrorKind::kParse);
  WriteFile(dir / "dtype", "{\"shape\":[1],\"dtype\":\"f64\"}\n12345678");
  EXPECT_EQ(KindOf([&] { ReadTensorFile(dir / "dtype"); }), ErrorKind::kParse);
  WriteFile(dir / "short", "{\"shape\":[2],\"dtype\":\"f32\"}\n1234");
  EXPECT_EQ(KindOf([&] { ReadTensorFile(dir / "short"); }), ErrorKind::kParse);
}

std::uint32_t BigEndian(const std::string& b, std::size_t at) {
  return (std::uint32_t(std::uint8_t(b[at])) << 24) | (std::uint32_t(std::uint8_t(b[at + 1])) << 16) |
         (std::uint32_t(std::uint8_t(b[at + 2])) << 8) | std::uint32_t(std::uint8_t(b[at + 3]));
}

TEST(Heatmap, PngHeaderAndScale) {
  TempDir dir;
  Matrix m(10, 30);
  for (int r = 0; r < 10; ++r) {
    for (int c = 0; c < 30; ++c) m.at(r, c) = static_cast<float>(r * c) - 5.0f;
  }
  const auto info = WriteHeatmapPng(dir / "h.png", m);
  const std::string png = ReadFile(dir / "h.png");
  ASSERT_GT(png.size(), 33u);
  EXPECT_EQ(png.substr(0, 8), std::string("\x89PNG\r\n\x1a\n", 8));
  EXPECT_EQ(png.substr(12, 4), "IHDR");
  EXPECT_EQ(BigEndian(png, 16), 30u);
  EXPECT_EQ(BigEndian(png, 20), 10u);
  EXPECT_EQ(info["min"], -5.0);
  EXPECT_EQ(info["max"], 9.0 * 29.0 - 5.0);
  EXPECT_THROW(WriteHeatmapPng(dir / "e.png", Matrix()), Error);
}

TEST(Plots, RocAndHistogramImages) {
  TempDir dir;
  const std::vector<RocPoint> roc = {{0, 0}, {0, 0.5}, {0.5, 1}, {1, 1}};
  const Matrix img = RenderRoc(roc, 200);
  EXPECT_EQ(img.rows, 200);
  EXPECT_EQ(img.cols, 200);
  EXPECT_LT(*std::min_element(img.values.begin(), img.values.end()), 0.5f);
  Histogram h;
  h.edges = {0, 1, 2};
  h.real_counts = {3, 1};
  h.fake_counts = {0, 4};
  const Matrix hist = RenderHistogram(h, 120, 80);
  EXPECT_EQ(hist.rows, 80);
  EXPECT_EQ(hist.cols, 120);
  WriteRocPng(dir / "roc.png", roc);
  WriteHistogramPng(dir / "hist.png", h);
  EXPECT_TRUE(std::filesystem::exists(dir / "roc.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "hist.png"));
}

TEST(RunConfig, DefaultsRoundTrip) {
  const RunConfig c;
  const RunConfig back = RunConfigFromJson(ToJson(c));
  EXPECT_EQ(ToJson(back).dump(), ToJson(c).dump());
}

TEST(RunConfig, PrecedenceDefaultsThenFileThenOverrides) {
  TempDir dir;
  WriteFile(dir / "c.json",
            R"({"seed": 4, "workers": 2, "teacher": {"max_epochs": 9, "early_stop_patience": 3},
                "backbone": {"stage_channels": [8, 16, 32, 64]}})");
  const RunConfig c = ResolveRunConfig(dir / "c.json", {{"/teacher/max_epochs", 12}, {"/seed", 7}});
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.workers, 2);
  EXPECT_EQ(c.teacher.max_epochs, 12);
  EXPECT_EQ(c.teacher.early_stop_patience, 3);
  EXPECT_EQ(c.backbone.stage_channels, (std::vector<int>{8, 16, 32, 64}));
  EXPECT_EQ(c.student.max_epochs, TrainConfig{}.max_epochs);
  EXPECT_EQ(c.teacher.seed, 7u);
  EXPECT_EQ(c.student.seed, 7u);
  EXPECT_EQ(c.corpus.seed, 7u);
  EXPECT_EQ(c.corpus.workers, 2);
}

TEST(RunConfig, UnknownKeysAndBadValuesAreRejected) {
  TempDir dir;
  EXPECT_EQ(KindOf([] { RunConfigFromJson({{"sede", 1}}); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([] { RunConfigFromJson({{"teacher", {{"lr", 1}}}}); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([] { RunConfigFromJson({{"workers", 0}}); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([] { RunConfigFromJson({{"detector", {{"tau", 1.5}}}}); }),
            ErrorKind::kConfig);
  WriteFile(dir / "bad.json", "{");
  EXPECT_EQ(KindOf([&] { ResolveRunConfig(dir / "bad.json"); }), ErrorKind::kParse);
}

TEST(RunConfig, ShippedDeskConfigLoads) {
  const RunConfig c = ResolveRunConfig(std::filesystem::path(FPM_SPOOF_SOURCE_DIR) / "configs" /
                                       "desk.json");
  EXPECT_GE(c.corpus.n_speakers, 4);
  EXPECT_GE(c.corpus.n_speakers * c.corpus.clips_per_speaker, 32);
}

}  // namespace
}  // namespace fpm_spoof
