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

#include "fpm_spoof/backbone.h"
#include "fpm_spoof/checkpoint.h"
#include "fpm_spoof/errors.h"
#include "fpm_spoof/io_util.h"
#include "test_util.h"

namespace fpm_spoof {
namespace {

using testing::RandomTensor;
using testing::TempDir;
using testing::TinyBackbone;

MelSpectrogram RandomMel(const FrontendConfig& f, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  MelSpectrogram m{Matrix(f.n_mels, f.FramesPerSegment()), f};
  for (float& v : m.values.values) v = g(rng);
  return m;
}

TEST(Backbone, DefaultPyramidShapes) {
  const FrontendConfig f;
  BackboneConfig cfg;
  cfg.n_classes = 921;
  const Backbone model(cfg, f, Role::kTeacher, 1);
  const auto shapes = model.PyramidShape(80, 400);
  EXPECT_EQ(shapes[0], std::make_pair(20, 100));
  EXPECT_EQ(shapes[1], std::make_pair(10, 50));
  EXPECT_EQ(shapes[2], std::make_pair(5, 25));
  const auto mel = RandomMel(f, 3);
  const FeaturePyramid p = model.ForwardFeatures(mel);
  EXPECT_EQ(p.maps[0].c, 128);
  EXPECT_EQ(p.maps[0].h, 20);
  EXPECT_EQ(p.maps[0].w, 100);
  EXPECT_EQ(p.maps[1].c, 256);
  EXPECT_EQ(p.maps[1].h, 10);
  EXPECT_EQ(p.maps[2].c, 512);
  EXPECT_EQ(p.maps[2].w, 25);
  EXPECT_EQ(model.ForwardLogits(mel).size(), 921u);
}

TEST(Backbone, PyramidShapeMatchesForwardOnRandomSizes) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> mels(40, 96), frames(0, 2);
  for (int trial = 0; trial < 6; ++trial) {
    FrontendConfig f;
    f.n_mels = mels(rng);
    f.segment_seconds = 1.0 + frames(rng) * 0.37;
    BackboneConfig cfg = TinyBackbone();
    const Backbone model(cfg, f, Role::kStudent, trial);
    const auto mel = RandomMel(f, trial);
    const auto p = model.ForwardFeatures(mel);
    const auto shapes = model.PyramidShape(f.n_mels, f.FramesPerSegment());
    for (int l = 0; l < 3; ++l) {
      EXPECT_EQ(p.maps[l].h, shapes[l].first);
      EXPECT_EQ(p.maps[l].w, shapes[l].second);
      if (l > 0) {
        EXPECT_LE(p.maps[l].h, p.maps[l - 1].h);
        EXPECT_LE(p.maps[l].w, p.maps[l - 1].w);
      }
    }
  }
}

TEST(Backbone, StudentHasNoLogits) {
  const FrontendConfig f;
  const Backbone s(TinyBackbone(), f, Role::kStudent, 1);
  try {
    s.ForwardLogits(RandomMel(f, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kRole);
  }
}

TEST(Backbone, TeacherNeedsClasses) {
  EXPECT_THROW(Backbone(TinyBackbone(), FrontendConfig{}, Role::kTeacher, 1), Error);
}

TEST(Backbone, SeedDeterminesWeights) {
  const FrontendConfig f;
  const Backbone a(TinyBackbone(), f, Role::kStudent, 7);
  const Backbone b(TinyBackbone(), f, Role::kStudent, 7);
  const Backbone c(TinyBackbone(), f, Role::kStudent, 8);
  EXPECT_EQ(a.WeightDigest(), b.WeightDigest());
  EXPECT_NE(a.WeightDigest(), c.WeightDigest());
}

TEST(Backbone, InferIsDeterministicAndFinite) {
  const FrontendConfig f;
  BackboneConfig cfg = TinyBackbone();
  cfg.n_classes = 5;
  const Backbone model(cfg, f, Role::kTeacher, 1);
  for (const auto& mel : {RandomMel(f, 4), MelSpectrogram{Matrix(80, 400, 0.0f), f}}) {
    const auto a = model.ForwardFeatures(mel);
    const auto b = model.ForwardFeatures(mel);
    for (int l = 0; l < 3; ++l) {
      EXPECT_EQ(a.maps[l].data, b.maps[l].data);
      for (float v : a.maps[l].data) ASSERT_TRUE(std::isfinite(v));
    }
    const auto logits = model.ForwardLogits(mel);
    for (float v : logits) ASSERT_TRUE(std::isfinite(v));
    double z = 0.0, mx = *std::max_element(logits.begin(), logits.end());
    for (float v : logits) z += std::exp(v - mx);
    double total = 0.0;
    for (float v : logits) total += std::exp(v - mx) / z;
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Backbone, BatchInferMatchesSingle) {
  const FrontendConfig f;
  const Backbone model(TinyBackbone(), f, Role::kStudent, 3);
  const auto m0 = RandomMel(f, 10), m1 = RandomMel(f, 11);
  const PyramidBatch batch = model.Infer(StackMels({&m0.values, &m1.values}), false);
  const auto single = model.ForwardFeatures(m1);
  for (int l = 0; l < 3; ++l) {
    const Tensor s = batch.maps[l].Slice(1);
    for (std::size_t i = 0; i < s.size(); ++i) {
      ASSERT_NEAR(s.data[i], single.maps[l].data[i], 1e-5);
    }
  }
}

TEST(Backbone, WrongInputShapeIsShapeError) {
  const FrontendConfig f;
  const Backbone model(TinyBackbone(), f, Role::kStudent, 3);
  MelSpectrogram bad{Matrix(80, 399), f};
  try {
    model.ForwardFeatures(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(Backbone, ConfigValidation) {
  BackboneConfig c;
  EXPECT_NO_THROW(c.Validate());
  c.tap_stages = {2, 1, 3};
  EXPECT_THROW(c.Validate(), Error);
  c = {};
  c.stage_channels = {8, 8};
  EXPECT_THROW(c.Validate(), Error);
  c = {};
  c.dropout_p = 1.0;
  EXPECT_THROW(c.Validate(), Error);
  c = {};
  EXPECT_EQ(BackboneConfigFromJson(ToJson(c)), c);
}

TEST(Checkpoint, RoundTripPreservesOutputsAndBytes) {
  TempDir dir;
  const FrontendConfig f;
  BackboneConfig cfg = TinyBackbone();
  cfg.n_classes = 3;
  const Backbone model(cfg, f, Role::kTeacher, 5);
  SaveCheckpoint(model, {{"note", "unit"}}, dir / "a");
  const LoadedModel back = LoadCheckpoint(dir / "a", Role::kTeacher);
  EXPECT_EQ(back.metadata["note"], "unit");
  EXPECT_EQ(back.model->WeightDigest(), model.WeightDigest());
  const auto mel = RandomMel(f, 1);
  EXPECT_EQ(back.model->ForwardLogits(mel), model.ForwardLogits(mel));
  SaveCheckpoint(*back.model, back.metadata, dir / "b");
  EXPECT_EQ(ReadFile(dir / "a" / "weights.bin"), ReadFile(dir / "b" / "weights.bin"));
  EXPECT_EQ(ReadFile(dir / "a" / "checkpoint.json"), ReadFile(dir / "b" / "checkpoint.json"));
}

TEST(Checkpoint, RoleMismatchIsRoleError) {
  TempDir dir;
  SaveCheckpoint(Backbone(TinyBackbone(), FrontendConfig{}, Role::kStudent, 1), {}, dir / "s");
  try {
    LoadCheckpoint(dir / "s", Role::kTeacher);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kRole);
  }
}

TEST(Checkpoint, MissingKeyOrCorruptWeightsIsLoadError) {
  TempDir dir;
  SaveCheckpoint(Backbone(TinyBackbone(), FrontendConfig{}, Role::kStudent, 1), {}, dir / "s");
  auto index = nlohmann::json::parse(ReadFile(dir / "s" / "checkpoint.json"));
  auto expect_load_error = [&] {
    try {
      LoadCheckpoint(dir / "s");
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kLoad);
    }
  };
  std::string weights = ReadFile(dir / "s" / "weights.bin");
  weights[0] ^= 0x5a;
  WriteFile(dir / "s" / "weights.bin", weights);
  expect_load_error();
  index.erase("tensors");
  WriteFile(dir / "s" / "checkpoint.json", index.dump());
  expect_load_error();
  std::filesystem::remove_all(dir / "s");
  expect_load_error();
}

// Finite-difference checks for the hand-written layer gradients (loose
// tolerances, float arithmetic).
double Dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a.data[i]) * b.data[i];
  return s;
}

template <typename Layer>
void CheckInputGradient(Layer& layer, const Tensor& x, std::mt19937_64& rng, double tol) {
  const Tensor y = layer.Forward(x);
  const Tensor r = RandomTensor(y.n, y.c, y.h, y.w, rng);
  const Tensor dx = layer.Backward(r);
  ASSERT_TRUE(dx.SameShape(x));
  const float eps = 1e-2f;
  for (std::size_t i = 0; i < x.size(); i += std::max<std::size_t>(1, x.size() / 17)) {
    Tensor up = x, dn = x;
    up.data[i] += eps;
    dn.data[i] -= eps;
    const double fd = (Dot(layer.Forward(up), r) - Dot(layer.Forward(dn), r)) / (2 * eps);
    EXPECT_NEAR(dx.data[i], fd, tol * (1.0 + std::abs(fd))) << "index " << i;
  }
}

TEST(Layers, ConvInputAndWeightGradients) {
  std::mt19937_64 rng(1);
  nn::Conv2d conv(3, 4, 3, 2, 1);
  conv.Init(rng);
  const Tensor x = RandomTensor(2, 3, 6, 7, rng);
  CheckInputGradient(conv, x, rng, 2e-2);

  const Tensor y = conv.Forward(x);
  const Tensor r = RandomTensor(y.n, y.c, y.h, y.w, rng);
  conv.weight().ZeroGrad();
  conv.Backward(r, false);
  const std::vector<float> grad = conv.weight().grad;
  const float eps = 1e-2f;
  for (std::size_t i = 0; i < grad.size(); i += 7) {
    const float keep = conv.weight().value[i];
    conv.weight().value[i] = keep + eps;
    const double up = Dot(conv.Forward(x), r);
    conv.weight().value[i] = keep - eps;
    const double dn = Dot(conv.Forward(x), r);
    conv.weight().value[i] = keep;
    const double fd = (up - dn) / (2 * eps);
    EXPECT_NEAR(grad[i], fd, 2e-2 * (1.0 + std::abs(fd)));
  }
}

TEST(Layers, LinearInputGradient) {
  std::mt19937_64 rng(2);
  nn::Linear fc(6, 3);
  fc.Init(rng);
  CheckInputGradient(fc, RandomTensor(4, 6, 1, 1, rng), rng, 1e-2);
}

TEST(Layers, BatchNormTrainingInputGradient) {
  std::mt19937_64 rng(3);
  nn::BatchNorm2d bn(3);
  CheckInputGradient(bn, RandomTensor(3, 3, 4, 4, rng), rng, 3e-2);
}

TEST(Layers, BasicBlockInputGradient) {
  std::mt19937_64 rng(4);
  nn::BasicBlock block(3, 5, 2);
  block.Init(rng);
  CheckInputGradient(block, RandomTensor(2, 3, 6, 6, rng), rng, 5e-2);
}

}  // namespace
}  // namespace fpm_spoof
