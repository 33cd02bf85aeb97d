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
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fpm_spoof/frontend.h"
#include "fpm_spoof/layers.h"
#include "fpm_spoof/tensor.h"

namespace fpm_spoof {

enum class Role { kTeacher, kStudent };
std::string_view RoleName(Role role);
Role ParseRole(std::string_view token);

struct BackboneConfig {
  int in_channels = 1;
  std::vector<int> stage_channels = {64, 128, 256, 512};
  int blocks_per_stage = 2;
  int stem_stride = 2;
  std::vector<int> stage_strides = {1, 2, 2, 2};
  double dropout_p = 0.3;
  int embed_dim = 256;
  // Classifier width; 0 means no classifier head (student).
  int n_classes = 0;
  // Zero-based stage indices whose outputs form the feature pyramid.
  std::vector<int> tap_stages = {1, 2, 3};

  void Validate() const;
  // Same feature-extraction topology (ignores the classifier head).
  bool SameTopology(const BackboneConfig& other) const;
  bool operator==(const BackboneConfig&) const = default;
};

nlohmann::ordered_json ToJson(const BackboneConfig& config);
BackboneConfig BackboneConfigFromJson(const nlohmann::json& j);

// Activations tapped at three stage outputs, ordered shallow to deep. Each map
// is a batch-of-one tensor [1, C_l, H_l, W_l].
struct FeaturePyramid {
  std::array<Tensor, 3> maps;
  int source_rows = 0;
  int source_cols = 0;
};

// Batched counterpart used by training and scoring: maps are [N, C_l, H_l, W_l].
struct PyramidBatch {
  std::array<Tensor, 3> maps;
  Tensor logits;  // [N, n_classes, 1, 1]; empty for the student
};

// Stacks spectrograms into an [N, 1, F, T] tensor. All must share a shape.
Tensor StackMels(const std::vector<const Matrix*>& mels);

// ResNet18-style 2D CNN: 3x3 stem (no max-pool), four stages of basic residual
// blocks, global average pooling, dropout, a 256-unit FC + ReLU and, for the
// teacher only, a linear classifier.
class Backbone {
 public:
  Backbone(const BackboneConfig& config, const FrontendConfig& frontend,
           Role role, std::uint64_t seed);

  // The registry points into members, so the model is pinned in memory.
  Backbone(const Backbone&) = delete;
  Backbone& operator=(const Backbone&) = delete;

  const BackboneConfig& config() const { return config_; }
  const FrontendConfig& frontend() const { return frontend_; }
  Role role() const { return role_; }

  // Inference mode (running BN statistics, dropout off); const and safe for
  // concurrent use.
  FeaturePyramid ForwardFeatures(const MelSpectrogram& mel) const;
  std::vector<float> ForwardLogits(const MelSpectrogram& mel) const;
  PyramidBatch Infer(const Tensor& x, bool with_logits) const;

  // Training mode: batch statistics, dropout active, activations cached.
  PyramidBatch Forward(const Tensor& x, bool with_logits);
  // Back-propagates a logits gradient and/or gradients at the pyramid taps.
  // Null entries contribute nothing.
  void Backward(const Tensor* logits_grad,
                const std::array<const Tensor*, 3>& tap_grads);

  // Re-estimates BN running statistics from the training-mode forwards run
  // between these calls.
  void BeginStatsPass();
  void EndStatsPass();

  void ZeroGrad();
  nn::Registry& registry() { return registry_; }
  const nn::Registry& registry() const { return registry_; }

  // FNV-1a over every parameter and buffer in registry order.
  std::string WeightDigest() const;
  // Copies parameter and buffer values from a model with the same topology.
  void CopyFeatureWeightsFrom(const Backbone& other);

  // Spatial sizes of the three taps for an F x T input.
  std::array<std::pair<int, int>, 3> PyramidShape(int rows, int cols) const;

 private:
  void CheckInput(const Tensor& x) const;
  void BuildRegistry();

  BackboneConfig config_;
  FrontendConfig frontend_;
  Role role_;
  nn::Conv2d stem_conv_;
  nn::BatchNorm2d stem_bn_;
  std::vector<std::vector<nn::BasicBlock>> stages_;
  nn::Linear fc_;
  std::optional<nn::Linear> classifier_;
  nn::Registry registry_;
  std::mt19937_64 dropout_rng_;

  // Training caches.
  Tensor stem_out_;
  std::vector<std::pair<int, int>> stage_out_hw_;
  int last_h_ = 0, last_w_ = 0;
  std::vector<float> dropout_mask_;
  Tensor fc_out_;
};

}  // namespace fpm_spoof
