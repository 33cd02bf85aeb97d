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

#include "fpm_spoof/backbone.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_map>

#include "fpm_spoof/errors.h"
#include "fpm_spoof/io_util.h"

namespace fpm_spoof {

std::string_view RoleName(Role role) {
  return role == Role::kTeacher ? "teacher" : "student";
}

Role ParseRole(std::string_view token) {
  if (token == "teacher") return Role::kTeacher;
  if (token == "student") return Role::kStudent;
  Fail(ErrorKind::kValidation, "unknown role '" + std::string(token) + "'");
}

void BackboneConfig::Validate() const {
  auto bad = [](const std::string& msg) { Fail(ErrorKind::kConfig, msg); };
  if (in_channels != 1) bad("in_channels must be 1 (mono spectrogram)");
  if (stage_channels.size() != 4 || stage_strides.size() != 4) {
    bad("backbone needs exactly 4 stages");
  }
  for (int c : stage_channels) {
    if (c <= 0) bad("stage_channels must be positive");
  }
  for (int s : stage_strides) {
    if (s <= 0) bad("stage_strides must be positive");
  }
  if (blocks_per_stage <= 0) bad("blocks_per_stage must be positive");
  if (stem_stride <= 0) bad("stem_stride must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) bad("dropout_p must be in [0,1)");
  if (embed_dim != 256) bad("embed_dim must be 256");
  if (n_classes < 0) bad("n_classes must be >= 0");
  if (tap_stages.size() != 3) bad("tap_stages must have exactly 3 entries");
  for (std::size_t i = 0; i < tap_stages.size(); ++i) {
    if (tap_stages[i] < 0 || tap_stages[i] > 3) bad("tap stage out of range");
    if (i > 0 && tap_stages[i] <= tap_stages[i - 1]) {
      bad("tap_stages must be strictly increasing");
    }
  }
}

bool BackboneConfig::SameTopology(const BackboneConfig& o) const {
  return in_channels == o.in_channels && stage_channels == o.stage_channels &&
         blocks_per_stage == o.blocks_per_stage && stem_stride == o.stem_stride &&
         stage_strides == o.stage_strides && embed_dim == o.embed_dim &&
         tap_stages == o.tap_stages;
}

nlohmann::ordered_json ToJson(const BackboneConfig& c) {
  nlohmann::ordered_json j;
  j["in_channels"] = c.in_channels;
  j["stage_channels"] = c.stage_channels;
  j["blocks_per_stage"] = c.blocks_per_stage;
  j["stem_stride"] = c.stem_stride;
  j["stage_strides"] = c.stage_strides;
  j["dropout_p"] = c.dropout_p;
  j["embed_dim"] = c.embed_dim;
  j["n_classes"] = c.n_classes;
  j["tap_stages"] = c.tap_stages;
  return j;
}

BackboneConfig BackboneConfigFromJson(const nlohmann::json& j) {
  BackboneConfig c;
  try {
    c.in_channels = j.value("in_channels", c.in_channels);
    c.stage_channels = j.value("stage_channels", c.stage_channels);
    c.blocks_per_stage = j.value("blocks_per_stage", c.blocks_per_stage);
    c.stem_stride = j.value("stem_stride", c.stem_stride);
    c.stage_strides = j.value("stage_strides", c.stage_strides);
    c.dropout_p = j.value("dropout_p", c.dropout_p);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.n_classes = j.value("n_classes", c.n_classes);
    c.tap_stages = j.value("tap_stages", c.tap_stages);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, std::string("backbone config: ") + e.what());
  }
  c.Validate();
  return c;
}

Tensor StackMels(const std::vector<const Matrix*>& mels) {
  if (mels.empty()) Fail(ErrorKind::kShape, "StackMels: empty batch");
  const int rows = mels.front()->rows, cols = mels.front()->cols;
  Tensor x(static_cast<int>(mels.size()), 1, rows, cols);
  for (std::size_t i = 0; i < mels.size(); ++i) {
    if (mels[i]->rows != rows || mels[i]->cols != cols) {
      Fail(ErrorKind::kShape, "StackMels: mixed spectrogram shapes");
    }
    std::copy(mels[i]->values.begin(), mels[i]->values.end(),
              x.sample(static_cast<int>(i)));
  }
  return x;
}

Backbone::Backbone(const BackboneConfig& config, const FrontendConfig& frontend,
                   Role role, std::uint64_t seed)
    : config_(config), frontend_(frontend), role_(role) {
  config_.Validate();
  frontend_.Validate();
  if (role_ == Role::kTeacher && config_.n_classes <= 0) {
    Fail(ErrorKind::kConfig, "teacher needs n_classes > 0");
  }
  if (role_ == Role::kStudent && config_.n_classes != 0) {
    Fail(ErrorKind::kConfig, "student has no classifier head (n_classes must be 0)");
  }
  const auto& ch = config_.stage_channels;
  stem_conv_ = nn::Conv2d(config_.in_channels, ch[0], 3, config_.stem_stride, 1);
  stem_bn_ = nn::BatchNorm2d(ch[0]);
  int in = ch[0];
  stages_.resize(4);
  for (int s = 0; s < 4; ++s) {
    for (int b = 0; b < config_.blocks_per_stage; ++b) {
      stages_[s].emplace_back(in, ch[s], b == 0 ? config_.stage_strides[s] : 1);
      in = ch[s];
    }
  }
  fc_ = nn::Linear(ch[3], config_.embed_dim);
  if (role_ == Role::kTeacher) classifier_.emplace(config_.embed_dim, config_.n_classes);

  std::mt19937_64 rng(seed);
  stem_conv_.Init(rng);
  for (auto& stage : stages_) {
    for (auto& block : stage) block.Init(rng);
  }
  fc_.Init(rng);
  if (classifier_) classifier_->Init(rng);
  dropout_rng_.seed(seed ^ 0x9e3779b97f4a7c15ULL);
  BuildRegistry();
}

void Backbone::BuildRegistry() {
  registry_ = {};
  stem_conv_.Register("conv1", registry_);
  stem_bn_.Register("bn1", registry_);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      stages_[s][b].Register(
          "layer" + std::to_string(s + 1) + "." + std::to_string(b), registry_);
    }
  }
  fc_.Register("fc", registry_);
  if (classifier_) classifier_->Register("classifier", registry_);
}

void Backbone::CheckInput(const Tensor& x) const {
  if (x.c != config_.in_channels || x.h != frontend_.n_mels ||
      x.w != frontend_.FramesPerSegment()) {
    Fail(ErrorKind::kShape,
         "backbone input " + x.ShapeString() + " does not match frontend (" +
             std::to_string(frontend_.n_mels) + "x" +
             std::to_string(frontend_.FramesPerSegment()) + ")");
  }
}

std::array<std::pair<int, int>, 3> Backbone::PyramidShape(int rows,
                                                          int cols) const {
  auto out = [](int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; };
  int h = out(rows, 3, config_.stem_stride, 1);
  int w = out(cols, 3, config_.stem_stride, 1);
  std::array<std::pair<int, int>, 3> shapes{};
  int tap = 0;
  for (int s = 0; s < 4; ++s) {
    h = out(h, 3, config_.stage_strides[s], 1);
    w = out(w, 3, config_.stage_strides[s], 1);
    if (tap < 3 && config_.tap_stages[tap] == s) shapes[tap++] = {h, w};
  }
  return shapes;
}

PyramidBatch Backbone::Infer(const Tensor& x, bool with_logits) const {
  CheckInput(x);
  if (with_logits && role_ != Role::kTeacher) {
    Fail(ErrorKind::kRole, "logits requested from a student model");
  }
  PyramidBatch out;
  Tensor h = stem_bn_.Infer(stem_conv_.Infer(x));
  nn::ReluInPlace(h);
  int tap = 0;
  for (int s = 0; s < 4; ++s) {
    for (const auto& block : stages_[s]) h = block.Infer(h);
    if (tap < 3 && config_.tap_stages[tap] == s) out.maps[tap++] = h;
  }
  if (with_logits) {
    Tensor e = fc_.Infer(nn::GlobalAvgPool(h));
    nn::ReluInPlace(e);
    out.logits = classifier_->Infer(e);
  }
  return out;
}

FeaturePyramid Backbone::ForwardFeatures(const MelSpectrogram& mel) const {
  PyramidBatch b = Infer(StackMels({&mel.values}), false);
  FeaturePyramid p;
  p.maps = std::move(b.maps);
  p.source_rows = mel.values.rows;
  p.source_cols = mel.values.cols;
  return p;
}

std::vector<float> Backbone::ForwardLogits(const MelSpectrogram& mel) const {
  if (role_ != Role::kTeacher) {
    Fail(ErrorKind::kRole, "forward_logits called on a student model");
  }
  PyramidBatch b = Infer(StackMels({&mel.values}), true);
  return b.logits.data;
}

PyramidBatch Backbone::Forward(const Tensor& x, bool with_logits) {
  CheckInput(x);
  if (with_logits && role_ != Role::kTeacher) {
    Fail(ErrorKind::kRole, "logits requested from a student model");
  }
  PyramidBatch out;
  Tensor h = stem_bn_.Forward(stem_conv_.Forward(x));
  nn::ReluInPlace(h);
  stem_out_ = h;
  int tap = 0;
  for (int s = 0; s < 4; ++s) {
    for (auto& block : stages_[s]) h = block.Forward(h);
    if (tap < 3 && config_.tap_stages[tap] == s) out.maps[tap++] = h;
  }
  last_h_ = h.h;
  last_w_ = h.w;
  if (with_logits) {
    Tensor pooled = nn::GlobalAvgPool(h);
    const auto p = static_cast<float>(config_.dropout_p);
    dropout_mask_.assign(pooled.size(), 1.0f);
    if (p > 0.0f) {
      std::bernoulli_distribution keep(1.0 - p);
      const float scale = 1.0f / (1.0f - p);
      for (std::size_t i = 0; i < pooled.size(); ++i) {
        dropout_mask_[i] = keep(dropout_rng_) ? scale : 0.0f;
        pooled.data[i] *= dropout_mask_[i];
      }
    }
    Tensor e = fc_.Forward(pooled);
    nn::ReluInPlace(e);
    fc_out_ = e;
    out.logits = classifier_->Forward(e);
  }
  return out;
}

void Backbone::Backward(const Tensor* logits_grad,
                        const std::array<const Tensor*, 3>& tap_grads) {
  Tensor grad;  // gradient w.r.t. the current stage output
  bool have_grad = false;
  if (logits_grad != nullptr) {
    if (role_ != Role::kTeacher) Fail(ErrorKind::kRole, "student has no logits");
    Tensor de = classifier_->Backward(*logits_grad);
    nn::ReluBackwardInPlace(de, fc_out_);
    Tensor dpooled = fc_.Backward(de);
    for (std::size_t i = 0; i < dpooled.size(); ++i) dpooled.data[i] *= dropout_mask_[i];
    grad = nn::GlobalAvgPoolBackward(dpooled, last_h_, last_w_);
    have_grad = true;
  }
  for (int s = 3; s >= 0; --s) {
    for (int t = 0; t < 3; ++t) {
      if (config_.tap_stages[t] != s || tap_grads[t] == nullptr) continue;
      if (!have_grad) {
        grad = *tap_grads[t];
        have_grad = true;
      } else {
        if (!grad.SameShape(*tap_grads[t])) {
          Fail(ErrorKind::kShape, "tap gradient shape mismatch");
        }
        for (std::size_t i = 0; i < grad.size(); ++i) grad.data[i] += tap_grads[t]->data[i];
      }
    }
    if (!have_grad) continue;
    for (auto it = stages_[s].rbegin(); it != stages_[s].rend(); ++it) {
      grad = it->Backward(grad);
    }
  }
  if (!have_grad) return;
  nn::ReluBackwardInPlace(grad, stem_out_);
  stem_conv_.Backward(stem_bn_.Backward(grad), /*need_input_grad=*/false);
}

void Backbone::BeginStatsPass() {
  stem_bn_.BeginStatsPass();
  for (auto& stage : stages_) {
    for (auto& block : stage) block.BeginStatsPass();
  }
}

void Backbone::EndStatsPass() {
  stem_bn_.EndStatsPass();
  for (auto& stage : stages_) {
    for (auto& block : stage) block.EndStatsPass();
  }
}

void Backbone::ZeroGrad() {
  for (auto& p : registry_.params) p.param->ZeroGrad();
}

std::string Backbone::WeightDigest() const {
  std::uint64_t h = Fnv1a("");
  auto feed = [&h](const std::vector<float>& v) {
    h = Fnv1a(std::string_view(reinterpret_cast<const char*>(v.data()),
                               v.size() * sizeof(float)),
              h);
  };
  for (const auto& p : registry_.params) feed(p.param->value);
  for (const auto& b : registry_.buffers) feed(*b.values);
  return HexDigest(h);
}

void Backbone::CopyFeatureWeightsFrom(const Backbone& other) {
  if (!config_.SameTopology(other.config_)) {
    Fail(ErrorKind::kConfig, "cannot copy weights across different topologies");
  }
  std::unordered_map<std::string, const Param*> src;
  for (const auto& p : other.registry_.params) src[p.name] = p.param;
  std::unordered_map<std::string, const std::vector<float>*> src_buf;
  for (const auto& b : other.registry_.buffers) src_buf[b.name] = b.values;
  for (auto& p : registry_.params) {
    auto it = src.find(p.name);
    if (it != src.end() && it->second->size() == p.param->size()) {
      p.param->value = it->second->value;
    }
  }
  for (auto& b : registry_.buffers) {
    auto it = src_buf.find(b.name);
    if (it != src_buf.end()) *b.values = *it->second;
  }
}

}  // namespace fpm_spoof
