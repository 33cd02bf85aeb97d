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

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fpm_spoof/tensor.h"

// Minimal layer set for the ResNet backbone. Each layer offers:
//   Infer()    - inference mode, const, no caching;
//   Forward()  - training mode, caches what Backward() needs;
//   Backward() - consumes dL/dy, accumulates parameter gradients, returns
//                dL/dx.
namespace fpm_spoof::nn {

struct NamedParam {
  std::string name;
  Param* param;
};

struct NamedBuffer {
  std::string name;
  std::vector<float>* values;
};

struct Registry {
  std::vector<NamedParam> params;
  std::vector<NamedBuffer> buffers;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad);

  // Kaiming-normal (fan_out, ReLU gain).
  void Init(std::mt19937_64& rng);

  int OutSize(int in) const { return (in + 2 * pad_ - kernel_) / stride_ + 1; }
  int out_channels() const { return out_; }

  Tensor Infer(const Tensor& x) const;
  Tensor Forward(const Tensor& x);
  Tensor Backward(const Tensor& dy, bool need_input_grad = true);

  void Register(const std::string& prefix, Registry& reg);
  Param& weight() { return weight_; }

 private:
  int in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0;
  Param weight_;  // [out, in * k * k]
  Tensor input_;
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels, float eps = 1e-5f);

  Tensor Infer(const Tensor& x) const;
  Tensor Forward(const Tensor& x);
  Tensor Backward(const Tensor& dy);

  // Running statistics are re-estimated by an explicit pass: between Begin and
  // End, every Forward() adds its batch mean and unbiased variance to an
  // equal-weight average that replaces the running statistics at End.
  void BeginStatsPass();
  void EndStatsPass();

  void Register(const std::string& prefix, Registry& reg);

 private:
  int channels_ = 0;
  float eps_ = 1e-5f;
  Param gamma_, beta_;
  std::vector<float> running_mean_, running_var_;
  // Cached for backward.
  Tensor xhat_;
  std::vector<float> inv_std_;
  // Stats pass accumulators.
  bool collecting_ = false;
  std::vector<double> sum_mean_, sum_var_;
  std::int64_t n_batches_ = 0;
};

class Linear {
 public:
  Linear() = default;
  Linear(int in_features, int out_features);

  // Uniform(-1/sqrt(in), 1/sqrt(in)) for weight and bias.
  void Init(std::mt19937_64& rng);

  // x: [N, in] stored as Tensor(N, in, 1, 1).
  Tensor Infer(const Tensor& x) const;
  Tensor Forward(const Tensor& x);
  Tensor Backward(const Tensor& dy);

  void Register(const std::string& prefix, Registry& reg);
  int out_features() const { return out_; }

 private:
  int in_ = 0, out_ = 0;
  Param weight_;  // [out, in]
  Param bias_;    // [out]
  Tensor input_;
};

// Two 3x3 conv/BN layers with identity or 1x1-projection shortcut.
class BasicBlock {
 public:
  BasicBlock() = default;
  BasicBlock(int in_channels, int out_channels, int stride);

  void Init(std::mt19937_64& rng);
  int OutSize(int in) const { return conv1_.OutSize(in); }

  Tensor Infer(const Tensor& x) const;
  Tensor Forward(const Tensor& x);
  Tensor Backward(const Tensor& dy);

  void Register(const std::string& prefix, Registry& reg);
  void BeginStatsPass();
  void EndStatsPass();

 private:
  Conv2d conv1_, conv2_;
  BatchNorm2d bn1_, bn2_;
  bool project_ = false;
  Conv2d proj_conv_;
  BatchNorm2d proj_bn_;
  Tensor relu1_out_, out_;
};

// In-place ReLU; returns the tensor for chaining.
void ReluInPlace(Tensor& x);
// dy *= (y > 0) where y is the ReLU output.
void ReluBackwardInPlace(Tensor& dy, const Tensor& y);

// [N,C,H,W] -> [N,C,1,1]
Tensor GlobalAvgPool(const Tensor& x);
Tensor GlobalAvgPoolBackward(const Tensor& dy, int h, int w);

}  // namespace fpm_spoof::nn
