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

#include "fpm_spoof/layers.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "fpm_spoof/errors.h"

namespace fpm_spoof {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

std::string Tensor::ShapeString() const {
  return "[" + std::to_string(n) + "," + std::to_string(c) + "," +
         std::to_string(h) + "," + std::to_string(w) + "]";
}

Tensor Tensor::Slice(int i) const {
  Tensor out(1, c, h, w);
  std::copy(sample(i), sample(i) + sample_size(), out.data.begin());
  return out;
}

Param::Param(std::vector<int> shape_) : shape(std::move(shape_)) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  if (shape.empty()) n = 0;
  value.assign(n, 0.0f);
  grad.assign(n, 0.0f);
}

void Param::ZeroGrad() { std::fill(grad.begin(), grad.end(), 0.0f); }

namespace nn {
namespace {

void Im2Col(const float* x, int c, int h, int w, int k, int stride, int pad,
            int ho, int wo, float* col) {
  const int p = ho * wo;
  for (int ic = 0; ic < c; ++ic) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        float* row = col + static_cast<std::size_t>((ic * k + ki) * k + kj) * p;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * stride - pad + ki;
          float* dst = row + oh * wo;
          if (ih < 0 || ih >= h) {
            std::fill(dst, dst + wo, 0.0f);
            continue;
          }
          const float* src = x + (static_cast<std::size_t>(ic) * h + ih) * w;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * stride - pad + kj;
            dst[ow] = (iw >= 0 && iw < w) ? src[iw] : 0.0f;
          }
        }
      }
    }
  }
}

void Col2Im(const float* col, int c, int h, int w, int k, int stride, int pad,
            int ho, int wo, float* x) {
  const int p = ho * wo;
  for (int ic = 0; ic < c; ++ic) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const float* row =
            col + static_cast<std::size_t>((ic * k + ki) * k + kj) * p;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= h) continue;
          float* dst = x + (static_cast<std::size_t>(ic) * h + ih) * w;
          const float* src = row + oh * wo;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * stride - pad + kj;
            if (iw >= 0 && iw < w) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride,
               int pad)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride),
      pad_(pad), weight_({out_channels, in_channels * kernel * kernel}) {}

void Conv2d::Init(std::mt19937_64& rng) {
  const double fan_out = static_cast<double>(out_) * kernel_ * kernel_;
  std::normal_distribution<float> dist(0.0f,
                                       static_cast<float>(std::sqrt(2.0 / fan_out)));
  for (float& v : weight_.value) v = dist(rng);
}

Tensor Conv2d::Infer(const Tensor& x) const {
  if (x.c != in_) {
    Fail(ErrorKind::kShape, "conv: expected " + std::to_string(in_) +
                                " input channels, got " + x.ShapeString());
  }
  const int ho = OutSize(x.h), wo = OutSize(x.w);
  if (ho <= 0 || wo <= 0) {
    Fail(ErrorKind::kShape, "conv: input too small " + x.ShapeString());
  }
  Tensor y(x.n, out_, ho, wo);
  const int ckk = in_ * kernel_ * kernel_;
  const int p = ho * wo;
  std::vector<float> col(static_cast<std::size_t>(ckk) * p);
  ConstMapMat wmat(weight_.value.data(), out_, ckk);
  for (int i = 0; i < x.n; ++i) {
    Im2Col(x.sample(i), in_, x.h, x.w, kernel_, stride_, pad_, ho, wo, col.data());
    ConstMapMat cmat(col.data(), ckk, p);
    MapMat ymat(y.sample(i), out_, p);
    ymat.noalias() = wmat * cmat;
  }
  return y;
}

Tensor Conv2d::Forward(const Tensor& x) {
  input_ = x;
  return Infer(x);
}

Tensor Conv2d::Backward(const Tensor& dy, bool need_input_grad) {
  const Tensor& x = input_;
  const int ho = dy.h, wo = dy.w;
  const int ckk = in_ * kernel_ * kernel_;
  const int p = ho * wo;
  std::vector<float> col(static_cast<std::size_t>(ckk) * p);
  std::vector<float> dcol(need_input_grad ? col.size() : 0);
  ConstMapMat wmat(weight_.value.data(), out_, ckk);
  MapMat dwmat(weight_.grad.data(), out_, ckk);
  Tensor dx;
  if (need_input_grad) dx = Tensor(x.n, x.c, x.h, x.w);
  for (int i = 0; i < x.n; ++i) {
    Im2Col(x.sample(i), in_, x.h, x.w, kernel_, stride_, pad_, ho, wo, col.data());
    ConstMapMat cmat(col.data(), ckk, p);
    ConstMapMat dymat(dy.sample(i), out_, p);
    dwmat.noalias() += dymat * cmat.transpose();
    if (need_input_grad) {
      MapMat dcmat(dcol.data(), ckk, p);
      dcmat.noalias() = wmat.transpose() * dymat;
      Col2Im(dcol.data(), in_, x.h, x.w, kernel_, stride_, pad_, ho, wo,
             dx.sample(i));
    }
  }
  return dx;
}

void Conv2d::Register(const std::string& prefix, Registry& reg) {
  reg.params.push_back({prefix + ".weight", &weight_});
}

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, float eps)
    : channels_(channels), eps_(eps), gamma_({channels}), beta_({channels}),
      running_mean_(channels, 0.0f), running_var_(channels, 1.0f) {
  std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0f);
}

Tensor BatchNorm2d::Infer(const Tensor& x) const {
  Tensor y(x.n, x.c, x.h, x.w);
  const std::size_t plane = x.plane();
  for (int ch = 0; ch < channels_; ++ch) {
    const float scale = gamma_.value[ch] / std::sqrt(running_var_[ch] + eps_);
    const float shift = beta_.value[ch] - running_mean_[ch] * scale;
    for (int i = 0; i < x.n; ++i) {
      const float* src = x.sample(i) + ch * plane;
      float* dst = y.sample(i) + ch * plane;
      for (std::size_t k = 0; k < plane; ++k) dst[k] = src[k] * scale + shift;
    }
  }
  return y;
}

Tensor BatchNorm2d::Forward(const Tensor& x) {
  Tensor y(x.n, x.c, x.h, x.w);
  xhat_ = Tensor(x.n, x.c, x.h, x.w);
  inv_std_.assign(channels_, 0.0f);
  const std::size_t plane = x.plane();
  const double m = static_cast<double>(x.n) * plane;
  for (int ch = 0; ch < channels_; ++ch) {
    double sum = 0.0;
    for (int i = 0; i < x.n; ++i) {
      const float* src = x.sample(i) + ch * plane;
      for (std::size_t k = 0; k < plane; ++k) sum += src[k];
    }
    const double mean = sum / m;
    double sq = 0.0;
    for (int i = 0; i < x.n; ++i) {
      const float* src = x.sample(i) + ch * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        const double d = src[k] - mean;
        sq += d * d;
      }
    }
    const double var = sq / m;
    const auto inv = static_cast<float>(1.0 / std::sqrt(var + eps_));
    inv_std_[ch] = inv;
    const auto meanf = static_cast<float>(mean);
    for (int i = 0; i < x.n; ++i) {
      const float* src = x.sample(i) + ch * plane;
      float* xh = xhat_.sample(i) + ch * plane;
      float* dst = y.sample(i) + ch * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        xh[k] = (src[k] - meanf) * inv;
        dst[k] = xh[k] * gamma_.value[ch] + beta_.value[ch];
      }
    }
    if (collecting_) {
      sum_mean_[ch] += mean;
      sum_var_[ch] += m > 1 ? sq / (m - 1) : var;
    }
  }
  if (collecting_) ++n_batches_;
  return y;
}

Tensor BatchNorm2d::Backward(const Tensor& dy) {
  Tensor dx(dy.n, dy.c, dy.h, dy.w);
  const std::size_t plane = dy.plane();
  const double m = static_cast<double>(dy.n) * plane;
  for (int ch = 0; ch < channels_; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < dy.n; ++i) {
      const float* g = dy.sample(i) + ch * plane;
      const float* xh = xhat_.sample(i) + ch * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        sum_dy += g[k];
        sum_dy_xhat += static_cast<double>(g[k]) * xh[k];
      }
    }
    gamma_.grad[ch] += static_cast<float>(sum_dy_xhat);
    beta_.grad[ch] += static_cast<float>(sum_dy);
    const double gamma = gamma_.value[ch];
    const double coef = gamma * inv_std_[ch] / m;
    for (int i = 0; i < dy.n; ++i) {
      const float* g = dy.sample(i) + ch * plane;
      const float* xh = xhat_.sample(i) + ch * plane;
      float* dst = dx.sample(i) + ch * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        dst[k] = static_cast<float>(
            coef * (m * g[k] - sum_dy - xh[k] * sum_dy_xhat));
      }
    }
  }
  return dx;
}

void BatchNorm2d::BeginStatsPass() {
  collecting_ = true;
  sum_mean_.assign(channels_, 0.0);
  sum_var_.assign(channels_, 0.0);
  n_batches_ = 0;
}

void BatchNorm2d::EndStatsPass() {
  collecting_ = false;
  if (n_batches_ == 0) return;
  for (int ch = 0; ch < channels_; ++ch) {
    running_mean_[ch] = static_cast<float>(sum_mean_[ch] / n_batches_);
    running_var_[ch] = static_cast<float>(sum_var_[ch] / n_batches_);
  }
}

void BatchNorm2d::Register(const std::string& prefix, Registry& reg) {
  reg.params.push_back({prefix + ".weight", &gamma_});
  reg.params.push_back({prefix + ".bias", &beta_});
  reg.buffers.push_back({prefix + ".running_mean", &running_mean_});
  reg.buffers.push_back({prefix + ".running_var", &running_var_});
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features)
    : in_(in_features), out_(out_features), weight_({out_features, in_features}),
      bias_({out_features}) {}

void Linear::Init(std::mt19937_64& rng) {
  const auto bound = static_cast<float>(1.0 / std::sqrt(static_cast<double>(in_)));
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (float& v : weight_.value) v = dist(rng);
  for (float& v : bias_.value) v = dist(rng);
}

Tensor Linear::Infer(const Tensor& x) const {
  const int n = x.n;
  if (static_cast<int>(x.sample_size()) != in_) {
    Fail(ErrorKind::kShape, "linear: expected " + std::to_string(in_) +
                                " features, got " + x.ShapeString());
  }
  Tensor y(n, out_, 1, 1);
  ConstMapMat xm(x.data.data(), n, in_);
  ConstMapMat wm(weight_.value.data(), out_, in_);
  MapMat ym(y.data.data(), n, out_);
  ym.noalias() = xm * wm.transpose();
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < out_; ++o) ym(i, o) += bias_.value[o];
  }
  return y;
}

Tensor Linear::Forward(const Tensor& x) {
  input_ = x;
  return Infer(x);
}

Tensor Linear::Backward(const Tensor& dy) {
  const int n = dy.n;
  ConstMapMat dym(dy.data.data(), n, out_);
  ConstMapMat xm(input_.data.data(), n, in_);
  MapMat dwm(weight_.grad.data(), out_, in_);
  dwm.noalias() += dym.transpose() * xm;
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < out_; ++o) bias_.grad[o] += dym(i, o);
  }
  Tensor dx(input_.n, input_.c, input_.h, input_.w);
  ConstMapMat wm(weight_.value.data(), out_, in_);
  MapMat dxm(dx.data.data(), n, in_);
  dxm.noalias() = dym * wm;
  return dx;
}

void Linear::Register(const std::string& prefix, Registry& reg) {
  reg.params.push_back({prefix + ".weight", &weight_});
  reg.params.push_back({prefix + ".bias", &bias_});
}

// ------------------------------------------------------------ BasicBlock

BasicBlock::BasicBlock(int in_channels, int out_channels, int stride)
    : conv1_(in_channels, out_channels, 3, stride, 1),
      conv2_(out_channels, out_channels, 3, 1, 1),
      bn1_(out_channels), bn2_(out_channels),
      project_(stride != 1 || in_channels != out_channels) {
  if (project_) {
    proj_conv_ = Conv2d(in_channels, out_channels, 1, stride, 0);
    proj_bn_ = BatchNorm2d(out_channels);
  }
}

void BasicBlock::Init(std::mt19937_64& rng) {
  conv1_.Init(rng);
  conv2_.Init(rng);
  if (project_) proj_conv_.Init(rng);
}

Tensor BasicBlock::Infer(const Tensor& x) const {
  Tensor h = bn1_.Infer(conv1_.Infer(x));
  ReluInPlace(h);
  Tensor y = bn2_.Infer(conv2_.Infer(h));
  if (project_) {
    Tensor s = proj_bn_.Infer(proj_conv_.Infer(x));
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += s.data[i];
  } else {
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += x.data[i];
  }
  ReluInPlace(y);
  return y;
}

Tensor BasicBlock::Forward(const Tensor& x) {
  Tensor h = bn1_.Forward(conv1_.Forward(x));
  ReluInPlace(h);
  relu1_out_ = h;
  Tensor y = bn2_.Forward(conv2_.Forward(h));
  if (project_) {
    Tensor s = proj_bn_.Forward(proj_conv_.Forward(x));
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += s.data[i];
  } else {
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += x.data[i];
  }
  ReluInPlace(y);
  out_ = y;
  return y;
}

Tensor BasicBlock::Backward(const Tensor& dy_in) {
  Tensor dy = dy_in;
  ReluBackwardInPlace(dy, out_);
  Tensor dh = conv2_.Backward(bn2_.Backward(dy));
  ReluBackwardInPlace(dh, relu1_out_);
  Tensor dx = conv1_.Backward(bn1_.Backward(dh));
  if (project_) {
    Tensor ds = proj_conv_.Backward(proj_bn_.Backward(dy));
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += ds.data[i];
  } else {
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dy.data[i];
  }
  return dx;
}

void BasicBlock::Register(const std::string& prefix, Registry& reg) {
  conv1_.Register(prefix + ".conv1", reg);
  bn1_.Register(prefix + ".bn1", reg);
  conv2_.Register(prefix + ".conv2", reg);
  bn2_.Register(prefix + ".bn2", reg);
  if (project_) {
    proj_conv_.Register(prefix + ".downsample.0", reg);
    proj_bn_.Register(prefix + ".downsample.1", reg);
  }
}

void BasicBlock::BeginStatsPass() {
  bn1_.BeginStatsPass();
  bn2_.BeginStatsPass();
  if (project_) proj_bn_.BeginStatsPass();
}

void BasicBlock::EndStatsPass() {
  bn1_.EndStatsPass();
  bn2_.EndStatsPass();
  if (project_) proj_bn_.EndStatsPass();
}

// --------------------------------------------------------------- helpers

void ReluInPlace(Tensor& x) {
  for (float& v : x.data) v = v > 0.0f ? v : 0.0f;
}

void ReluBackwardInPlace(Tensor& dy, const Tensor& y) {
  for (std::size_t i = 0; i < dy.size(); ++i) {
    if (!(y.data[i] > 0.0f)) dy.data[i] = 0.0f;
  }
}

Tensor GlobalAvgPool(const Tensor& x) {
  Tensor y(x.n, x.c, 1, 1);
  const std::size_t plane = x.plane();
  for (int i = 0; i < x.n; ++i) {
    for (int ch = 0; ch < x.c; ++ch) {
      const float* src = x.sample(i) + ch * plane;
      double sum = 0.0;
      for (std::size_t k = 0; k < plane; ++k) sum += src[k];
      y.at(i, ch, 0, 0) = static_cast<float>(sum / plane);
    }
  }
  return y;
}

Tensor GlobalAvgPoolBackward(const Tensor& dy, int h, int w) {
  Tensor dx(dy.n, dy.c, h, w);
  const std::size_t plane = dx.plane();
  for (int i = 0; i < dy.n; ++i) {
    for (int ch = 0; ch < dy.c; ++ch) {
      const float g = dy.at(i, ch, 0, 0) / static_cast<float>(plane);
      float* dst = dx.sample(i) + ch * plane;
      std::fill(dst, dst + plane, g);
    }
  }
  return dx;
}

}  // namespace nn
}  // namespace fpm_spoof
