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
#include <cmath>
#include <span>
#include <vector>

#include "fpm_spoof/backbone.h"
#include "fpm_spoof/tensor.h"

namespace fpm_spoof {

// Per-position teacher-student discrepancy for one layer, over an
// [n, c, h, w] activation block stored NCHW:
//
//   d(n,h,w) = 1/2 * || t/|t| - s/|s| ||^2   over the channel axis,
//
// with zero vectors normalizing to zero. Returns the sum of d. When
// `per_position` is non-null it receives n*h*w values (n-major). When
// `grad_student` is non-null, grad_scale * dd/ds is accumulated into it
// (zero where |s| = 0).
template <typename T>
double LayerDiscrepancy(const T* teacher, const T* student, int n, int c, int h,
                        int w, double* per_position = nullptr,
                        T* grad_student = nullptr, double grad_scale = 1.0) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t sample = plane * c;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const T* tb = teacher + i * sample;
    const T* sb = student + i * sample;
    for (std::size_t p = 0; p < plane; ++p) {
      double tn = 0.0, sn = 0.0, dot = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        const double tv = tb[ch * plane + p];
        const double sv = sb[ch * plane + p];
        tn += tv * tv;
        sn += sv * sv;
        dot += tv * sv;
      }
      tn = std::sqrt(tn);
      sn = std::sqrt(sn);
      const double t_inv = tn > 0.0 ? 1.0 / tn : 0.0;
      const double s_inv = sn > 0.0 ? 1.0 / sn : 0.0;
      const double cos_ts = dot * t_inv * s_inv;
      double d = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        const double diff = tb[ch * plane + p] * t_inv - sb[ch * plane + p] * s_inv;
        d += diff * diff;
      }
      d *= 0.5;
      total += d;
      if (per_position != nullptr) per_position[i * plane + p] = d;
      if (grad_student != nullptr && sn > 0.0) {
        T* gb = grad_student + i * sample;
        for (int ch = 0; ch < c; ++ch) {
          const double t_hat = tb[ch * plane + p] * t_inv;
          const double s_hat = sb[ch * plane + p] * s_inv;
          gb[ch * plane + p] +=
              static_cast<T>(grad_scale * s_inv * (cos_ts * s_hat - t_hat));
        }
      }
    }
  }
  return total;
}

// Feature-pyramid matching loss: per-layer mean of the per-position
// discrepancy, averaged over the three layers. Range [0, 2].
double FpmLoss(const FeaturePyramid& teacher, const FeaturePyramid& student);

// Batched loss over [N, C, H, W] taps. When `grad_student` is non-null it is
// filled with dLoss/d(student taps).
double FpmLossBatch(const std::array<Tensor, 3>& teacher,
                    const std::array<Tensor, 3>& student,
                    std::array<Tensor, 3>* grad_student = nullptr);

// Per-sample loss for every element of a batch.
std::vector<double> FpmLossPerSample(const std::array<Tensor, 3>& teacher,
                                     const std::array<Tensor, 3>& student);

}  // namespace fpm_spoof
