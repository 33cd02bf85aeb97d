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

#include "fpm_spoof/fpm_loss.h"

#include "fpm_spoof/errors.h"

namespace fpm_spoof {
namespace {

void CheckPair(const Tensor& t, const Tensor& s, int layer) {
  if (!t.SameShape(s)) {
    Fail(ErrorKind::kShape, "pyramid layer " + std::to_string(layer) +
                                ": teacher " + t.ShapeString() + " vs student " +
                                s.ShapeString());
  }
}

}  // namespace

double FpmLoss(const FeaturePyramid& teacher, const FeaturePyramid& student) {
  return FpmLossBatch(teacher.maps, student.maps);
}

double FpmLossBatch(const std::array<Tensor, 3>& teacher,
                    const std::array<Tensor, 3>& student,
                    std::array<Tensor, 3>* grad_student) {
  double loss = 0.0;
  for (int l = 0; l < 3; ++l) {
    const Tensor& t = teacher[l];
    const Tensor& s = student[l];
    CheckPair(t, s, l);
    const double positions = static_cast<double>(t.n) * t.h * t.w;
    float* grad = nullptr;
    if (grad_student != nullptr) {
      (*grad_student)[l] = Tensor(s.n, s.c, s.h, s.w);
      grad = (*grad_student)[l].data.data();
    }
    const double sum = LayerDiscrepancy<float>(t.data.data(), s.data.data(), t.n,
                                               t.c, t.h, t.w, nullptr, grad,
                                               1.0 / (3.0 * positions));
    loss += sum / positions;
  }
  return loss / 3.0;
}

std::vector<double> FpmLossPerSample(const std::array<Tensor, 3>& teacher,
                                     const std::array<Tensor, 3>& student) {
  const int n = teacher[0].n;
  std::vector<double> out(n, 0.0);
  for (int l = 0; l < 3; ++l) {
    const Tensor& t = teacher[l];
    const Tensor& s = student[l];
    CheckPair(t, s, l);
    const std::size_t plane = t.plane();
    for (int i = 0; i < n; ++i) {
      const double sum = LayerDiscrepancy<float>(t.sample(i), s.sample(i), 1, t.c,
                                                 t.h, t.w);
      out[i] += sum / static_cast<double>(plane) / 3.0;
    }
  }
  return out;
}

}  // namespace fpm_spoof
