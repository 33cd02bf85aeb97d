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

#include "fpm_spoof/plot.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "fpm_spoof/tensor_io.h"

namespace fpm_spoof {
namespace {

constexpr int kMargin = 24;
constexpr float kInk = 0.0f;
constexpr float kGrid = 0.85f;

void Plot(Matrix& img, int x, int y, float v) {
  if (x >= 0 && x < img.cols && y >= 0 && y < img.rows) img.at(y, x) = v;
}

void Line(Matrix& img, int x0, int y0, int x1, int y1, float v) {
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    Plot(img, x0, y0, v);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void Axes(Matrix& img) {
  const int w = img.cols, h = img.rows;
  Line(img, kMargin, kMargin, w - kMargin, kMargin, kInk);
  Line(img, kMargin, kMargin, kMargin, h - kMargin, kInk);
  for (int t = 0; t <= 4; ++t) {
    const int x = kMargin + (w - 2 * kMargin) * t / 4;
    const int y = kMargin + (h - 2 * kMargin) * t / 4;
    Line(img, x, kMargin - 4, x, kMargin, kInk);
    Line(img, kMargin - 4, y, kMargin, y, kInk);
  }
}

}  // namespace

Matrix RenderRoc(const std::vector<RocPoint>& roc, int size) {
  Matrix img(size, size, 1.0f);
  const int span = size - 2 * kMargin;
  auto px = [&](double v) { return kMargin + static_cast<int>(std::lround(v * span)); };
  for (int i = 0; i <= span; i += 4) Plot(img, kMargin + i, kMargin + i, kGrid);
  Axes(img);
  for (std::size_t i = 1; i < roc.size(); ++i) {
    Line(img, px(roc[i - 1].fpr), px(roc[i - 1].tpr), px(roc[i].fpr), px(roc[i].tpr), kInk);
  }
  return img;
}

Matrix RenderHistogram(const Histogram& h, int width, int height) {
  Matrix img(height, width, 1.0f);
  const std::size_t bins = h.real_counts.size();
  std::size_t peak = 1;
  for (std::size_t b = 0; b < bins; ++b) {
    peak = std::max({peak, h.real_counts[b], h.fake_counts[b]});
  }
  const double bin_w = static_cast<double>(width - 2 * kMargin) / std::max<std::size_t>(1, bins);
  const double unit = static_cast<double>(height - 2 * kMargin) / static_cast<double>(peak);
  for (std::size_t b = 0; b < bins; ++b) {
    const int x0 = kMargin + static_cast<int>(b * bin_w);
    const int x1 = kMargin + static_cast<int>((b + 1) * bin_w) - 1;
    const int real_top = kMargin + static_cast<int>(std::lround(h.real_counts[b] * unit));
    for (int x = x0; x <= x1; ++x) {
      for (int y = kMargin; y < real_top; ++y) Plot(img, x, y, 0.7f);
    }
    const int fake_top = kMargin + static_cast<int>(std::lround(h.fake_counts[b] * unit));
    if (h.fake_counts[b] > 0) {
      Line(img, x0, kMargin, x0, fake_top, 0.25f);
      Line(img, x0, fake_top, x1, fake_top, 0.25f);
      Line(img, x1, fake_top, x1, kMargin, 0.25f);
    }
  }
  Axes(img);
  return img;
}

void WriteRocPng(const std::filesystem::path& path, const std::vector<RocPoint>& roc) {
  WriteHeatmapPng(path, RenderRoc(roc));
}

void WriteHistogramPng(const std::filesystem::path& path, const Histogram& histogram) {
  WriteHeatmapPng(path, RenderHistogram(histogram));
}

}  // namespace fpm_spoof
