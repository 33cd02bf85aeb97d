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

#include <filesystem>
#include <vector>

#include "fpm_spoof/matrix.h"
#include "fpm_spoof/metrics.h"

namespace fpm_spoof {

// Raster figures as intensity images in [0, 1] (1 = white), row 0 at the
// bottom, ready for WriteHeatmapPng.
Matrix RenderRoc(const std::vector<RocPoint>& roc, int size = 400);
// Real counts in light gray, fake counts in dark gray outlines.
Matrix RenderHistogram(const Histogram& histogram, int width = 480, int height = 320);

void WriteRocPng(const std::filesystem::path& path, const std::vector<RocPoint>& roc);
void WriteHistogramPng(const std::filesystem::path& path, const Histogram& histogram);

}  // namespace fpm_spoof
