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
#include <span>
#include <vector>

namespace fpm_spoof {

enum class WavEncoding { kPcm16, kPcm24, kPcm32, kFloat32 };

// Decoded WAV contents, one vector per channel, samples scaled to [-1, 1].
struct WavAudio {
  int sample_rate = 0;
  std::vector<std::vector<float>> channels;

  std::size_t num_frames() const {
    return channels.empty() ? 0 : channels.front().size();
  }
};

// Reads PCM WAV (8/16/24/32-bit integer, 32/64-bit float, including
// WAVE_FORMAT_EXTENSIBLE). Throws Error(kDecode) on malformed input.
WavAudio ReadWav(const std::filesystem::path& path);

void WriteWav(const std::filesystem::path& path,
              const std::vector<std::vector<float>>& channels,
              int sample_rate, WavEncoding encoding = WavEncoding::kFloat32);

inline void WriteWavMono(const std::filesystem::path& path,
                         std::span<const float> samples, int sample_rate,
                         WavEncoding encoding = WavEncoding::kFloat32) {
  WriteWav(path, {std::vector<float>(samples.begin(), samples.end())},
           sample_rate, encoding);
}

}  // namespace fpm_spoof
