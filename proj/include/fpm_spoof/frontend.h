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
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "fpm_spoof/matrix.h"

namespace fpm_spoof {

struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;
};

struct FrontendConfig {
  int sample_rate = 16000;
  double segment_seconds = 4.0;
  int win_length = 400;
  int hop_length = 160;
  int n_fft = 512;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;
  // Per-segment zero-mean/unit-variance standardization of the log-mel map.
  bool standardize = true;

  // Throws Error(kConfig) when an invariant is violated.
  void Validate() const;
  int SegmentSamples() const;
  // Frames per segment: ceil(segment samples / hop).
  int FramesPerSegment() const;

  bool operator==(const FrontendConfig&) const = default;
};

nlohmann::ordered_json ToJson(const FrontendConfig& config);
FrontendConfig FrontendConfigFromJson(const nlohmann::json& j);

struct MelSpectrogram {
  Matrix values;  // n_mels x frames
  FrontendConfig config;
};

// Reads a WAV file, averages channels and resamples to `target_rate`.
Waveform LoadAudio(const std::filesystem::path& path, int target_rate = 16000);

// Windowed-sinc band-limited resampler.
std::vector<float> Resample(std::span<const float> input, int in_rate,
                            int out_rate);

// Splits into consecutive non-overlapping segments of exactly
// SegmentSamples(). A trailing remainder of at least half a segment is
// zero-padded and kept; a shorter remainder is dropped unless it is the only
// content, in which case it is padded to one segment.
std::vector<Waveform> Segment(const Waveform& waveform,
                              const FrontendConfig& config);

// HTK-scale mel frequency helpers.
double HzToMel(double hz);
double MelToHz(double mel);
// Center frequencies (Hz) of the triangular filters.
std::vector<double> MelCenterFrequencies(const FrontendConfig& config);

// Reusable log-mel extractor; owns the FFT plan and filterbank. Compute() is
// const and safe to call from several threads.
class MelExtractor {
 public:
  explicit MelExtractor(const FrontendConfig& config);
  ~MelExtractor();
  MelExtractor(const MelExtractor&) = delete;
  MelExtractor& operator=(const MelExtractor&) = delete;

  // Log-mel values before standardization.
  Matrix ComputeLogMel(std::span<const float> segment) const;
  MelSpectrogram Compute(const Waveform& segment) const;

  const FrontendConfig& config() const { return config_; }

 private:
  struct Impl;
  FrontendConfig config_;
  std::unique_ptr<Impl> impl_;
};

MelSpectrogram ComputeMel(const Waveform& segment, const FrontendConfig& config);

// In-place zero-mean/unit-variance over the whole matrix; zero-variance input
// becomes all zeros.
void StandardizeInPlace(Matrix& m);

// Convenience: load -> segment -> mel for every segment of a file.
std::vector<MelSpectrogram> FileToMels(const std::filesystem::path& path,
                                       const MelExtractor& extractor);

}  // namespace fpm_spoof
