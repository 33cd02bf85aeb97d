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

#include "fpm_spoof/frontend.h"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "fpm_spoof/errors.h"
#include "fpm_spoof/wav_io.h"

namespace fpm_spoof {
namespace {

// The FFTW planner is not thread-safe; execution with new-array functions is.
std::mutex& PlannerMutex() {
  static std::mutex m;
  return m;
}

// Reflect index into [0, n) without repeating the edge sample.
std::ptrdiff_t ReflectIndex(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

double Mean(const Matrix& m) {
  if (m.values.empty()) return 0.0;
  double sum = 0.0;
  for (float v : m.values) sum += v;
  return sum / static_cast<double>(m.values.size());
}

void FrontendConfig::Validate() const {
  auto bad = [](const std::string& msg) { Fail(ErrorKind::kConfig, msg); };
  if (sample_rate <= 0) bad("sample_rate must be positive");
  if (!(segment_seconds > 0)) bad("segment_seconds must be positive");
  if (win_length <= 0 || hop_length <= 0 || n_fft <= 0 || n_mels <= 0) {
    bad("frame sizes and n_mels must be positive");
  }
  if (n_fft < win_length) bad("n_fft must be >= win_length");
  if (hop_length > win_length) bad("hop_length must be <= win_length");
  if (fmin < 0 || !(fmax > fmin)) bad("need 0 <= fmin < fmax");
  if (fmax > sample_rate / 2.0) bad("fmax must be <= sample_rate/2");
  if (!(log_floor > 0)) bad("log_floor must be positive");
}

int FrontendConfig::SegmentSamples() const {
  return static_cast<int>(std::lround(segment_seconds * sample_rate));
}

int FrontendConfig::FramesPerSegment() const {
  return (SegmentSamples() + hop_length - 1) / hop_length;
}

nlohmann::ordered_json ToJson(const FrontendConfig& c) {
  nlohmann::ordered_json j;
  j["sample_rate"] = c.sample_rate;
  j["segment_seconds"] = c.segment_seconds;
  j["win_length"] = c.win_length;
  j["hop_length"] = c.hop_length;
  j["n_fft"] = c.n_fft;
  j["n_mels"] = c.n_mels;
  j["fmin"] = c.fmin;
  j["fmax"] = c.fmax;
  j["log_floor"] = c.log_floor;
  j["standardize"] = c.standardize;
  return j;
}

FrontendConfig FrontendConfigFromJson(const nlohmann::json& j) {
  FrontendConfig c;
  try {
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    c.segment_seconds = j.value("segment_seconds", c.segment_seconds);
    c.win_length = j.value("win_length", c.win_length);
    c.hop_length = j.value("hop_length", c.hop_length);
    c.n_fft = j.value("n_fft", c.n_fft);
    c.n_mels = j.value("n_mels", c.n_mels);
    c.fmin = j.value("fmin", c.fmin);
    c.fmax = j.value("fmax", c.fmax);
    c.log_floor = j.value("log_floor", c.log_floor);
    c.standardize = j.value("standardize", c.standardize);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, std::string("frontend config: ") + e.what());
  }
  c.Validate();
  return c;
}

std::vector<float> Resample(std::span<const float> input, int in_rate,
                            int out_rate) {
  if (in_rate <= 0 || out_rate <= 0) {
    Fail(ErrorKind::kConfig, "resample: rates must be positive");
  }
  if (in_rate == out_rate) return {input.begin(), input.end()};
  const auto in_len = static_cast<std::int64_t>(input.size());
  const std::int64_t out_len =
      std::max<std::int64_t>(1, in_len * out_rate / in_rate);

  const double ratio = static_cast<double>(out_rate) / in_rate;
  const double cutoff = std::min(1.0, ratio) * 0.97;
  constexpr int kZeroCrossings = 24;
  const double half_width = kZeroCrossings / cutoff;

  std::vector<float> out(static_cast<std::size_t>(out_len));
  for (std::int64_t n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n) * in_rate / out_rate;
    const auto lo = static_cast<std::int64_t>(std::ceil(t - half_width));
    const auto hi = static_cast<std::int64_t>(std::floor(t + half_width));
    double acc = 0.0;
    for (std::int64_t k = std::max<std::int64_t>(lo, 0);
         k <= std::min(hi, in_len - 1); ++k) {
      const double x = t - static_cast<double>(k);
      const double arg = std::numbers::pi * cutoff * x;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      const double w = 0.5 + 0.5 * std::cos(std::numbers::pi * x / half_width);
      acc += input[static_cast<std::size_t>(k)] * cutoff * sinc * w;
    }
    out[static_cast<std::size_t>(n)] = static_cast<float>(acc);
  }
  return out;
}

Waveform LoadAudio(const std::filesystem::path& path, int target_rate) {
  WavAudio wav = ReadWav(path);
  if (wav.num_frames() == 0) {
    Fail(ErrorKind::kEmptyAudio, path.string() + ": zero-length audio");
  }
  std::vector<float> mono(wav.num_frames(), 0.0f);
  const auto n_ch = static_cast<float>(wav.channels.size());
  for (std::size_t i = 0; i < mono.size(); ++i) {
    float sum = 0.0f;
    for (const auto& ch : wav.channels) sum += ch[i];
    mono[i] = sum / n_ch;
  }
  Waveform out;
  out.sample_rate = target_rate;
  out.samples = Resample(mono, wav.sample_rate, target_rate);
  for (float& v : out.samples) v = std::clamp(v, -1.0f, 1.0f);
  return out;
}

std::vector<Waveform> Segment(const Waveform& waveform,
                              const FrontendConfig& config) {
  if (waveform.samples.empty()) {
    Fail(ErrorKind::kEmptyAudio, "segment: empty waveform");
  }
  const auto seg = static_cast<std::size_t>(config.SegmentSamples());
  const std::size_t total = waveform.samples.size();
  std::vector<Waveform> out;
  std::size_t start = 0;
  for (; start + seg <= total; start += seg) {
    out.push_back({{waveform.samples.begin() + start,
                    waveform.samples.begin() + start + seg},
                   waveform.sample_rate});
  }
  const std::size_t rest = total - start;
  if (rest > 0 && (2 * rest >= seg || out.empty())) {
    Waveform padded{std::vector<float>(seg, 0.0f), waveform.sample_rate};
    std::copy(waveform.samples.begin() + start, waveform.samples.end(),
              padded.samples.begin());
    out.push_back(std::move(padded));
  }
  return out;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> MelCenterFrequencies(const FrontendConfig& config) {
  const double lo = HzToMel(config.fmin);
  const double hi = HzToMel(config.fmax);
  std::vector<double> centers(config.n_mels);
  for (int m = 0; m < config.n_mels; ++m) {
    centers[m] = MelToHz(lo + (hi - lo) * (m + 1) / (config.n_mels + 1));
  }
  return centers;
}

struct MelExtractor::Impl {
  int n_bins = 0;
  std::vector<float> window;               // n_fft, zero-padded Hann
  std::vector<std::vector<std::pair<int, float>>> filters;  // sparse rows
  fftwf_plan plan = nullptr;

  ~Impl() {
    if (plan) {
      std::lock_guard<std::mutex> lock(PlannerMutex());
      fftwf_destroy_plan(plan);
    }
  }
};

MelExtractor::MelExtractor(const FrontendConfig& config)
    : config_(config), impl_(std::make_unique<Impl>()) {
  config_.Validate();
  const int n_fft = config_.n_fft;
  impl_->n_bins = n_fft / 2 + 1;

  impl_->window.assign(n_fft, 0.0f);
  const int offset = (n_fft - config_.win_length) / 2;
  for (int i = 0; i < config_.win_length; ++i) {
    impl_->window[offset + i] = static_cast<float>(
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / config_.win_length));
  }

  const double mel_lo = HzToMel(config_.fmin);
  const double mel_hi = HzToMel(config_.fmax);
  std::vector<double> f_pts(config_.n_mels + 2);
  for (int i = 0; i < config_.n_mels + 2; ++i) {
    f_pts[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * i / (config_.n_mels + 1));
  }
  impl_->filters.resize(config_.n_mels);
  for (int m = 0; m < config_.n_mels; ++m) {
    for (int k = 0; k < impl_->n_bins; ++k) {
      const double f = static_cast<double>(k) * config_.sample_rate / n_fft;
      const double up = (f - f_pts[m]) / (f_pts[m + 1] - f_pts[m]);
      const double down = (f_pts[m + 2] - f) / (f_pts[m + 2] - f_pts[m + 1]);
      const double w = std::max(0.0, std::min(up, down));
      if (w > 0.0) impl_->filters[m].emplace_back(k, static_cast<float>(w));
    }
  }

  std::vector<float> in(n_fft);
  fftwf_complex* out = fftwf_alloc_complex(impl_->n_bins);
  {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    impl_->plan = fftwf_plan_dft_r2c_1d(n_fft, in.data(), out, FFTW_ESTIMATE);
  }
  fftwf_free(out);
}

MelExtractor::~MelExtractor() = default;

Matrix MelExtractor::ComputeLogMel(std::span<const float> segment) const {
  const int n_fft = config_.n_fft;
  const int hop = config_.hop_length;
  const auto len = static_cast<std::ptrdiff_t>(segment.size());
  const int frames = static_cast<int>((len + hop - 1) / hop);
  const int pad = n_fft / 2;

  Matrix mel(config_.n_mels, frames);
  float* in = fftwf_alloc_real(n_fft);
  fftwf_complex* spec = fftwf_alloc_complex(impl_->n_bins);
  std::vector<float> power(impl_->n_bins);
  for (int t = 0; t < frames; ++t) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t) * hop - pad;
    for (int i = 0; i < n_fft; ++i) {
      in[i] = segment[static_cast<std::size_t>(ReflectIndex(start + i, len))] *
              impl_->window[i];
    }
    fftwf_execute_dft_r2c(impl_->plan, in, spec);
    for (int k = 0; k < impl_->n_bins; ++k) {
      power[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
    }
    for (int m = 0; m < config_.n_mels; ++m) {
      double acc = 0.0;
      for (const auto& [k, w] : impl_->filters[m]) acc += w * power[k];
      mel.at(m, t) = static_cast<float>(std::log(std::max(acc, config_.log_floor)));
    }
  }
  fftwf_free(in);
  fftwf_free(spec);
  return mel;
}

MelSpectrogram MelExtractor::Compute(const Waveform& segment) const {
  if (segment.sample_rate != config_.sample_rate ||
      static_cast<int>(segment.samples.size()) != config_.SegmentSamples()) {
    Fail(ErrorKind::kShape,
         "compute_mel: expected " + std::to_string(config_.SegmentSamples()) +
             " samples at " + std::to_string(config_.sample_rate) + " Hz, got " +
             std::to_string(segment.samples.size()) + " at " +
             std::to_string(segment.sample_rate) + " Hz");
  }
  MelSpectrogram out{ComputeLogMel(segment.samples), config_};
  if (config_.standardize) StandardizeInPlace(out.values);
  return out;
}

MelSpectrogram ComputeMel(const Waveform& segment, const FrontendConfig& config) {
  return MelExtractor(config).Compute(segment);
}

void StandardizeInPlace(Matrix& m) {
  if (m.values.empty()) return;
  const double n = static_cast<double>(m.values.size());
  double mean = 0.0;
  for (float v : m.values) mean += v;
  mean /= n;
  double var = 0.0;
  for (float v : m.values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 1e-8)) {
    std::fill(m.values.begin(), m.values.end(), 0.0f);
    return;
  }
  for (float& v : m.values) v = static_cast<float>((v - mean) / sd);
}

std::vector<MelSpectrogram> FileToMels(const std::filesystem::path& path,
                                       const MelExtractor& extractor) {
  const auto& cfg = extractor.config();
  Waveform wave = LoadAudio(path, cfg.sample_rate);
  std::vector<MelSpectrogram> out;
  for (const auto& seg : Segment(wave, cfg)) out.push_back(extractor.Compute(seg));
  return out;
}

}  // namespace fpm_spoof
