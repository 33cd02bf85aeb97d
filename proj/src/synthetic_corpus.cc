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

#include "fpm_spoof/synthetic_corpus.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "fpm_spoof/errors.h"
#include "fpm_spoof/io_util.h"
#include "fpm_spoof/localization.h"
#include "fpm_spoof/parallel.h"
#include "fpm_spoof/wav_io.h"

namespace fpm_spoof {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kPeak = 0.5;
constexpr double kNoiseSigma = 1e-3;
constexpr double kRampSeconds = 0.02;

// Portable draws; the standard distributions are implementation-defined.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      a, b, c};
    engine_.seed(seq);
  }
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  int Int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double Gaussian() {
    const double u1 = 1.0 - Uniform();
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

struct Voice {
  double f0 = 120.0;
  std::array<double, 3> formant_hz{};
  std::array<double, 3> formant_bw{};
  std::array<double, 3> formant_gain{};
  double am_rate = 4.0;
};

struct ClipParams {
  Voice voice;
  double vibrato_rate = 5.0;
  double vibrato_depth = 0.01;
  double am_phase = 0.0;
  std::vector<double> phases;
};

Voice SpeakerVoice(std::uint64_t seed, int speaker, int n_speakers) {
  Rng rng(seed, 0, static_cast<std::uint32_t>(speaker), 0);
  Voice v;
  v.f0 = 95.0 + 160.0 * (speaker + rng.Uniform(0.25, 0.75)) / n_speakers;
  v.formant_hz = {rng.Uniform(350, 900), rng.Uniform(1000, 2300), rng.Uniform(2400, 3600)};
  v.formant_bw = {rng.Uniform(100, 250), rng.Uniform(100, 250), rng.Uniform(100, 250)};
  v.formant_gain = {1.0, rng.Uniform(0.5, 0.9), rng.Uniform(0.3, 0.6)};
  v.am_rate = rng.Uniform(3.0, 5.5);
  return v;
}

double HarmonicAmplitude(const Voice& v, int k) {
  const double f = k * v.f0;
  double emphasis = 0.05;
  for (int j = 0; j < 3; ++j) {
    const double z = (f - v.formant_hz[j]) / v.formant_bw[j];
    emphasis += v.formant_gain[j] * std::exp(-0.5 * z * z);
  }
  return emphasis / std::sqrt(static_cast<double>(k));
}

int HarmonicCount(const Voice& v, int sample_rate) {
  return static_cast<int>(std::floor(0.95 * sample_rate / 2.0 / v.f0));
}

ClipParams MakeClip(const Voice& base, std::uint64_t seed, int speaker, int clip,
                    int sample_rate) {
  Rng rng(seed, 1, static_cast<std::uint32_t>(speaker), static_cast<std::uint32_t>(clip));
  ClipParams p;
  p.voice = base;
  p.voice.f0 *= 1.0 + rng.Uniform(-0.03, 0.03);
  for (double& f : p.voice.formant_hz) f *= 1.0 + rng.Uniform(-0.03, 0.03);
  p.voice.am_rate *= 1.0 + rng.Uniform(-0.1, 0.1);
  p.vibrato_rate = rng.Uniform(4.0, 6.0);
  p.vibrato_depth = rng.Uniform(0.005, 0.015);
  p.am_phase = rng.Uniform(0.0, kTwoPi);
  p.phases.resize(HarmonicCount(p.voice, sample_rate) + 1);
  for (double& ph : p.phases) ph = rng.Uniform(0.0, kTwoPi);
  return p;
}

double Envelope(const ClipParams& p, double t) {
  const double s = 0.5 * (1.0 + std::sin(kTwoPi * p.voice.am_rate * t + p.am_phase));
  return 0.2 + 0.8 * s * s;
}

// Sum of harmonics over samples [begin, end) without the envelope. Harmonics
// are filtered by `keep` on their nominal frequency; with `mirror`, each kept
// harmonic is reflected inside [lo, hi].
template <typename Keep>
std::vector<double> Harmonics(const ClipParams& p, int sample_rate, std::size_t begin,
                              std::size_t end, Keep keep, bool mirror = false,
                              double lo = 0.0, double hi = 0.0) {
  const int n_harm = HarmonicCount(p.voice, sample_rate);
  std::vector<int> ks;
  std::vector<double> amps;
  for (int k = 1; k <= n_harm; ++k) {
    if (keep(k * p.voice.f0)) {
      ks.push_back(k);
      amps.push_back(HarmonicAmplitude(p.voice, k));
    }
  }
  std::vector<double> out(end - begin, 0.0);
  if (ks.empty()) return out;
  // Phase of the fundamental integrates the vibrato exactly.
  const double w = kTwoPi * p.vibrato_rate;
  auto fundamental_phase = [&](double t) {
    return kTwoPi * p.voice.f0 * (t - p.vibrato_depth * (std::cos(w * t) - 1.0) / w);
  };
  for (std::size_t i = begin; i < end; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double phi = fundamental_phase(t);
    double acc = 0.0;
    for (std::size_t h = 0; h < ks.size(); ++h) {
      const int k = ks[h];
      const double a = amps[h];
      if (!mirror) {
        acc += a * std::sin(k * phi + p.phases[k]);
      } else {
        // Reflected frequency (lo + hi) - k f0(t), integrated analytically.
        const double ph = kTwoPi * (lo + hi) * t - k * phi;
        acc += a * std::sin(ph + p.phases[k]);
      }
    }
    out[i - begin] = acc;
  }
  return out;
}

double Taper(std::size_t i, std::size_t begin, std::size_t end, std::size_t ramp) {
  const std::size_t from_start = i - begin;
  const std::size_t from_end = end - 1 - i;
  const std::size_t d = std::min(from_start, from_end);
  if (d >= ramp) return 1.0;
  return 0.5 * (1.0 - std::cos(std::numbers::pi * (d + 0.5) / ramp));
}

struct ClipOutput {
  ManifestEntry real;
  std::vector<ManifestEntry> fakes;
  std::vector<AnomalyRegion> regions;
};

std::string ClipName(int speaker, int clip) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "spk%02d_c%03d", speaker, clip);
  return buf;
}

std::string SpeakerId(int speaker) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%02d", speaker);
  return buf;
}

ClipOutput MakeClipFiles(const SyntheticCorpusConfig& cfg, const FrontendConfig& fe,
                         const std::vector<double>& centers,
                         const std::filesystem::path& out_dir, int speaker, int clip) {
  const int sr = fe.sample_rate;
  const std::size_t n =
      static_cast<std::size_t>(std::llround(cfg.clip_seconds * sr));
  const Voice voice = SpeakerVoice(cfg.seed, speaker, cfg.n_speakers);
  const ClipParams p = MakeClip(voice, cfg.seed, speaker, clip, sr);

  const auto harm = Harmonics(p, sr, 0, n, [](double) { return true; });
  std::vector<double> env(n);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    env[i] = Envelope(p, static_cast<double>(i) / sr);
    peak = std::max(peak, std::abs(env[i] * harm[i]));
  }
  const double scale = peak > 0.0 ? kPeak / peak : 0.0;
  Rng noise(cfg.seed, 2, static_cast<std::uint32_t>(speaker), static_cast<std::uint32_t>(clip));
  std::vector<float> real(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = scale * env[i] * harm[i] + kNoiseSigma * noise.Gaussian();
    real[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }

  ClipOutput out;
  const std::string name = ClipName(speaker, clip);
  out.real.path = "real/" + name + ".wav";
  out.real.label = Label::kReal;
  out.real.speaker_id = SpeakerId(speaker);
  out.real.split = SyntheticSplit(clip);
  out.real.duration_s = static_cast<double>(n) / sr;
  WriteWavMono(out_dir / out.real.path, real, sr);
  if (out.real.split != Split::kEval) return out;

  const int frames = static_cast<int>((n + fe.hop_length - 1) / fe.hop_length);
  const double nyquist_guard = 0.95 * sr / 2.0;
  for (std::size_t kk = 0; kk < cfg.anomaly_kinds.size(); ++kk) {
    const AnomalyKind kind = cfg.anomaly_kinds[kk];
    Rng rng(cfg.seed, 3, static_cast<std::uint32_t>(speaker * 1000 + clip),
            static_cast<std::uint32_t>(kk));
    AnomalyRegion region;
    const int len_t = std::clamp(static_cast<int>(std::lround(rng.Uniform(0.3, 0.45) * frames)),
                                 1, frames - 2);
    region.t0 = rng.Int(1, frames - len_t - 1);
    region.t1 = region.t0 + len_t;
    const int width = std::min(rng.Int(16, 28), fe.n_mels - 6);
    region.f0 = rng.Int(4, fe.n_mels - width - 2);
    region.f1 = region.f0 + width;
    const double lo = centers[region.f0];
    const double hi = std::min(centers[region.f1 - 1], nyquist_guard);

    const std::size_t a = static_cast<std::size_t>(region.t0) * fe.hop_length;
    const std::size_t b = std::min(n, static_cast<std::size_t>(region.t1) * fe.hop_length);
    const std::size_t ramp = std::min<std::size_t>(
        static_cast<std::size_t>(kRampSeconds * sr), (b - a) / 2);
    const double amp = cfg.anomaly_level * kPeak;

    std::vector<double> delta(b - a, 0.0);
    switch (kind) {
      case AnomalyKind::kBandTone: {
        // Triangular sweep across the band.
        const double period = 0.3;
        double theta = rng.Uniform(0.0, kTwoPi);
        for (std::size_t i = a; i < b; ++i) {
          const double t = static_cast<double>(i - a) / sr;
          const double x = std::fmod(t / period, 1.0);
          const double tri = x < 0.5 ? 2.0 * x : 2.0 - 2.0 * x;
          theta += kTwoPi * (lo + (hi - lo) * tri) / sr;
          delta[i - a] = amp * std::sin(theta);
        }
        break;
      }
      case AnomalyKind::kNoisePatch: {
        const double spacing = 15.0;
        const int count = std::max(1, static_cast<int>((hi - lo) / spacing));
        const double a_comp = amp / std::sqrt(static_cast<double>(count));
        for (int j = 0; j < count; ++j) {
          const double f = lo + (j + rng.Uniform()) * spacing;
          const double ph = rng.Uniform(0.0, kTwoPi);
          for (std::size_t i = a; i < b; ++i) {
            delta[i - a] += a_comp * std::sin(kTwoPi * f * i / sr + ph);
          }
        }
        break;
      }
      case AnomalyKind::kBandSwap: {
        auto in_band = [lo, hi](double f) { return f >= lo && f <= hi; };
        const auto orig = Harmonics(p, sr, a, b, in_band);
        const auto swapped = Harmonics(p, sr, a, b, in_band, true, lo, hi);
        for (std::size_t i = a; i < b; ++i) {
          delta[i - a] = scale * env[i] * (swapped[i - a] - orig[i - a]);
        }
        break;
      }
    }

    std::vector<float> fake = real;
    for (std::size_t i = a; i < b; ++i) {
      const double v = real[i] + Taper(i, a, b, ramp) * delta[i - a];
      fake[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
    }
    ManifestEntry entry;
    entry.path = "fake/" + name + "_" + std::string(AnomalyKindName(kind)) + ".wav";
    entry.label = Label::kFake;
    entry.speaker_id = out.real.speaker_id;
    entry.split = Split::kEval;
    entry.duration_s = out.real.duration_s;
    WriteWavMono(out_dir / entry.path, fake, sr);
    region.path = entry.path;
    region.parent = out.real.path;
    region.kind = AnomalyKindName(kind);
    out.fakes.push_back(std::move(entry));
    out.regions.push_back(std::move(region));
  }
  return out;
}

}  // namespace

std::string_view AnomalyKindName(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::kBandTone: return "band_tone";
    case AnomalyKind::kBandSwap: return "band_swap";
    case AnomalyKind::kNoisePatch: return "noise_patch";
  }
  return "unknown";
}

AnomalyKind ParseAnomalyKind(std::string_view token) {
  if (token == "band_tone") return AnomalyKind::kBandTone;
  if (token == "band_swap") return AnomalyKind::kBandSwap;
  if (token == "noise_patch") return AnomalyKind::kNoisePatch;
  Fail(ErrorKind::kConfig, "unknown anomaly kind '" + std::string(token) + "'");
}

void SyntheticCorpusConfig::Validate(const FrontendConfig& frontend) const {
  if (n_speakers < 2) Fail(ErrorKind::kConfig, "n_speakers must be >= 2");
  if (n_speakers > 100) Fail(ErrorKind::kConfig, "n_speakers must be <= 100");
  if (clips_per_speaker < 1) Fail(ErrorKind::kConfig, "clips_per_speaker must be >= 1");
  if (!(clip_seconds >= frontend.segment_seconds)) {
    Fail(ErrorKind::kConfig, "clip_seconds must be at least the segment length");
  }
  if (!(anomaly_level > 0.0 && anomaly_level <= 1.0)) {
    Fail(ErrorKind::kConfig, "anomaly_level must be in (0, 1]");
  }
  if (frontend.n_mels < 40) Fail(ErrorKind::kConfig, "synthetic corpus needs n_mels >= 40");
}

nlohmann::ordered_json ToJson(const SyntheticCorpusConfig& c) {
  nlohmann::ordered_json j;
  j["n_speakers"] = c.n_speakers;
  j["clips_per_speaker"] = c.clips_per_speaker;
  j["clip_seconds"] = c.clip_seconds;
  auto kinds = nlohmann::ordered_json::array();
  for (auto k : c.anomaly_kinds) kinds.push_back(AnomalyKindName(k));
  j["anomaly_kinds"] = std::move(kinds);
  j["seed"] = c.seed;
  j["anomaly_level"] = c.anomaly_level;
  return j;
}

SyntheticCorpusConfig SyntheticCorpusConfigFromJson(const nlohmann::json& j) {
  SyntheticCorpusConfig c;
  try {
    c.n_speakers = j.value("n_speakers", c.n_speakers);
    c.clips_per_speaker = j.value("clips_per_speaker", c.clips_per_speaker);
    c.clip_seconds = j.value("clip_seconds", c.clip_seconds);
    if (j.contains("anomaly_kinds")) {
      c.anomaly_kinds.clear();
      for (const auto& k : j.at("anomaly_kinds")) {
        c.anomaly_kinds.push_back(ParseAnomalyKind(k.get<std::string>()));
      }
    }
    c.seed = j.value("seed", c.seed);
    c.anomaly_level = j.value("anomaly_level", c.anomaly_level);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, std::string("corpus config: ") + e.what());
  }
  return c;
}

Split SyntheticSplit(int clip_index) {
  static constexpr Split kCycle[8] = {Split::kTrain, Split::kTrain, Split::kTrain,
                                      Split::kTrain, Split::kDev,   Split::kCalib,
                                      Split::kEval,  Split::kEval};
  return kCycle[clip_index % 8];
}

Manifest GenerateSyntheticCorpus(const SyntheticCorpusConfig& config,
                                 const std::filesystem::path& out_dir,
                                 const FrontendConfig& frontend) {
  config.Validate(frontend);
  frontend.Validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "real", ec);
  std::filesystem::create_directories(out_dir / "fake", ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create " + out_dir.string() + ": " + ec.message());

  const auto centers = MelCenterFrequencies(frontend);
  const std::size_t n_clips =
      static_cast<std::size_t>(config.n_speakers) * config.clips_per_speaker;
  std::vector<ClipOutput> clips(n_clips);
  ParallelFor(n_clips, config.workers, [&](std::size_t i) {
    const int speaker = static_cast<int>(i / config.clips_per_speaker);
    const int clip = static_cast<int>(i % config.clips_per_speaker);
    clips[i] = MakeClipFiles(config, frontend, centers, out_dir, speaker, clip);
  });

  Manifest manifest;
  manifest.source_name = "synthetic";
  manifest.base_dir = out_dir;
  std::vector<AnomalyRegion> regions;
  std::vector<PairedClip> pairs;
  for (const auto& c : clips) manifest.entries.push_back(c.real);
  for (const auto& c : clips) {
    for (std::size_t k = 0; k < c.fakes.size(); ++k) {
      manifest.entries.push_back(c.fakes[k]);
      regions.push_back(c.regions[k]);
      pairs.push_back({c.real.path, c.fakes[k].path, PairSource::kSyntheticInjection});
    }
  }
  WriteManifest(manifest, out_dir / kCorpusManifest);
  WriteRegions(regions, out_dir / kCorpusRegions);
  WritePairs(pairs, out_dir / kCorpusPairs);
  nlohmann::ordered_json snapshot;
  snapshot["corpus"] = ToJson(config);
  snapshot["frontend"] = ToJson(frontend);
  WriteFile(out_dir / kCorpusConfig, snapshot.dump(2) + "\n");
  return manifest;
}

}  // namespace fpm_spoof
