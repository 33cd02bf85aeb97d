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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fpm_spoof/frontend.h"
#include "fpm_spoof/manifest.h"

namespace fpm_spoof {

enum class AnomalyKind { kBandTone, kBandSwap, kNoisePatch };
std::string_view AnomalyKindName(AnomalyKind kind);
AnomalyKind ParseAnomalyKind(std::string_view token);

struct SyntheticCorpusConfig {
  int n_speakers = 4;
  int clips_per_speaker = 16;
  double clip_seconds = 4.0;
  std::vector<AnomalyKind> anomaly_kinds = {AnomalyKind::kBandTone, AnomalyKind::kBandSwap,
                                            AnomalyKind::kNoisePatch};
  std::uint64_t seed = 0;
  // Peak amplitude of an injected anomaly relative to the clip peak.
  double anomaly_level = 0.8;
  int workers = 1;

  // Throws Error(kConfig); `frontend` supplies the minimum clip length.
  void Validate(const FrontendConfig& frontend) const;
};

nlohmann::ordered_json ToJson(const SyntheticCorpusConfig& config);
SyntheticCorpusConfig SyntheticCorpusConfigFromJson(const nlohmann::json& j);

// Fixed file names inside a generated corpus directory.
inline constexpr std::string_view kCorpusManifest = "manifest.jsonl";
inline constexpr std::string_view kCorpusRegions = "regions.jsonl";
inline constexpr std::string_view kCorpusPairs = "pairs.jsonl";
inline constexpr std::string_view kCorpusConfig = "corpus_config.json";

// Split of the i-th clip of a speaker. Clips cycle through
// train x4, dev, calib, eval x2.
Split SyntheticSplit(int clip_index);

// Writes real clips (harmonic stacks with per-speaker fundamental and formant
// emphasis, syllabic amplitude modulation and per-clip jitter) and, for every
// eval-split real clip, one fake per anomaly kind. A fake equals its parent
// outside the injected region's sample span. Emits the manifest, the region
// sidecar, a pairs manifest and a config snapshot into `out_dir`; manifest
// paths are relative to `out_dir`. Output is identical for a given config
// regardless of `workers`.
Manifest GenerateSyntheticCorpus(const SyntheticCorpusConfig& config,
                                 const std::filesystem::path& out_dir,
                                 const FrontendConfig& frontend = {});

}  // namespace fpm_spoof
