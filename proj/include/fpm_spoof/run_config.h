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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fpm_spoof/anomaly.h"
#include "fpm_spoof/backbone.h"
#include "fpm_spoof/frontend.h"
#include "fpm_spoof/synthetic_corpus.h"
#include "fpm_spoof/training.h"

namespace fpm_spoof {

struct DetectorSettings {
  FusionMode fusion = FusionMode::kMean;
  double ds_epsilon = 1e-8;
  // Localization binarization threshold on the ground-truth map.
  double tau = 0.5;
  // 0: use the manifest's calib split; n > 0: draw n real entries.
  int calibration_size = 0;
};

// Fully resolved settings for every subcommand. The top-level seed is copied
// into the corpus, teacher and student sections.
struct RunConfig {
  std::uint64_t seed = 0;
  int workers = 1;
  FrontendConfig frontend;
  BackboneConfig backbone;
  TrainConfig teacher;
  TrainConfig student;
  SyntheticCorpusConfig corpus;
  DetectorSettings detector;
};

nlohmann::ordered_json ToJson(const RunConfig& config);

// Parses a complete or partial config document; absent keys keep their
// defaults and unknown keys are rejected with Error(kConfig).
RunConfig RunConfigFromJson(const nlohmann::json& j);

// A flag override: JSON pointer (e.g. "/teacher/max_epochs") and value.
using ConfigOverride = std::pair<std::string, nlohmann::json>;

// Precedence, lowest first: built-in defaults, config file, overrides.
RunConfig ResolveRunConfig(const std::optional<std::filesystem::path>& file,
                           const std::vector<ConfigOverride>& overrides = {});

}  // namespace fpm_spoof
