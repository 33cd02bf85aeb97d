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
#include <optional>
#include <vector>

#include "fpm_spoof/frontend.h"

namespace fpm_spoof {

// Environment variable naming an optional mel-feature cache directory.
inline constexpr const char* kCacheEnvVar = "FPM_SPOOF_CACHE";

std::optional<std::filesystem::path> CacheDirFromEnv();

// Loads the mel spectrograms of every segment of an audio file, optionally
// memoized on disk. Cache keys cover the absolute path, file size,
// modification time and the full frontend configuration.
class FeatureSource {
 public:
  explicit FeatureSource(const FrontendConfig& config,
                         std::optional<std::filesystem::path> cache_dir =
                             CacheDirFromEnv());

  std::vector<MelSpectrogram> Load(const std::filesystem::path& audio) const;
  const MelExtractor& extractor() const { return extractor_; }
  const FrontendConfig& config() const { return extractor_.config(); }

 private:
  MelExtractor extractor_;
  std::optional<std::filesystem::path> cache_dir_;
};

}  // namespace fpm_spoof
