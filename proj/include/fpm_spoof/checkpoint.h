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
#include <optional>

#include <json.hpp>

#include "fpm_spoof/backbone.h"

namespace fpm_spoof {

inline constexpr int kCheckpointFormatVersion = 1;

// A checkpoint is a directory holding `checkpoint.json` (role, configs,
// metadata, tensor index, digest) and `weights.bin` (little-endian f32
// parameters followed by BN buffers, in registry order).
struct LoadedModel {
  std::unique_ptr<Backbone> model;
  nlohmann::ordered_json metadata;
};

void SaveCheckpoint(const Backbone& model, const nlohmann::ordered_json& metadata,
                    const std::filesystem::path& dir);

// Throws Error(kLoad) for missing/invalid files, version or digest mismatch,
// and Error(kRole) when `expected_role` is given and differs.
LoadedModel LoadCheckpoint(const std::filesystem::path& dir,
                           std::optional<Role> expected_role = std::nullopt);

}  // namespace fpm_spoof
