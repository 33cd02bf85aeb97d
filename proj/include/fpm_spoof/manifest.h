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
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fpm_spoof {

enum class Label { kReal, kFake };
enum class Split { kTrain, kDev, kEval, kCalib };

std::string_view LabelName(Label label);
std::string_view SplitName(Split split);
// Both throw Error(kValidation) naming the offending token.
Label ParseLabel(std::string_view token);
Split ParseSplit(std::string_view token);

struct ManifestEntry {
  std::string path;
  Label label = Label::kReal;
  std::string speaker_id;
  Split split = Split::kTrain;
  std::optional<double> duration_s;

  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::string source_name;
  // Directory relative entry paths are resolved against. Not serialized.
  std::filesystem::path base_dir;

  std::filesystem::path Resolve(const ManifestEntry& entry) const;
  Manifest Filter(Split split) const;
  Manifest Filter(Label label) const;
};

// One JSON object per line; blank lines are skipped.
Manifest ParseManifest(std::istream& in, std::string source_name);
Manifest LoadManifest(const std::filesystem::path& path);
void WriteManifest(const Manifest& manifest, std::ostream& out);
void WriteManifest(const Manifest& manifest,
                   const std::filesystem::path& path);

// Checks path uniqueness and duration sign.
void ValidateManifest(const Manifest& manifest);

// Guard for one-class consumers (training, calibration): the manifest must be
// non-empty and contain only real-labeled entries.
void RequireRealOnly(const Manifest& manifest, std::string_view consumer);

// Draws n real entries without replacement. Selected entries keep their
// manifest order and are relabeled split=calib.
Manifest SelectCalibration(const Manifest& manifest, std::size_t n,
                           std::uint64_t seed);

// Time-frequency region injected into a synthetic fake clip. Indices are
// half-open [t0,t1) x [f0,f1) over the clip's frame grid and mel bins.
struct AnomalyRegion {
  std::string path;
  std::string parent;
  std::string kind;
  int t0 = 0;
  int t1 = 0;
  int f0 = 0;
  int f1 = 0;

  bool operator==(const AnomalyRegion&) const = default;
};

std::vector<AnomalyRegion> LoadRegions(const std::filesystem::path& path);
void WriteRegions(const std::vector<AnomalyRegion>& regions,
                  const std::filesystem::path& path);

}  // namespace fpm_spoof
