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

#include "fpm_spoof/manifest.h"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "fpm_spoof/errors.h"
#include "fpm_spoof/io_util.h"

namespace fpm_spoof {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string RequireString(const nlohmann::json& obj, const char* key,
                          std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    Fail(ErrorKind::kParse, "line " + std::to_string(line_no) +
                                ": missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

int RequireInt(const nlohmann::json& obj, const char* key,
               std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer()) {
    Fail(ErrorKind::kParse, "line " + std::to_string(line_no) +
                                ": missing integer field '" + key + "'");
  }
  return it->get<int>();
}

}  // namespace

std::string_view LabelName(Label label) {
  return label == Label::kReal ? "real" : "fake";
}

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kEval: return "eval";
    case Split::kCalib: return "calib";
  }
  return "train";
}

Label ParseLabel(std::string_view token) {
  if (token == "real") return Label::kReal;
  if (token == "fake") return Label::kFake;
  Fail(ErrorKind::kValidation, "unknown label '" + std::string(token) + "'");
}

Split ParseSplit(std::string_view token) {
  if (token == "train") return Split::kTrain;
  if (token == "dev") return Split::kDev;
  if (token == "eval") return Split::kEval;
  if (token == "calib") return Split::kCalib;
  Fail(ErrorKind::kValidation, "unknown split '" + std::string(token) + "'");
}

std::filesystem::path Manifest::Resolve(const ManifestEntry& entry) const {
  std::filesystem::path p(entry.path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

Manifest Manifest::Filter(Split split) const {
  Manifest out{{}, source_name, base_dir};
  for (const auto& e : entries) {
    if (e.split == split) out.entries.push_back(e);
  }
  return out;
}

Manifest Manifest::Filter(Label label) const {
  Manifest out{{}, source_name, base_dir};
  for (const auto& e : entries) {
    if (e.label == label) out.entries.push_back(e);
  }
  return out;
}

Manifest ParseManifest(std::istream& in, std::string source_name) {
  Manifest manifest;
  manifest.source_name = std::move(source_name);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      Fail(ErrorKind::kParse,
           "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object()) {
      Fail(ErrorKind::kParse,
           "line " + std::to_string(line_no) + ": expected a JSON object");
    }
    ManifestEntry entry;
    entry.path = RequireString(obj, "path", line_no);
    try {
      entry.label = ParseLabel(RequireString(obj, "label", line_no));
      entry.split = ParseSplit(RequireString(obj, "split", line_no));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kValidation) throw;
      Fail(ErrorKind::kValidation,
           "line " + std::to_string(line_no) + ": " + e.what());
    }
    entry.speaker_id = RequireString(obj, "speaker_id", line_no);
    if (auto it = obj.find("duration_s"); it != obj.end() && !it->is_null()) {
      if (!it->is_number()) {
        Fail(ErrorKind::kParse, "line " + std::to_string(line_no) +
                                    ": duration_s must be a number");
      }
      entry.duration_s = it->get<double>();
    }
    manifest.entries.push_back(std::move(entry));
  }
  ValidateManifest(manifest);
  return manifest;
}

Manifest LoadManifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open manifest " + path.string());
  Manifest manifest = ParseManifest(in, path.filename().string());
  manifest.base_dir = path.parent_path();
  return manifest;
}

void WriteManifest(const Manifest& manifest, std::ostream& out) {
  for (const auto& e : manifest.entries) {
    ordered_json obj;
    obj["path"] = e.path;
    obj["label"] = LabelName(e.label);
    obj["speaker_id"] = e.speaker_id;
    obj["split"] = SplitName(e.split);
    if (e.duration_s) obj["duration_s"] = *e.duration_s;
    out << obj.dump() << '\n';
  }
}

void WriteManifest(const Manifest& manifest,
                   const std::filesystem::path& path) {
  std::ostringstream out;
  WriteManifest(manifest, out);
  WriteFile(path, out.str());
}

void ValidateManifest(const Manifest& manifest) {
  std::unordered_set<std::string> seen;
  for (const auto& e : manifest.entries) {
    if (!seen.insert(e.path).second) {
      Fail(ErrorKind::kValidation, "duplicate path '" + e.path + "'");
    }
    if (e.duration_s && !(*e.duration_s >= 0.0)) {
      Fail(ErrorKind::kValidation, "negative duration for '" + e.path + "'");
    }
  }
}

void RequireRealOnly(const Manifest& manifest, std::string_view consumer) {
  if (manifest.entries.empty()) {
    Fail(ErrorKind::kInsufficientData,
         std::string(consumer) + ": manifest is empty");
  }
  for (const auto& e : manifest.entries) {
    if (e.label != Label::kReal) {
      Fail(ErrorKind::kOneClassViolation,
           std::string(consumer) + ": fake-labeled entry '" + e.path + "'");
    }
  }
}

Manifest SelectCalibration(const Manifest& manifest, std::size_t n,
                           std::uint64_t seed) {
  std::vector<std::size_t> real;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (manifest.entries[i].label == Label::kReal) real.push_back(i);
  }
  if (real.size() < n) {
    Fail(ErrorKind::kInsufficientData,
         "calibration needs " + std::to_string(n) + " real entries, found " +
             std::to_string(real.size()));
  }
  // Partial Fisher-Yates with an explicit draw so the result does not depend
  // on the standard library's distribution implementations.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng() % (real.size() - i));
    std::swap(real[i], real[j]);
  }
  real.resize(n);
  std::sort(real.begin(), real.end());

  Manifest out;
  out.source_name = manifest.source_name + ":calib";
  out.base_dir = manifest.base_dir;
  for (std::size_t idx : real) {
    ManifestEntry e = manifest.entries[idx];
    e.split = Split::kCalib;
    out.entries.push_back(std::move(e));
  }
  return out;
}

std::vector<AnomalyRegion> LoadRegions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open region file " + path.string());
  std::vector<AnomalyRegion> regions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      Fail(ErrorKind::kParse,
           "line " + std::to_string(line_no) + ": " + e.what());
    }
    AnomalyRegion r;
    r.path = RequireString(obj, "path", line_no);
    r.parent = RequireString(obj, "parent", line_no);
    r.kind = RequireString(obj, "kind", line_no);
    r.t0 = RequireInt(obj, "t0", line_no);
    r.t1 = RequireInt(obj, "t1", line_no);
    r.f0 = RequireInt(obj, "f0", line_no);
    r.f1 = RequireInt(obj, "f1", line_no);
    if (r.t1 <= r.t0 || r.f1 <= r.f0 || r.t0 < 0 || r.f0 < 0) {
      Fail(ErrorKind::kValidation,
           "line " + std::to_string(line_no) + ": empty or negative region");
    }
    regions.push_back(std::move(r));
  }
  return regions;
}

void WriteRegions(const std::vector<AnomalyRegion>& regions,
                  const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& r : regions) {
    ordered_json obj;
    obj["path"] = r.path;
    obj["parent"] = r.parent;
    obj["kind"] = r.kind;
    obj["t0"] = r.t0;
    obj["t1"] = r.t1;
    obj["f0"] = r.f0;
    obj["f1"] = r.f1;
    out << obj.dump() << '\n';
  }
  WriteFile(path, out.str());
}

}  // namespace fpm_spoof
