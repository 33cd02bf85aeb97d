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

#include "fpm_spoof/run_config.h"

#include "fpm_spoof/errors.h"
#include "fpm_spoof/io_util.h"

namespace fpm_spoof {
namespace {

void CheckKnownKeys(const nlohmann::json& value, const nlohmann::json& reference,
                    const std::string& where) {
  if (!value.is_object() || !reference.is_object()) return;
  for (const auto& [key, child] : value.items()) {
    if (!reference.contains(key)) {
      Fail(ErrorKind::kConfig, "unknown config key '" + where + "/" + key + "'");
    }
    CheckKnownKeys(child, reference.at(key), where + "/" + key);
  }
}

}  // namespace

nlohmann::ordered_json ToJson(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["frontend"] = ToJson(c.frontend);
  j["backbone"] = ToJson(c.backbone);
  j["teacher"] = ToJson(c.teacher);
  j["student"] = ToJson(c.student);
  j["corpus"] = ToJson(c.corpus);
  nlohmann::ordered_json d;
  d["fusion"] = FusionModeName(c.detector.fusion);
  d["ds_epsilon"] = c.detector.ds_epsilon;
  d["tau"] = c.detector.tau;
  d["calibration_size"] = c.detector.calibration_size;
  j["detector"] = std::move(d);
  return j;
}

RunConfig RunConfigFromJson(const nlohmann::json& j) {
  if (!j.is_object()) Fail(ErrorKind::kConfig, "config must be a JSON object");
  CheckKnownKeys(j, nlohmann::json(ToJson(RunConfig{})), "");
  RunConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    const nlohmann::json empty = nlohmann::json::object();
    auto section = [&](const char* key) -> const nlohmann::json& {
      return j.contains(key) ? j.at(key) : empty;
    };
    c.frontend = FrontendConfigFromJson(section("frontend"));
    c.backbone = BackboneConfigFromJson(section("backbone"));
    c.teacher = TrainConfigFromJson(section("teacher"));
    c.student = TrainConfigFromJson(section("student"));
    c.corpus = SyntheticCorpusConfigFromJson(section("corpus"));
    const auto& d = section("detector");
    c.detector.fusion = ParseFusionMode(d.value("fusion", std::string("mean")));
    c.detector.ds_epsilon = d.value("ds_epsilon", c.detector.ds_epsilon);
    c.detector.tau = d.value("tau", c.detector.tau);
    c.detector.calibration_size = d.value("calibration_size", c.detector.calibration_size);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, std::string("config: ") + e.what());
  }
  if (c.workers < 1) Fail(ErrorKind::kConfig, "workers must be >= 1");
  if (!(c.detector.ds_epsilon > 0.0)) Fail(ErrorKind::kConfig, "ds_epsilon must be positive");
  if (!(c.detector.tau >= 0.0 && c.detector.tau < 1.0)) {
    Fail(ErrorKind::kConfig, "tau must be in [0, 1)");
  }
  if (c.detector.calibration_size < 0) {
    Fail(ErrorKind::kConfig, "calibration_size must be >= 0");
  }
  c.corpus.seed = c.seed;
  c.teacher.seed = c.seed;
  c.student.seed = c.seed;
  c.corpus.workers = c.workers;
  c.corpus.Validate(c.frontend);
  return c;
}

RunConfig ResolveRunConfig(const std::optional<std::filesystem::path>& file,
                           const std::vector<ConfigOverride>& overrides) {
  nlohmann::json merged = nlohmann::json::object();
  if (file) {
    try {
      merged = nlohmann::json::parse(ReadFile(*file));
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorKind::kParse, file->string() + ": " + e.what());
    }
    if (!merged.is_object()) Fail(ErrorKind::kConfig, file->string() + ": not a JSON object");
  }
  for (const auto& [pointer, value] : overrides) {
    try {
      merged[nlohmann::json::json_pointer(pointer)] = value;
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorKind::kConfig, "override " + pointer + ": " + e.what());
    }
  }
  return RunConfigFromJson(merged);
}

}  // namespace fpm_spoof
