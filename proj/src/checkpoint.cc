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

#include "fpm_spoof/checkpoint.h"

#include <cstring>

#include "fpm_spoof/errors.h"
#include "fpm_spoof/io_util.h"

namespace fpm_spoof {
namespace {

constexpr const char* kIndexFile = "checkpoint.json";
constexpr const char* kWeightsFile = "weights.bin";

void AppendFloats(std::string& out, const std::vector<float>& v) {
  static_assert(sizeof(float) == 4);
  for (float f : v) {
    std::uint32_t raw;
    std::memcpy(&raw, &f, 4);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((raw >> (8 * i)) & 0xFF));
  }
}

void ReadFloats(const std::string& bytes, std::size_t offset, std::vector<float>& v) {
  for (std::size_t k = 0; k < v.size(); ++k) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + offset + 4 * k);
    const std::uint32_t raw = static_cast<std::uint32_t>(p[0]) |
                              (static_cast<std::uint32_t>(p[1]) << 8) |
                              (static_cast<std::uint32_t>(p[2]) << 16) |
                              (static_cast<std::uint32_t>(p[3]) << 24);
    std::memcpy(&v[k], &raw, 4);
  }
}

}  // namespace

void SaveCheckpoint(const Backbone& model, const nlohmann::ordered_json& metadata,
                    const std::filesystem::path& dir) {
  std::string weights;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  for (const auto& p : model.registry().params) {
    tensors.push_back({{"name", p.name}, {"kind", "param"},
                       {"shape", p.param->shape}, {"offset", offset},
                       {"count", p.param->size()}});
    AppendFloats(weights, p.param->value);
    offset += p.param->size() * 4;
  }
  for (const auto& b : model.registry().buffers) {
    tensors.push_back({{"name", b.name}, {"kind", "buffer"},
                       {"shape", std::vector<std::size_t>{b.values->size()}},
                       {"offset", offset}, {"count", b.values->size()}});
    AppendFloats(weights, *b.values);
    offset += b.values->size() * 4;
  }

  nlohmann::ordered_json index;
  index["format_version"] = kCheckpointFormatVersion;
  index["role"] = RoleName(model.role());
  index["backbone"] = ToJson(model.config());
  index["frontend"] = ToJson(model.frontend());
  index["metadata"] = metadata;
  index["weights_file"] = kWeightsFile;
  index["weights_bytes"] = weights.size();
  index["weights_digest"] = HexDigest(Fnv1a(weights));
  index["tensors"] = std::move(tensors);

  WriteFile(dir / kWeightsFile, weights);
  WriteFile(dir / kIndexFile, index.dump(2) + "\n");
}

LoadedModel LoadCheckpoint(const std::filesystem::path& dir,
                           std::optional<Role> expected_role) {
  const auto index_path = dir / kIndexFile;
  if (!std::filesystem::exists(index_path)) {
    Fail(ErrorKind::kLoad, "no checkpoint at " + dir.string());
  }
  nlohmann::ordered_json index;
  try {
    index = nlohmann::ordered_json::parse(ReadFile(index_path));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kLoad, index_path.string() + ": " + e.what());
  }
  for (const char* key : {"format_version", "role", "backbone", "frontend",
                          "tensors", "weights_digest"}) {
    if (!index.contains(key)) {
      Fail(ErrorKind::kLoad, index_path.string() + ": missing '" + key + "'");
    }
  }
  if (index["format_version"] != kCheckpointFormatVersion) {
    Fail(ErrorKind::kLoad, index_path.string() + ": unsupported format_version " +
                               index["format_version"].dump());
  }
  const Role role = ParseRole(index["role"].get<std::string>());
  if (expected_role && *expected_role != role) {
    Fail(ErrorKind::kRole, "expected a " + std::string(RoleName(*expected_role)) +
                               " checkpoint, found " + std::string(RoleName(role)));
  }

  BackboneConfig bcfg;
  FrontendConfig fcfg;
  try {
    bcfg = BackboneConfigFromJson(index["backbone"]);
    fcfg = FrontendConfigFromJson(index["frontend"]);
  } catch (const Error& e) {
    Fail(ErrorKind::kLoad, index_path.string() + ": " + e.what());
  }

  const std::string weights = ReadFile(dir / kWeightsFile);
  if (HexDigest(Fnv1a(weights)) != index["weights_digest"].get<std::string>()) {
    Fail(ErrorKind::kLoad, dir.string() + ": weights digest mismatch");
  }

  LoadedModel loaded;
  loaded.model = std::make_unique<Backbone>(bcfg, fcfg, role, 0);
  loaded.metadata = index.value("metadata", nlohmann::ordered_json::object());

  auto& reg = loaded.model->registry();
  const auto& tensors = index["tensors"];
  if (tensors.size() != reg.params.size() + reg.buffers.size()) {
    Fail(ErrorKind::kLoad, dir.string() + ": tensor count does not match config");
  }
  std::size_t t = 0;
  auto restore = [&](const std::string& name, std::vector<float>& values) {
    const auto& entry = tensors[t++];
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto count = entry.at("count").get<std::size_t>();
    if (entry.at("name").get<std::string>() != name || count != values.size() ||
        offset + 4 * count > weights.size()) {
      Fail(ErrorKind::kLoad, dir.string() + ": tensor '" + name +
                                 "' does not match the configured model");
    }
    ReadFloats(weights, offset, values);
  };
  for (auto& p : reg.params) restore(p.name, p.param->value);
  for (auto& b : reg.buffers) restore(b.name, *b.values);
  return loaded;
}

}  // namespace fpm_spoof
