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

#include "fpm_spoof/feature_cache.h"

#include <cstdlib>

#include "fpm_spoof/errors.h"
#include "fpm_spoof/io_util.h"
#include "fpm_spoof/tensor_io.h"

namespace fpm_spoof {

std::optional<std::filesystem::path> CacheDirFromEnv() {
  const char* dir = std::getenv(kCacheEnvVar);
  if (dir == nullptr || *dir == '\0') return std::nullopt;
  return std::filesystem::path(dir);
}

FeatureSource::FeatureSource(const FrontendConfig& config,
                             std::optional<std::filesystem::path> cache_dir)
    : extractor_(config), cache_dir_(std::move(cache_dir)) {}

std::vector<MelSpectrogram> FeatureSource::Load(
    const std::filesystem::path& audio) const {
  if (!cache_dir_) return FileToMels(audio, extractor_);

  std::error_code ec;
  const auto abs = std::filesystem::absolute(audio, ec);
  const auto size = std::filesystem::file_size(audio, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot stat " + audio.string());
  const auto mtime = std::filesystem::last_write_time(audio, ec)
                         .time_since_epoch()
                         .count();
  const std::string key_src = abs.string() + "|" + std::to_string(size) + "|" +
                              std::to_string(mtime) + "|" +
                              ToJson(config()).dump();
  const auto cache_file = *cache_dir_ / (HexDigest(Fnv1a(key_src)) + ".mels");

  const int rows = config().n_mels;
  const int cols = config().FramesPerSegment();
  if (std::filesystem::exists(cache_file)) {
    TensorFile t = ReadTensorFile(cache_file);
    if (t.shape.size() == 3 && t.shape[1] == rows && t.shape[2] == cols) {
      std::vector<MelSpectrogram> out;
      const std::size_t per = static_cast<std::size_t>(rows) * cols;
      for (int s = 0; s < t.shape[0]; ++s) {
        MelSpectrogram mel{Matrix(rows, cols), config()};
        std::copy(t.data.begin() + s * per, t.data.begin() + (s + 1) * per,
                  mel.values.values.begin());
        out.push_back(std::move(mel));
      }
      return out;
    }
  }

  std::vector<MelSpectrogram> mels = FileToMels(audio, extractor_);
  TensorFile t;
  t.header["kind"] = "mel_segments";
  t.header["source"] = abs.string();
  t.shape = {static_cast<int>(mels.size()), rows, cols};
  for (const auto& m : mels) {
    t.data.insert(t.data.end(), m.values.values.begin(), m.values.values.end());
  }
  // Write to a temporary name first so concurrent readers never see a
  // partial file.
  const auto tmp = cache_file.string() + ".tmp" +
                   std::to_string(reinterpret_cast<std::uintptr_t>(&t));
  WriteTensorFile(tmp, t);
  std::filesystem::rename(tmp, cache_file, ec);
  return mels;
}

}  // namespace fpm_spoof
