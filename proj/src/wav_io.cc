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

#include "fpm_spoof/wav_io.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>

#include "fpm_spoof/errors.h"
#include "fpm_spoof/io_util.h"

namespace fpm_spoof {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t ReadU32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t ReadU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void PutU16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

float DecodeSample(const unsigned char* p, std::uint16_t format, int bits) {
  if (format == kFormatFloat) {
    if (bits == 32) {
      std::uint32_t raw = ReadU32(p);
      float v;
      std::memcpy(&v, &raw, sizeof(v));
      return v;
    }
    std::uint64_t raw = static_cast<std::uint64_t>(ReadU32(p)) |
                        (static_cast<std::uint64_t>(ReadU32(p + 4)) << 32);
    double v;
    std::memcpy(&v, &raw, sizeof(v));
    return static_cast<float>(v);
  }
  switch (bits) {
    case 8:
      return (static_cast<int>(p[0]) - 128) / 128.0f;
    case 16:
      return static_cast<std::int16_t>(ReadU16(p)) / 32768.0f;
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(
          (static_cast<std::uint32_t>(p[0]) << 8) |
          (static_cast<std::uint32_t>(p[1]) << 16) |
          (static_cast<std::uint32_t>(p[2]) << 24));
      return static_cast<float>((v >> 8) / 8388608.0);
    }
    case 32:
      return static_cast<float>(static_cast<std::int32_t>(ReadU32(p)) /
                                2147483648.0);
  }
  return 0.0f;
}

}  // namespace

WavAudio ReadWav(const std::filesystem::path& path) {
  const std::string bytes = ReadFile(path);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  const std::string where = path.string();
  if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 ||
      std::memcmp(data + 8, "WAVE", 4) != 0) {
    Fail(ErrorKind::kDecode, where + ": not a RIFF/WAVE file");
  }

  std::uint16_t format = 0;
  int channels = 0;
  int sample_rate = 0;
  int bits = 0;
  const unsigned char* samples = nullptr;
  std::size_t samples_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const unsigned char* chunk = data + pos;
    const std::uint32_t chunk_size = ReadU32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_size < 16 || body + chunk_size > size) {
        Fail(ErrorKind::kDecode, where + ": truncated fmt chunk");
      }
      format = ReadU16(data + body);
      channels = ReadU16(data + body + 2);
      sample_rate = static_cast<int>(ReadU32(data + body + 4));
      bits = ReadU16(data + body + 14);
      if (format == kFormatExtensible) {
        if (chunk_size < 40) {
          Fail(ErrorKind::kDecode, where + ": truncated extensible fmt chunk");
        }
        format = ReadU16(data + body + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      samples = data + body;
      samples_size = std::min<std::size_t>(chunk_size, size - body);
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }

  if (format == 0) Fail(ErrorKind::kDecode, where + ": missing fmt chunk");
  if (samples == nullptr) Fail(ErrorKind::kDecode, where + ": missing data chunk");
  const bool int_ok = format == kFormatPcm &&
                      (bits == 8 || bits == 16 || bits == 24 || bits == 32);
  const bool float_ok = format == kFormatFloat && (bits == 32 || bits == 64);
  if (!int_ok && !float_ok) {
    Fail(ErrorKind::kDecode, where + ": unsupported encoding (format " +
                                 std::to_string(format) + ", " +
                                 std::to_string(bits) + " bits)");
  }
  if (channels <= 0 || sample_rate <= 0) {
    Fail(ErrorKind::kDecode, where + ": invalid channel count or sample rate");
  }

  const std::size_t bytes_per_sample = static_cast<std::size_t>(bits / 8);
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t frames = samples_size / frame_bytes;

  WavAudio audio;
  audio.sample_rate = sample_rate;
  audio.channels.assign(channels, std::vector<float>(frames));
  for (std::size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      const float v = DecodeSample(samples + i * frame_bytes + c * bytes_per_sample,
                                   format, bits);
      if (!std::isfinite(v)) {
        Fail(ErrorKind::kDecode, where + ": non-finite sample");
      }
      audio.channels[c][i] = v;
    }
  }
  return audio;
}

void WriteWav(const std::filesystem::path& path,
              const std::vector<std::vector<float>>& channels,
              int sample_rate, WavEncoding encoding) {
  if (channels.empty()) Fail(ErrorKind::kValidation, "WriteWav: no channels");
  const std::size_t frames = channels.front().size();
  for (const auto& ch : channels) {
    if (ch.size() != frames) {
      Fail(ErrorKind::kValidation, "WriteWav: ragged channels");
    }
  }
  int bits = 32;
  std::uint16_t format = kFormatPcm;
  switch (encoding) {
    case WavEncoding::kPcm16: bits = 16; break;
    case WavEncoding::kPcm24: bits = 24; break;
    case WavEncoding::kPcm32: bits = 32; break;
    case WavEncoding::kFloat32: bits = 32; format = kFormatFloat; break;
  }
  const auto n_channels = static_cast<std::uint16_t>(channels.size());
  const std::uint32_t block_align = n_channels * (bits / 8);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(frames * block_align);

  std::string out;
  out.reserve(44 + data_bytes);
  out.append("RIFF");
  PutU32(out, 36 + data_bytes);
  out.append("WAVE");
  out.append("fmt ");
  PutU32(out, 16);
  PutU16(out, format);
  PutU16(out, n_channels);
  PutU32(out, static_cast<std::uint32_t>(sample_rate));
  PutU32(out, static_cast<std::uint32_t>(sample_rate) * block_align);
  PutU16(out, static_cast<std::uint16_t>(block_align));
  PutU16(out, static_cast<std::uint16_t>(bits));
  out.append("data");
  PutU32(out, data_bytes);

  for (std::size_t i = 0; i < frames; ++i) {
    for (const auto& ch : channels) {
      const float v = ch[i];
      if (encoding == WavEncoding::kFloat32) {
        std::uint32_t raw;
        std::memcpy(&raw, &v, sizeof(raw));
        PutU32(out, raw);
        continue;
      }
      const double clipped = std::clamp(static_cast<double>(v), -1.0, 1.0);
      if (bits == 16) {
        const auto q = static_cast<std::int32_t>(
            std::clamp(std::lround(clipped * 32768.0), -32768L, 32767L));
        PutU16(out, static_cast<std::uint16_t>(q));
      } else if (bits == 24) {
        const auto q = static_cast<std::int32_t>(
            std::clamp(std::lround(clipped * 8388608.0), -8388608L, 8388607L));
        const auto u = static_cast<std::uint32_t>(q);
        out.push_back(static_cast<char>(u & 0xFF));
        out.push_back(static_cast<char>((u >> 8) & 0xFF));
        out.push_back(static_cast<char>((u >> 16) & 0xFF));
      } else {
        const auto q = static_cast<std::int64_t>(std::clamp<double>(
            std::llround(clipped * 2147483648.0), -2147483648.0, 2147483647.0));
        PutU32(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(q)));
      }
    }
  }
  WriteFile(path, out);
}

}  // namespace fpm_spoof
