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

#include "fpm_spoof/tensor_io.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "fpm_spoof/errors.h"
#include "fpm_spoof/io_util.h"

namespace fpm_spoof {
namespace {

std::size_t ShapeCount(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) Fail(ErrorKind::kShape, "negative dimension in tensor shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

void WriteTensorFile(const std::filesystem::path& path, const TensorFile& tensor) {
  if (ShapeCount(tensor.shape) != tensor.data.size()) {
    Fail(ErrorKind::kShape, "tensor data does not match its shape");
  }
  nlohmann::ordered_json header = tensor.header.is_object()
                                      ? tensor.header
                                      : nlohmann::ordered_json::object();
  header["shape"] = tensor.shape;
  header["dtype"] = "f32";
  std::string out = header.dump();
  out.push_back('\n');
  const std::size_t base = out.size();
  out.resize(base + 4 * tensor.data.size());
  for (std::size_t i = 0; i < tensor.data.size(); ++i) {
    std::uint32_t raw;
    std::memcpy(&raw, &tensor.data[i], 4);
    for (int b = 0; b < 4; ++b) {
      out[base + 4 * i + b] = static_cast<char>((raw >> (8 * b)) & 0xFF);
    }
  }
  WriteFile(path, out);
}

TensorFile ReadTensorFile(const std::filesystem::path& path) {
  const std::string bytes = ReadFile(path);
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos) {
    Fail(ErrorKind::kParse, path.string() + ": missing tensor header line");
  }
  TensorFile t;
  try {
    t.header = nlohmann::ordered_json::parse(bytes.substr(0, newline));
    t.shape = t.header.at("shape").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kParse, path.string() + ": " + e.what());
  }
  if (t.header.value("dtype", "") != "f32") {
    Fail(ErrorKind::kParse, path.string() + ": dtype must be f32");
  }
  const std::size_t count = ShapeCount(t.shape);
  if (bytes.size() - newline - 1 != 4 * count) {
    Fail(ErrorKind::kParse, path.string() + ": payload size does not match shape");
  }
  t.data.resize(count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + newline + 1);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t raw = static_cast<std::uint32_t>(p[4 * i]) |
                              (static_cast<std::uint32_t>(p[4 * i + 1]) << 8) |
                              (static_cast<std::uint32_t>(p[4 * i + 2]) << 16) |
                              (static_cast<std::uint32_t>(p[4 * i + 3]) << 24);
    std::memcpy(&t.data[i], &raw, 4);
  }
  return t;
}

TensorFile MatrixToTensorFile(const Matrix& m, const std::string& kind,
                              const nlohmann::ordered_json& extra) {
  TensorFile t;
  t.header["shape"] = std::vector<int>{m.rows, m.cols};
  t.header["dtype"] = "f32";
  t.header["kind"] = kind;
  if (extra.is_object()) {
    for (auto it = extra.begin(); it != extra.end(); ++it) t.header[it.key()] = it.value();
  }
  t.shape = {m.rows, m.cols};
  t.data = m.values;
  return t;
}

Matrix TensorFileToMatrix(const TensorFile& tensor) {
  if (tensor.shape.size() != 2) {
    Fail(ErrorKind::kShape, "expected a 2-D tensor");
  }
  Matrix m(tensor.shape[0], tensor.shape[1]);
  m.values = tensor.data;
  return m;
}

nlohmann::ordered_json WriteHeatmapPng(const std::filesystem::path& path,
                                       const Matrix& m) {
  if (m.rows <= 0 || m.cols <= 0) Fail(ErrorKind::kShape, "empty heatmap");
  const auto [lo_it, hi_it] = std::minmax_element(m.values.begin(), m.values.end());
  const double lo = *lo_it, hi = *hi_it;
  const double span = hi > lo ? hi - lo : 1.0;

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) Fail(ErrorKind::kIo, "cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    Fail(ErrorKind::kIo, "libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    Fail(ErrorKind::kIo, "libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(m.cols),
               static_cast<png_uint_32>(m.rows), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  std::string lo_text = nlohmann::json(lo).dump();
  std::string hi_text = nlohmann::json(hi).dump();
  png_text text[2];
  std::memset(text, 0, sizeof(text));
  text[0].compression = PNG_TEXT_COMPRESSION_NONE;
  text[0].key = const_cast<char*>("scale_min");
  text[0].text = lo_text.data();
  text[1].compression = PNG_TEXT_COMPRESSION_NONE;
  text[1].key = const_cast<char*>("scale_max");
  text[1].text = hi_text.data();
  png_set_text(png, info, text, 2);
  png_write_info(png, info);

  std::vector<png_byte> row(static_cast<std::size_t>(m.cols));
  for (int r = m.rows - 1; r >= 0; --r) {
    for (int c = 0; c < m.cols; ++c) {
      const double v = (m.at(r, c) - lo) / span;
      row[c] = static_cast<png_byte>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);

  nlohmann::ordered_json scaling;
  scaling["min"] = lo;
  scaling["max"] = hi;
  return scaling;
}

}  // namespace fpm_spoof
