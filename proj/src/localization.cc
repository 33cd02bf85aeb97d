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

#include "fpm_spoof/localization.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fpm_spoof/errors.h"
#include "fpm_spoof/frontend.h"
#include "fpm_spoof/io_util.h"
#include "fpm_spoof/metrics.h"

namespace fpm_spoof {
namespace {

Matrix TruncateCols(const Matrix& m, int cols) {
  Matrix out(m.rows, cols);
  for (int r = 0; r < m.rows; ++r) {
    std::copy(m.values.begin() + static_cast<std::ptrdiff_t>(r) * m.cols,
              m.values.begin() + static_cast<std::ptrdiff_t>(r) * m.cols + cols,
              out.values.begin() + static_cast<std::ptrdiff_t>(r) * cols);
  }
  return out;
}

Matrix ConcatCols(const std::vector<Matrix>& parts) {
  if (parts.empty()) return {};
  int cols = 0;
  for (const auto& p : parts) cols += p.cols;
  Matrix out(parts.front().rows, cols);
  int offset = 0;
  for (const auto& p : parts) {
    for (int r = 0; r < p.rows; ++r) {
      for (int c = 0; c < p.cols; ++c) out.at(r, offset + c) = p.at(r, c);
    }
    offset += p.cols;
  }
  return out;
}

}  // namespace

std::string_view PairSourceName(PairSource source) {
  return source == PairSource::kVocoderResynthesis ? "vocoder_resynthesis"
                                                   : "synthetic_injection";
}

PairSource ParsePairSource(std::string_view token) {
  if (token == "vocoder_resynthesis") return PairSource::kVocoderResynthesis;
  if (token == "synthetic_injection") return PairSource::kSyntheticInjection;
  Fail(ErrorKind::kValidation, "unknown pair source '" + std::string(token) + "'");
}

std::vector<PairedClip> LoadPairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open pairs manifest " + path.string());
  std::vector<PairedClip> pairs;
  std::string line;
  std::size_t line_no = 0;
  const auto base = path.parent_path();
  auto resolve = [&base](const std::string& p) {
    std::filesystem::path fp(p);
    return (fp.is_absolute() || base.empty()) ? p : (base / fp).string();
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      PairedClip pair;
      pair.real_path = resolve(obj.at("real_path").get<std::string>());
      pair.fake_path = resolve(obj.at("fake_path").get<std::string>());
      pair.source = ParsePairSource(obj.value("source", "vocoder_resynthesis"));
      pairs.push_back(std::move(pair));
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorKind::kParse, path.string() + " line " + std::to_string(line_no) +
                                  ": " + e.what());
    }
  }
  return pairs;
}

void WritePairs(const std::vector<PairedClip>& pairs, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& p : pairs) {
    nlohmann::ordered_json obj;
    obj["real_path"] = p.real_path;
    obj["fake_path"] = p.fake_path;
    obj["source"] = PairSourceName(p.source);
    out << obj.dump() << '\n';
  }
  WriteFile(path, out.str());
}

Matrix GroundTruthMap(const Matrix& real_log_mel, const Matrix& fake_log_mel) {
  if (real_log_mel.rows != fake_log_mel.rows) {
    Fail(ErrorKind::kShape, "ground truth: mel bin counts differ (" +
                                std::to_string(real_log_mel.rows) + " vs " +
                                std::to_string(fake_log_mel.rows) + ")");
  }
  const int cols = std::min(real_log_mel.cols, fake_log_mel.cols);
  Matrix gt(real_log_mel.rows, cols);
  for (int r = 0; r < gt.rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      gt.at(r, c) = std::abs(real_log_mel.at(r, c) - fake_log_mel.at(r, c));
    }
  }
  if (gt.values.empty()) return gt;
  const auto [lo_it, hi_it] = std::minmax_element(gt.values.begin(), gt.values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) {
    // Constant difference carries no localization: all zeros.
    std::fill(gt.values.begin(), gt.values.end(), 0.0f);
    return gt;
  }
  for (float& v : gt.values) v = static_cast<float>((v - lo) / (hi - lo));
  return gt;
}

Matrix RegionMap(const AnomalyRegion& region, int rows, int cols) {
  Matrix m(rows, cols);
  for (int r = std::max(0, region.f0); r < std::min(rows, region.f1); ++r) {
    for (int c = std::max(0, region.t0); c < std::min(cols, region.t1); ++c) m.at(r, c) = 1.0f;
  }
  return m;
}

LocalizationReport Localize(const Matrix& pred, const Matrix& gt, double tau) {
  if (!pred.SameShape(gt)) {
    Fail(ErrorKind::kShape, "localization: prediction and ground truth differ in shape");
  }
  LocalizationReport report;
  report.n_pixels = pred.size();
  const double n = static_cast<double>(pred.size());

  double mp = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mp += pred.values[i];
    mg += gt.values[i];
  }
  mp /= n;
  mg /= n;
  double cov = 0.0, vp = 0.0, vg = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double a = pred.values[i] - mp, b = gt.values[i] - mg;
    cov += a * b;
    vp += a * a;
    vg += b * b;
  }
  if (vp > 0.0 && vg > 0.0) {
    report.correlation = cov / std::sqrt(vp * vg);
  } else {
    report.correlation_undefined = true;
  }

  ScoredSet pixels;
  double in_sum = 0.0, out_sum = 0.0;
  std::size_t in_n = 0, out_n = 0;
  pixels.items.reserve(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool positive = gt.values[i] > tau;
    pixels.items.push_back({"", positive ? Label::kFake : Label::kReal, pred.values[i]});
    if (positive) {
      in_sum += pred.values[i];
      ++in_n;
    } else {
      out_sum += pred.values[i];
      ++out_n;
    }
  }
  report.n_positive = in_n;
  if (in_n > 0 && out_n > 0) {
    report.pixel_auc = AucPairCount(pixels);
    const double out_mean = out_sum / static_cast<double>(out_n);
    if (out_mean != 0.0) report.energy_ratio = (in_sum / static_cast<double>(in_n)) / out_mean;
  }
  return report;
}

nlohmann::ordered_json ToJson(const LocalizationReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["correlation"] = opt(r.correlation);
  j["correlation_undefined"] = r.correlation_undefined;
  j["pixel_auc"] = opt(r.pixel_auc);
  j["energy_ratio"] = opt(r.energy_ratio);
  j["n_positive"] = r.n_positive;
  j["n_pixels"] = r.n_pixels;
  return j;
}

MapComparison CompareRealFakeMaps(const Matrix& real_map, const Matrix& fake_map) {
  auto max_of = [](const Matrix& m) {
    return m.values.empty() ? 0.0
                            : static_cast<double>(*std::max_element(m.values.begin(),
                                                                    m.values.end()));
  };
  MapComparison c;
  c.real_mean = Mean(real_map);
  c.real_max = max_of(real_map);
  c.fake_mean = Mean(fake_map);
  c.fake_max = max_of(fake_map);
  c.mean_diff = c.fake_mean - c.real_mean;
  c.max_diff = c.fake_max - c.real_max;
  return c;
}

nlohmann::ordered_json ToJson(const MapComparison& c) {
  nlohmann::ordered_json j;
  j["real_mean"] = c.real_mean;
  j["real_max"] = c.real_max;
  j["fake_mean"] = c.fake_mean;
  j["fake_max"] = c.fake_max;
  j["mean_diff"] = c.mean_diff;
  j["max_diff"] = c.max_diff;
  return j;
}

PairResult RunPair(const Detector& detector, const std::filesystem::path& real_path,
                   const std::filesystem::path& fake_path, const CalibrationStats* stats,
                   double tau) {
  const auto& extractor = detector.features().extractor();
  const auto& cfg = extractor.config();
  Waveform real = LoadAudio(real_path, cfg.sample_rate);
  Waveform fake = LoadAudio(fake_path, cfg.sample_rate);
  const std::size_t common = std::min(real.samples.size(), fake.samples.size());
  real.samples.resize(common);
  fake.samples.resize(common);

  std::vector<Matrix> real_log, fake_log;
  std::vector<MelSpectrogram> real_mels, fake_mels;
  for (const auto& seg : Segment(real, cfg)) {
    real_log.push_back(extractor.ComputeLogMel(seg.samples));
    real_mels.push_back(extractor.Compute(seg));
  }
  for (const auto& seg : Segment(fake, cfg)) {
    fake_log.push_back(extractor.ComputeLogMel(seg.samples));
    fake_mels.push_back(extractor.Compute(seg));
  }

  PairResult result;
  result.ground_truth = GroundTruthMap(ConcatCols(real_log), ConcatCols(fake_log));
  result.real_map = ClipMap(detector.ScoreMels(real_path.string(), real_mels, stats));
  result.fake_map = ClipMap(detector.ScoreMels(fake_path.string(), fake_mels, stats));
  const int cols = result.ground_truth.cols;
  result.real_map = TruncateCols(result.real_map, std::min(cols, result.real_map.cols));
  result.fake_map = TruncateCols(result.fake_map, std::min(cols, result.fake_map.cols));
  result.report = Localize(result.fake_map, result.ground_truth, tau);
  result.comparison = CompareRealFakeMaps(result.real_map, result.fake_map);
  return result;
}

}  // namespace fpm_spoof
