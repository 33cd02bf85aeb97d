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

#include <cstddef>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpm_spoof/manifest.h"

namespace fpm_spoof {

struct ScoredItem {
  std::string path;
  Label label = Label::kReal;
  double score = 0.0;
};

// Fake is the positive class; higher scores mean "more likely fake".
struct ScoredSet {
  std::vector<ScoredItem> items;

  std::size_t CountOf(Label label) const;
};

// ScoredSet file: one {"path","label","score"} JSON object per line. Extra
// keys are ignored on read.
ScoredSet LoadScoredSet(const std::filesystem::path& path);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  // Operating threshold: classify fake when score >= threshold. The origin
  // uses +infinity.
  double threshold = std::numeric_limits<double>::infinity();
};

// Sweeps thresholds over distinct scores (tie groups form one step). Starts at
// (0,0) and ends at (1,1).
std::vector<RocPoint> RocCurve(const ScoredSet& set);

// Mann-Whitney AUC by exact pair counting: P(fake > real) + 0.5 P(tie).
double AucPairCount(const ScoredSet& set);
// Trapezoidal area under the tie-grouped ROC.
double AucTrapezoid(const std::vector<RocPoint>& roc);
// Same as AucPairCount.
double Auc(const ScoredSet& set);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
  // True when the curve lies below the chance diagonal (AUC < 0.5).
  bool reversed_polarity = false;
};

// FPR = FNR crossing along the ROC, linearly interpolated between adjacent
// operating points.
EerResult Eer(const ScoredSet& set);

struct EvalReport {
  double auc = 0.0;
  double eer = 0.0;
  double eer_threshold = 0.0;
  bool reversed_polarity = false;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
  std::vector<RocPoint> roc;
};

EvalReport Evaluate(const ScoredSet& set);
nlohmann::ordered_json ToJson(const EvalReport& report);
// CSV with header "fpr,tpr,threshold".
std::string RocCsv(const std::vector<RocPoint>& roc);

struct Histogram {
  std::vector<double> edges;  // n_bins + 1, shared across classes
  std::vector<std::size_t> real_counts;
  std::vector<std::size_t> fake_counts;
};

Histogram ScoreHistogram(const ScoredSet& set, int n_bins = 30);
// CSV with header "bin_lo,bin_hi,real,fake".
std::string HistogramCsv(const Histogram& h);

}  // namespace fpm_spoof
