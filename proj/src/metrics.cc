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

#include "fpm_spoof/metrics.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fpm_spoof/errors.h"

namespace fpm_spoof {
namespace {

void RequireBothClasses(const ScoredSet& set) {
  if (set.CountOf(Label::kReal) == 0 || set.CountOf(Label::kFake) == 0) {
    Fail(ErrorKind::kEvaluation, "evaluation needs at least one real and one fake item");
  }
  for (const auto& item : set.items) {
    if (!std::isfinite(item.score)) {
      Fail(ErrorKind::kEvaluation, "non-finite score for '" + item.path + "'");
    }
  }
}

}  // namespace

std::size_t ScoredSet::CountOf(Label label) const {
  return static_cast<std::size_t>(std::count_if(
      items.begin(), items.end(), [label](const ScoredItem& i) { return i.label == label; }));
}

ScoredSet LoadScoredSet(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open scores file " + path.string());
  ScoredSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      ScoredItem item;
      item.path = obj.at("path").get<std::string>();
      item.label = ParseLabel(obj.at("label").get<std::string>());
      item.score = obj.at("score").get<double>();
      set.items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorKind::kParse, path.string() + " line " + std::to_string(line_no) +
                                  ": " + e.what());
    }
  }
  return set;
}

std::vector<RocPoint> RocCurve(const ScoredSet& set) {
  RequireBothClasses(set);
  std::vector<const ScoredItem*> sorted;
  for (const auto& item : set.items) sorted.push_back(&item);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ScoredItem* a, const ScoredItem* b) { return a->score > b->score; });
  const double n_pos = static_cast<double>(set.CountOf(Label::kFake));
  const double n_neg = static_cast<double>(set.CountOf(Label::kReal));

  std::vector<RocPoint> roc;
  roc.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double threshold = sorted[i]->score;
    while (i < sorted.size() && sorted[i]->score == threshold) {
      (sorted[i]->label == Label::kFake ? tp : fp) += 1;
      ++i;
    }
    roc.push_back({fp / n_neg, tp / n_pos, threshold});
  }
  return roc;
}

double AucPairCount(const ScoredSet& set) {
  RequireBothClasses(set);
  std::vector<double> real, fake;
  for (const auto& item : set.items) {
    (item.label == Label::kReal ? real : fake).push_back(item.score);
  }
  std::sort(real.begin(), real.end());
  // For each fake score count reals strictly below and equal to it.
  double wins = 0.0;
  for (double f : fake) {
    const auto lo = std::lower_bound(real.begin(), real.end(), f);
    const auto hi = std::upper_bound(real.begin(), real.end(), f);
    wins += static_cast<double>(lo - real.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(real.size()) * static_cast<double>(fake.size()));
}

double AucTrapezoid(const std::vector<RocPoint>& roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) * 0.5;
  }
  return area;
}

double Auc(const ScoredSet& set) { return AucPairCount(set); }

EerResult Eer(const ScoredSet& set) {
  const auto roc = RocCurve(set);
  EerResult out;
  out.reversed_polarity = AucPairCount(set) < 0.5;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    const double d_prev = roc[i - 1].fpr - (1.0 - roc[i - 1].tpr);
    const double d_cur = roc[i].fpr - (1.0 - roc[i].tpr);
    if (d_cur < 0.0) continue;
    const double alpha = d_cur == d_prev ? 0.0 : -d_prev / (d_cur - d_prev);
    out.eer = roc[i - 1].fpr + alpha * (roc[i].fpr - roc[i - 1].fpr);
    if (std::isinf(roc[i - 1].threshold)) {
      out.threshold = roc[i].threshold;
    } else {
      out.threshold = roc[i - 1].threshold +
                      alpha * (roc[i].threshold - roc[i - 1].threshold);
    }
    return out;
  }
  // Unreachable: the last point (1,1) always has FPR - FNR = 1.
  out.eer = 1.0;
  out.threshold = roc.back().threshold;
  return out;
}

EvalReport Evaluate(const ScoredSet& set) {
  EvalReport r;
  r.roc = RocCurve(set);
  r.auc = AucPairCount(set);
  const EerResult e = Eer(set);
  r.eer = e.eer;
  r.eer_threshold = e.threshold;
  r.reversed_polarity = e.reversed_polarity;
  r.n_real = set.CountOf(Label::kReal);
  r.n_fake = set.CountOf(Label::kFake);
  return r;
}

nlohmann::ordered_json ToJson(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["auc"] = r.auc;
  j["eer"] = r.eer;
  j["eer_threshold"] = r.eer_threshold;
  j["reversed_polarity"] = r.reversed_polarity;
  j["n_real"] = r.n_real;
  j["n_fake"] = r.n_fake;
  auto points = nlohmann::ordered_json::array();
  for (const auto& p : r.roc) {
    nlohmann::ordered_json pt;
    pt["fpr"] = p.fpr;
    pt["tpr"] = p.tpr;
    pt["threshold"] = std::isinf(p.threshold) ? nlohmann::ordered_json(nullptr)
                                              : nlohmann::ordered_json(p.threshold);
    points.push_back(std::move(pt));
  }
  j["roc_points"] = std::move(points);
  return j;
}

std::string RocCsv(const std::vector<RocPoint>& roc) {
  std::ostringstream out;
  out.precision(17);
  out << "fpr,tpr,threshold\n";
  for (const auto& p : roc) {
    out << p.fpr << ',' << p.tpr << ',';
    if (std::isinf(p.threshold)) {
      out << "inf";
    } else {
      out << p.threshold;
    }
    out << '\n';
  }
  return out.str();
}

Histogram ScoreHistogram(const ScoredSet& set, int n_bins) {
  if (set.items.empty()) Fail(ErrorKind::kEvaluation, "histogram of an empty set");
  if (n_bins <= 0) Fail(ErrorKind::kConfig, "histogram needs at least one bin");
  double lo = set.items.front().score, hi = lo;
  for (const auto& item : set.items) {
    lo = std::min(lo, item.score);
    hi = std::max(hi, item.score);
  }
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(n_bins + 1);
  for (int b = 0; b <= n_bins; ++b) h.edges[b] = lo + (hi - lo) * b / n_bins;
  h.real_counts.assign(n_bins, 0);
  h.fake_counts.assign(n_bins, 0);
  for (const auto& item : set.items) {
    int b = static_cast<int>((item.score - lo) / (hi - lo) * n_bins);
    b = std::clamp(b, 0, n_bins - 1);
    (item.label == Label::kReal ? h.real_counts : h.fake_counts)[b] += 1;
  }
  return h;
}

std::string HistogramCsv(const Histogram& h) {
  std::ostringstream out;
  out.precision(17);
  out << "bin_lo,bin_hi,real,fake\n";
  for (std::size_t b = 0; b < h.real_counts.size(); ++b) {
    out << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.real_counts[b] << ','
        << h.fake_counts[b] << '\n';
  }
  return out.str();
}

}  // namespace fpm_spoof
