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

#include "fpm_spoof/cli.h"

#include <CLI11.hpp>

#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "fpm_spoof/anomaly.h"
#include "fpm_spoof/checkpoint.h"
#include "fpm_spoof/errors.h"
#include "fpm_spoof/io_util.h"
#include "fpm_spoof/localization.h"
#include "fpm_spoof/manifest.h"
#include "fpm_spoof/metrics.h"
#include "fpm_spoof/parallel.h"
#include "fpm_spoof/plot.h"
#include "fpm_spoof/run_config.h"
#include "fpm_spoof/synthetic_corpus.h"
#include "fpm_spoof/tensor_io.h"
#include "fpm_spoof/training.h"

namespace fpm_spoof {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

inline constexpr const char* kSnapshotFile = "config.json";
inline constexpr const char* kCalibrationFile = "calibration.json";
inline constexpr const char* kScoresFile = "scores.jsonl";
inline constexpr const char* kReportFile = "eval_report.json";

struct Common {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
  bool overwrite = false;
};

// Options of every subcommand; unused members stay empty.
struct Options {
  Common common;
  std::string manifest, teacher, student, calibration, scores, report, pairs, regions;
  std::string split = "eval";
  std::vector<std::string> maps;
  std::optional<int> speakers, clips_per_speaker, epochs, patience, batch_size, bins;
  std::optional<int> calibration_size;
  std::optional<double> clip_seconds, level, lr, epsilon, tau;
  std::optional<std::vector<std::string>> kinds;
  std::optional<std::string> init, fusion;
  bool save_maps = false;
};

void RequireExists(const std::string& path, const std::string& what) {
  if (path.empty() || !fs::exists(path)) {
    Fail(ErrorKind::kUsage, what + " not found: '" + path + "'");
  }
}

void PrepareOutDir(const Common& c) {
  const fs::path out(c.out);
  if (fs::exists(out)) {
    if (!fs::is_directory(out)) Fail(ErrorKind::kUsage, "--out is not a directory: " + c.out);
    if (!fs::is_empty(out)) {
      if (!c.overwrite) {
        Fail(ErrorKind::kUsage, "output directory '" + c.out +
                                    "' is not empty; pass --overwrite to replace it");
      }
      fs::remove_all(out);
    }
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create " + c.out + ": " + ec.message());
}

void WriteSnapshot(const fs::path& dir, const std::string& command,
                   const std::vector<std::string>& args, const RunConfig& config,
                   const ordered_json& inputs) {
  ordered_json j;
  j["command"] = command;
  j["argv"] = args;
  j["inputs"] = inputs;
  j["config"] = ToJson(config);
  WriteFile(dir / kSnapshotFile, j.dump(2) + "\n");
}

void AddCommon(CLI::App* app, Options& o) {
  app->add_option("--config", o.common.config, "JSON config file");
  app->add_option("--seed", o.common.seed, "Seed for every random component");
  app->add_option("--out", o.common.out, "Output directory")->required();
  app->add_option("--workers", o.common.workers, "Data-loading threads")
      ->check(CLI::PositiveNumber);
  app->add_flag("--overwrite", o.common.overwrite, "Replace a non-empty output directory");
}

template <typename T>
void Override(std::vector<ConfigOverride>& list, const std::string& pointer,
              const std::optional<T>& value) {
  if (value) list.emplace_back(pointer, nlohmann::json(*value));
}

RunConfig Resolve(const Options& o, std::vector<ConfigOverride> extra) {
  if (o.common.config) RequireExists(*o.common.config, "config file");
  Override(extra, "/seed", o.common.seed);
  Override(extra, "/workers", o.common.workers);
  std::optional<fs::path> file;
  if (o.common.config) file = *o.common.config;
  return ResolveRunConfig(file, extra);
}

std::vector<ConfigOverride> TrainOverrides(const Options& o, const std::string& section) {
  std::vector<ConfigOverride> list;
  Override(list, section + "/max_epochs", o.epochs);
  Override(list, section + "/early_stop_patience", o.patience);
  Override(list, section + "/batch_size", o.batch_size);
  Override(list, section + "/learning_rate", o.lr);
  Override(list, section + "/student_init", o.init);
  return list;
}

TrainOptions MakeTrainOptions(const RunConfig& config, std::ostream& out) {
  TrainOptions opts;
  opts.workers = config.workers;
  opts.on_epoch = [&out](const EpochRecord& r) {
    out << "epoch " << r.epoch << " train_loss " << r.train_loss << " dev_loss " << r.dev_loss;
    if (r.dev_accuracy) out << " dev_accuracy " << *r.dev_accuracy;
    out << " lr " << r.learning_rate << '\n';
  };
  return opts;
}

Manifest LoadValidManifest(const std::string& path) {
  RequireExists(path, "manifest");
  Manifest m = LoadManifest(path);
  ValidateManifest(m);
  return m;
}

struct Models {
  LoadedModel teacher;
  LoadedModel student;
};

Models LoadModels(const Options& o) {
  RequireExists(o.teacher, "teacher checkpoint");
  RequireExists(o.student, "student checkpoint");
  Models m;
  m.teacher = LoadCheckpoint(o.teacher, Role::kTeacher);
  m.student = LoadCheckpoint(o.student, Role::kStudent);
  return m;
}

std::optional<CalibrationStats> LoadStats(const Options& o) {
  if (o.calibration.empty()) return std::nullopt;
  RequireExists(o.calibration, "calibration file");
  return LoadCalibrationStats(o.calibration);
}

// ---------------------------------------------------------------------------

int GenCorpus(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  std::vector<ConfigOverride> ov;
  Override(ov, "/corpus/n_speakers", o.speakers);
  Override(ov, "/corpus/clips_per_speaker", o.clips_per_speaker);
  Override(ov, "/corpus/clip_seconds", o.clip_seconds);
  Override(ov, "/corpus/anomaly_kinds", o.kinds);
  Override(ov, "/corpus/anomaly_level", o.level);
  const RunConfig config = Resolve(o, ov);
  PrepareOutDir(o.common);
  const Manifest m = GenerateSyntheticCorpus(config.corpus, o.common.out, config.frontend);
  WriteSnapshot(o.common.out, "gen-corpus", args, config, ordered_json::object());
  out << "wrote " << m.entries.size() << " entries to "
      << (fs::path(o.common.out) / kCorpusManifest).string() << '\n';
  return kExitOk;
}

int TrainTeacherCmd(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  const RunConfig config = Resolve(o, TrainOverrides(o, "/teacher"));
  const Manifest m = LoadValidManifest(o.manifest);
  PrepareOutDir(o.common);
  TrainResult r = TrainTeacher(m.Filter(Split::kTrain), m.Filter(Split::kDev), config.backbone,
                               config.frontend, config.teacher, MakeTrainOptions(config, out));
  r.metadata["run_config"] = ToJson(config);
  SaveCheckpoint(*r.model, r.metadata, o.common.out);
  WriteTrainLog(r.log, fs::path(o.common.out) / "train_log.jsonl");
  ordered_json inputs;
  inputs["manifest"] = o.manifest;
  WriteSnapshot(o.common.out, "train-teacher", args, config, inputs);
  out << "best epoch " << r.log.best_epoch << ", checkpoint in " << o.common.out << '\n';
  return kExitOk;
}

int TrainStudentCmd(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  const RunConfig config = Resolve(o, TrainOverrides(o, "/student"));
  const Manifest m = LoadValidManifest(o.manifest);
  RequireExists(o.teacher, "teacher checkpoint");
  const LoadedModel teacher = LoadCheckpoint(o.teacher, Role::kTeacher);
  PrepareOutDir(o.common);
  TrainResult r = TrainStudent(*teacher.model, m.Filter(Split::kTrain), m.Filter(Split::kDev),
                               config.student, MakeTrainOptions(config, out));
  r.metadata["run_config"] = ToJson(config);
  SaveCheckpoint(*r.model, r.metadata, o.common.out);
  WriteTrainLog(r.log, fs::path(o.common.out) / "train_log.jsonl");
  ordered_json inputs;
  inputs["manifest"] = o.manifest;
  inputs["teacher"] = o.teacher;
  WriteSnapshot(o.common.out, "train-student", args, config, inputs);
  out << "best epoch " << r.log.best_epoch << ", initial dev loss "
      << *r.log.initial_dev_loss << ", checkpoint in " << o.common.out << '\n';
  return kExitOk;
}

int CalibrateCmd(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  std::vector<ConfigOverride> ov;
  Override(ov, "/detector/calibration_size", o.calibration_size);
  Override(ov, "/detector/ds_epsilon", o.epsilon);
  const RunConfig config = Resolve(o, ov);
  const Manifest m = LoadValidManifest(o.manifest);
  const Models models = LoadModels(o);
  Manifest calib;
  if (config.detector.calibration_size > 0) {
    Manifest pool = m;
    std::erase_if(pool.entries, [](const ManifestEntry& e) { return e.split == Split::kEval; });
    calib = SelectCalibration(pool, static_cast<std::size_t>(config.detector.calibration_size),
                              config.seed);
  } else {
    calib = m.Filter(Split::kCalib);
  }
  PrepareOutDir(o.common);
  const Detector det(*models.teacher.model, *models.student.model, config.detector.fusion);
  CalibrationOptions copts;
  copts.epsilon = config.detector.ds_epsilon;
  copts.workers = config.workers;
  const CalibrationStats stats = det.Calibrate(calib, copts);
  SaveCalibrationStats(stats, fs::path(o.common.out) / kCalibrationFile);
  Manifest calib_out = calib;
  const fs::path out_abs = fs::absolute(o.common.out);
  for (auto& e : calib_out.entries) {
    e.path = fs::absolute(calib.Resolve(e)).lexically_relative(out_abs).generic_string();
  }
  WriteManifest(calib_out, out_abs / "calibration_manifest.jsonl");
  ordered_json inputs;
  inputs["manifest"] = o.manifest;
  inputs["teacher"] = o.teacher;
  inputs["student"] = o.student;
  WriteSnapshot(o.common.out, "calibrate", args, config, inputs);
  out << "calibrated on " << stats.n_clips << " clips (" << stats.n_segments << " segments)";
  if (stats.any_guarded()) out << "; zero-variance layer guarded";
  out << '\n';
  return kExitOk;
}

std::string MapFileName(std::size_t index, const std::string& path) {
  char prefix[16];
  std::snprintf(prefix, sizeof(prefix), "%06zu_", index);
  return prefix + fs::path(path).stem().string() + ".tensor";
}

int ScoreCmd(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  std::vector<ConfigOverride> ov;
  Override(ov, "/detector/fusion", o.fusion);
  const RunConfig config = Resolve(o, ov);
  const Manifest m = LoadValidManifest(o.manifest);
  const Models models = LoadModels(o);
  const auto stats = LoadStats(o);
  const Detector det(*models.teacher.model, *models.student.model, config.detector.fusion);
  if (stats) det.CheckStats(*stats);
  const Manifest subset = o.split == "all" ? m : m.Filter(ParseSplit(o.split));
  if (subset.entries.empty()) Fail(ErrorKind::kInsufficientData, "no entries to score");
  PrepareOutDir(o.common);
  const fs::path out_dir(o.common.out);
  if (o.save_maps) fs::create_directories(out_dir / "maps");

  std::vector<ClipResult> results(subset.entries.size());
  ParallelFor(subset.entries.size(), config.workers, [&](std::size_t i) {
    const auto& e = subset.entries[i];
    results[i] = det.ScoreClip(subset.Resolve(e), stats ? &*stats : nullptr);
    if (o.save_maps) {
      ordered_json extra;
      extra["path"] = e.path;
      extra["ds_applied"] = results[i].score.ds_applied;
      WriteTensorFile(out_dir / "maps" / MapFileName(i, e.path),
                      MatrixToTensorFile(ClipMap(results[i]), "anomaly_map", extra));
    }
  });
  std::ostringstream lines;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& e = subset.entries[i];
    const auto& s = results[i].score;
    ordered_json j;
    j["path"] = e.path;
    j["label"] = LabelName(e.label);
    j["score"] = s.score;
    j["ds_applied"] = s.ds_applied;
    j["n_segments"] = s.n_segments;
    j["per_segment_scores"] = s.per_segment_scores;
    lines << j.dump() << '\n';
  }
  WriteFile(out_dir / kScoresFile, lines.str());
  ordered_json inputs;
  inputs["manifest"] = o.manifest;
  inputs["teacher"] = o.teacher;
  inputs["student"] = o.student;
  inputs["calibration"] = o.calibration.empty() ? ordered_json(nullptr) : ordered_json(o.calibration);
  inputs["split"] = o.split;
  WriteSnapshot(out_dir, "score", args, config, inputs);
  out << "scored " << results.size() << " clips" << (stats ? " with DS" : "") << '\n';
  return kExitOk;
}

int EvaluateCmd(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  const RunConfig config = Resolve(o, {});
  RequireExists(o.scores, "scores file");
  const ScoredSet set = LoadScoredSet(o.scores);
  const EvalReport report = Evaluate(set);
  PrepareOutDir(o.common);
  const fs::path out_dir(o.common.out);
  WriteFile(out_dir / kReportFile, ToJson(report).dump(2) + "\n");
  WriteFile(out_dir / "roc.csv", RocCsv(report.roc));
  WriteFile(out_dir / "histogram.csv", HistogramCsv(ScoreHistogram(set, o.bins.value_or(30))));
  ordered_json inputs;
  inputs["scores"] = o.scores;
  WriteSnapshot(out_dir, "evaluate", args, config, inputs);
  out << "auc " << report.auc << " eer " << report.eer
      << (report.reversed_polarity ? " (reversed polarity)" : "") << '\n';
  return kExitOk;
}

struct RegionIndex {
  std::map<std::string, AnomalyRegion> by_path;

  static std::string Key(const fs::path& p) {
    return fs::weakly_canonical(p).lexically_normal().string();
  }
};

RegionIndex LoadRegionIndex(const std::string& path) {
  RegionIndex index;
  if (path.empty()) return index;
  RequireExists(path, "regions file");
  const fs::path base = fs::path(path).parent_path();
  for (auto& r : LoadRegions(path)) {
    const fs::path p(r.path);
    index.by_path[RegionIndex::Key(p.is_absolute() ? p : base / p)] = r;
  }
  return index;
}

int LocalizeCmd(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  std::vector<ConfigOverride> ov;
  Override(ov, "/detector/tau", o.tau);
  const RunConfig config = Resolve(o, ov);
  RequireExists(o.pairs, "pairs manifest");
  const auto pairs = LoadPairs(o.pairs);
  if (pairs.empty()) Fail(ErrorKind::kInsufficientData, "pairs manifest is empty");
  const Models models = LoadModels(o);
  const auto stats = LoadStats(o);
  const RegionIndex regions = LoadRegionIndex(o.regions);
  const Detector det(*models.teacher.model, *models.student.model, config.detector.fusion);
  if (stats) det.CheckStats(*stats);
  PrepareOutDir(o.common);
  const fs::path out_dir(o.common.out);
  if (o.save_maps) fs::create_directories(out_dir / "maps");

  std::vector<PairResult> results(pairs.size());
  std::vector<std::optional<double>> region_ratio(pairs.size());
  ParallelFor(pairs.size(), config.workers, [&](std::size_t i) {
    results[i] = RunPair(det, pairs[i].real_path, pairs[i].fake_path,
                         stats ? &*stats : nullptr, config.detector.tau);
    const auto it = regions.by_path.find(RegionIndex::Key(pairs[i].fake_path));
    if (it != regions.by_path.end()) {
      const Matrix& map = results[i].fake_map;
      region_ratio[i] = Localize(map, RegionMap(it->second, map.rows, map.cols)).energy_ratio;
    }
    if (o.save_maps) {
      char name[32];
      std::snprintf(name, sizeof(name), "pair_%04zu_", i);
      WriteTensorFile(out_dir / "maps" / (std::string(name) + "gt.tensor"),
                      MatrixToTensorFile(results[i].ground_truth, "ground_truth"));
      WriteTensorFile(out_dir / "maps" / (std::string(name) + "real.tensor"),
                      MatrixToTensorFile(results[i].real_map, "anomaly_map"));
      WriteTensorFile(out_dir / "maps" / (std::string(name) + "fake.tensor"),
                      MatrixToTensorFile(results[i].fake_map, "anomaly_map"));
    }
  });

  std::ostringstream lines;
  auto mean_of = [](const std::vector<std::optional<double>>& v) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& x : v) {
      if (x) {
        sum += *x;
        ++n;
      }
    }
    return n ? ordered_json(sum / static_cast<double>(n)) : ordered_json(nullptr);
  };
  std::vector<std::optional<double>> corr, pauc, ratio, real_mean, fake_mean;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& r = results[i];
    ordered_json j;
    j["real_path"] = pairs[i].real_path;
    j["fake_path"] = pairs[i].fake_path;
    j["source"] = PairSourceName(pairs[i].source);
    j["report"] = ToJson(r.report);
    j["comparison"] = ToJson(r.comparison);
    j["region_energy_ratio"] =
        region_ratio[i] ? ordered_json(*region_ratio[i]) : ordered_json(nullptr);
    lines << j.dump() << '\n';
    corr.push_back(r.report.correlation);
    pauc.push_back(r.report.pixel_auc);
    ratio.push_back(r.report.energy_ratio);
    real_mean.push_back(r.comparison.real_mean);
    fake_mean.push_back(r.comparison.fake_mean);
  }
  WriteFile(out_dir / "localization.jsonl", lines.str());
  ordered_json summary;
  summary["n_pairs"] = pairs.size();
  summary["ds_applied"] = stats.has_value();
  summary["tau"] = config.detector.tau;
  summary["mean_correlation"] = mean_of(corr);
  summary["mean_pixel_auc"] = mean_of(pauc);
  summary["mean_energy_ratio"] = mean_of(ratio);
  summary["mean_region_energy_ratio"] = mean_of(region_ratio);
  summary["mean_real_map"] = mean_of(real_mean);
  summary["mean_fake_map"] = mean_of(fake_mean);
  WriteFile(out_dir / "summary.json", summary.dump(2) + "\n");
  ordered_json inputs;
  inputs["pairs"] = o.pairs;
  inputs["regions"] = o.regions.empty() ? ordered_json(nullptr) : ordered_json(o.regions);
  inputs["teacher"] = o.teacher;
  inputs["student"] = o.student;
  inputs["calibration"] = o.calibration.empty() ? ordered_json(nullptr) : ordered_json(o.calibration);
  WriteSnapshot(out_dir, "localize", args, config, inputs);
  out << "localized " << pairs.size() << " pairs\n";
  return kExitOk;
}

int PlotCmd(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  const RunConfig config = Resolve(o, {});
  if (o.report.empty() && o.scores.empty() && o.maps.empty()) {
    Fail(ErrorKind::kUsage, "plot needs --report, --scores or --maps");
  }
  if (!o.report.empty()) RequireExists(o.report, "report");
  if (!o.scores.empty()) RequireExists(o.scores, "scores file");
  std::vector<fs::path> map_files;
  for (const auto& m : o.maps) {
    RequireExists(m, "map");
    if (fs::is_directory(m)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(m)) {
        if (e.path().extension() == ".tensor") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      map_files.insert(map_files.end(), found.begin(), found.end());
    } else {
      map_files.emplace_back(m);
    }
  }
  PrepareOutDir(o.common);
  const fs::path out_dir(o.common.out);
  int written = 0;
  if (!o.report.empty()) {
    ordered_json report;
    try {
      report = ordered_json::parse(ReadFile(o.report));
      std::vector<RocPoint> roc;
      for (const auto& p : report.at("roc_points")) {
        roc.push_back({p.at("fpr").get<double>(), p.at("tpr").get<double>(),
                       p.at("threshold").is_null() ? INFINITY : p.at("threshold").get<double>()});
      }
      WriteRocPng(out_dir / "roc.png", roc);
      ++written;
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorKind::kParse, o.report + ": " + e.what());
    }
  }
  if (!o.scores.empty()) {
    WriteHistogramPng(out_dir / "histogram.png",
                      ScoreHistogram(LoadScoredSet(o.scores), o.bins.value_or(30)));
    ++written;
  }
  ordered_json scales = ordered_json::object();
  for (const auto& f : map_files) {
    const Matrix m = TensorFileToMatrix(ReadTensorFile(f));
    const std::string name = f.stem().string() + ".png";
    scales[name] = WriteHeatmapPng(out_dir / name, m);
    ++written;
  }
  if (!map_files.empty()) WriteFile(out_dir / "heatmap_scales.json", scales.dump(2) + "\n");
  ordered_json inputs;
  inputs["report"] = o.report;
  inputs["scores"] = o.scores;
  inputs["maps"] = o.maps;
  WriteSnapshot(out_dir, "plot", args, config, inputs);
  out << "wrote " << written << " figures\n";
  return kExitOk;
}

std::string OneLine(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"One-class speech deepfake detection with student-teacher feature pyramid "
               "matching"};
  app.require_subcommand(1);
  Options o;
  using Handler =
      std::function<int(const Options&, const std::vector<std::string>&, std::ostream&)>;
  std::vector<std::pair<CLI::App*, Handler>> commands;

  auto* gen = app.add_subcommand("gen-corpus", "Generate the synthetic desk-scale corpus");
  AddCommon(gen, o);
  gen->add_option("--speakers", o.speakers, "Number of speakers");
  gen->add_option("--clips-per-speaker", o.clips_per_speaker, "Real clips per speaker");
  gen->add_option("--clip-seconds", o.clip_seconds, "Clip length in seconds");
  gen->add_option("--kinds", o.kinds, "Anomaly kinds (band_tone band_swap noise_patch)");
  gen->add_option("--level", o.level, "Anomaly peak relative to the clip peak");
  commands.emplace_back(gen, GenCorpus);

  auto* tt = app.add_subcommand("train-teacher", "Speaker-ID pretraining of the teacher");
  AddCommon(tt, o);
  tt->add_option("--manifest", o.manifest, "Manifest with train/dev real entries")->required();
  auto add_train = [&o](CLI::App* cmd) {
    cmd->add_option("--epochs", o.epochs, "Maximum epochs");
    cmd->add_option("--patience", o.patience, "Early-stopping patience");
    cmd->add_option("--batch-size", o.batch_size, "Mini-batch size");
    cmd->add_option("--lr", o.lr, "Initial learning rate");
  };
  add_train(tt);
  commands.emplace_back(tt, TrainTeacherCmd);

  auto* ts = app.add_subcommand("train-student", "Train the student against a frozen teacher");
  AddCommon(ts, o);
  ts->add_option("--manifest", o.manifest, "Manifest with train/dev real entries")->required();
  ts->add_option("--teacher", o.teacher, "Teacher checkpoint directory")->required();
  ts->add_option("--init", o.init, "Student init: random or teacher_copy");
  add_train(ts);
  commands.emplace_back(ts, TrainStudentCmd);

  auto* cal = app.add_subcommand("calibrate", "Estimate discrepancy-scaling statistics");
  AddCommon(cal, o);
  cal->add_option("--manifest", o.manifest, "Manifest holding calibration clips")->required();
  cal->add_option("--teacher", o.teacher, "Teacher checkpoint directory")->required();
  cal->add_option("--student", o.student, "Student checkpoint directory")->required();
  cal->add_option("--calibration-size", o.calibration_size,
                  "Draw this many real non-eval clips instead of the calib split");
  cal->add_option("--epsilon", o.epsilon, "Standard-deviation floor");
  commands.emplace_back(cal, CalibrateCmd);

  auto* sc = app.add_subcommand("score", "Score clips with the anomaly detector");
  AddCommon(sc, o);
  sc->add_option("--manifest", o.manifest, "Manifest of clips to score")->required();
  sc->add_option("--teacher", o.teacher, "Teacher checkpoint directory")->required();
  sc->add_option("--student", o.student, "Student checkpoint directory")->required();
  sc->add_option("--calibration", o.calibration, "Calibration statistics (enables DS)");
  sc->add_option("--split", o.split, "Split to score, or 'all'");
  sc->add_option("--fusion", o.fusion, "Layer fusion: mean or product");
  sc->add_flag("--save-maps", o.save_maps, "Write clip anomaly maps as tensor files");
  commands.emplace_back(sc, ScoreCmd);

  auto* ev = app.add_subcommand("evaluate", "AUC, EER, ROC and histograms from scores");
  AddCommon(ev, o);
  ev->add_option("--scores", o.scores, "Scores file from 'score'")->required();
  ev->add_option("--bins", o.bins, "Histogram bins")->check(CLI::PositiveNumber);
  commands.emplace_back(ev, EvaluateCmd);

  auto* lo = app.add_subcommand("localize", "Compare anomaly maps with paired ground truth");
  AddCommon(lo, o);
  lo->add_option("--pairs", o.pairs, "Pairs manifest")->required();
  lo->add_option("--teacher", o.teacher, "Teacher checkpoint directory")->required();
  lo->add_option("--student", o.student, "Student checkpoint directory")->required();
  lo->add_option("--calibration", o.calibration, "Calibration statistics (enables DS)");
  lo->add_option("--regions", o.regions, "Injected-region sidecar");
  lo->add_option("--tau", o.tau, "Ground-truth binarization threshold");
  lo->add_flag("--save-maps", o.save_maps, "Write ground-truth and anomaly maps");
  commands.emplace_back(lo, LocalizeCmd);

  auto* pl = app.add_subcommand("plot", "Render ROC, histogram and heatmap images");
  AddCommon(pl, o);
  pl->add_option("--report", o.report, "Evaluation report JSON");
  pl->add_option("--scores", o.scores, "Scores file");
  pl->add_option("--maps", o.maps, "Tensor files or directories of them");
  pl->add_option("--bins", o.bins, "Histogram bins")->check(CLI::PositiveNumber);
  commands.emplace_back(pl, PlotCmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << ErrorKindName(ErrorKind::kUsage) << ": " << OneLine(e.what()) << '\n';
    return kExitUsage;
  }

  try {
    for (auto& [cmd, handler] : commands) {
      if (cmd->parsed()) return handler(o, args, out);
    }
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << ErrorKindName(e.kind()) << ": " << OneLine(e.what()) << '\n';
    return e.kind() == ErrorKind::kUsage ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: internal: " << OneLine(e.what()) << '\n';
    return kExitFailure;
  }
}

}  // namespace fpm_spoof
