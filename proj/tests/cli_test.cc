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

#include <gtest/gtest.h>

#include <sstream>

#include "fpm_spoof/cli.h"
#include "fpm_spoof/io_util.h"
#include "fpm_spoof/synthetic_corpus.h"
#include "test_util.h"

namespace fpm_spoof {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct CliRun {
  int code;
  std::string out, err;
};

CliRun Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fpm_spoof");
  std::ostringstream out, err;
  const int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<nlohmann::json> JsonLines(const fs::path& p) {
  std::istringstream in(ReadFile(p));
  std::vector<nlohmann::json> rows;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) rows.push_back(nlohmann::json::parse(line));
  }
  return rows;
}

// Runs the whole tool chain once on a tiny configuration.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    WriteFile(*dir_ / "tiny.json",
              R"({"seed": 2, "backbone": {"stage_channels": [4, 8, 8, 16]},
                  "teacher": {"max_epochs": 1, "early_stop_patience": 1, "batch_size": 8},
                  "student": {"max_epochs": 1, "early_stop_patience": 1, "batch_size": 8},
                  "corpus": {"n_speakers": 2, "clips_per_speaker": 8}})");
    const std::string cfg = (*dir_ / "tiny.json").string();
    const auto step = [&](std::vector<std::string> args) {
      args.insert(args.end(), {"--config", cfg});
      const CliRun r = Cli(args);
      ASSERT_EQ(r.code, 0) << args[0] << ": " << r.err;
    };
    step({"gen-corpus", "--out", P("corpus")});
    step({"train-teacher", "--manifest", P("corpus/manifest.jsonl"), "--out", P("teacher")});
    step({"train-student", "--manifest", P("corpus/manifest.jsonl"), "--teacher", P("teacher"),
          "--out", P("student")});
    step({"calibrate", "--manifest", P("corpus/manifest.jsonl"), "--teacher", P("teacher"),
          "--student", P("student"), "--out", P("calib")});
    step({"score", "--manifest", P("corpus/manifest.jsonl"), "--teacher", P("teacher"),
          "--student", P("student"), "--calibration", P("calib/calibration.json"),
          "--save-maps", "--out", P("scores")});
    step({"evaluate", "--scores", P("scores/scores.jsonl"), "--out", P("eval")});
    step({"localize", "--pairs", P("corpus/pairs.jsonl"), "--regions",
          P("corpus/regions.jsonl"), "--teacher", P("teacher"), "--student", P("student"),
          "--calibration", P("calib/calibration.json"), "--out", P("loc")});
    step({"plot", "--report", P("eval/eval_report.json"), "--scores",
          P("scores/scores.jsonl"), "--maps", P("scores/maps"), "--out", P("plots")});
  }
  static void TearDownTestSuite() { delete dir_; }

  static std::string P(const std::string& rel) { return (*dir_ / rel).string(); }
  static TempDir* dir_;
};

TempDir* CliPipeline::dir_ = nullptr;

TEST_F(CliPipeline, EveryStepWritesItsArtifactsAndSnapshot) {
  for (const char* d : {"corpus", "teacher", "student", "calib", "scores", "eval", "loc", "plots"}) {
    const auto snap = nlohmann::json::parse(ReadFile(*dir_ / d / "config.json"));
    EXPECT_TRUE(snap.contains("command")) << d;
    EXPECT_EQ(snap["config"]["seed"], 2) << d;
  }
  EXPECT_TRUE(fs::exists(*dir_ / "teacher" / "checkpoint.json"));
  EXPECT_TRUE(fs::exists(*dir_ / "student" / "weights.bin"));
  const auto report = nlohmann::json::parse(ReadFile(*dir_ / "eval" / "eval_report.json"));
  EXPECT_GE(report["auc"].get<double>(), 0.0);
  EXPECT_LE(report["auc"].get<double>(), 1.0);
  const auto summary = nlohmann::json::parse(ReadFile(*dir_ / "loc" / "summary.json"));
  EXPECT_EQ(summary["ds_applied"], true);
  EXPECT_GT(summary["n_pairs"].get<int>(), 0);
  EXPECT_TRUE(fs::exists(*dir_ / "plots" / "roc.png"));
  EXPECT_TRUE(fs::exists(*dir_ / "plots" / "histogram.png"));
  EXPECT_TRUE(fs::exists(*dir_ / "plots" / "heatmap_scales.json"));
}

TEST_F(CliPipeline, ScoresCarryDsFlagAndRerunIsIdentical) {
  const auto rows = JsonLines(*dir_ / "scores" / "scores.jsonl");
  ASSERT_FALSE(rows.empty());
  for (const auto& r : rows) {
    EXPECT_EQ(r["ds_applied"], true);
    EXPECT_EQ(r["n_segments"], 1);
  }
  const CliRun again = Cli({"score", "--manifest", P("corpus/manifest.jsonl"), "--teacher",
                         P("teacher"), "--student", P("student"), "--calibration",
                         P("calib/calibration.json"), "--workers", "3", "--config",
                         P("tiny.json"), "--out", P("scores2")});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(ReadFile(*dir_ / "scores" / "scores.jsonl"),
            ReadFile(*dir_ / "scores2" / "scores.jsonl"));
  const CliRun raw = Cli({"score", "--manifest", P("corpus/manifest.jsonl"), "--teacher",
                       P("teacher"), "--student", P("student"), "--config", P("tiny.json"),
                       "--out", P("scores_raw")});
  ASSERT_EQ(raw.code, 0) << raw.err;
  for (const auto& r : JsonLines(*dir_ / "scores_raw" / "scores.jsonl")) {
    EXPECT_EQ(r["ds_applied"], false);
  }
}

TEST_F(CliPipeline, RefusesToClobberWithoutOverwrite) {
  const std::vector<std::string> args = {"evaluate", "--scores", P("scores/scores.jsonl"),
                                         "--out", P("eval")};
  const CliRun r = Cli(args);
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("error: "), std::string::npos);
  auto with = args;
  with.push_back("--overwrite");
  EXPECT_EQ(Cli(with).code, kExitOk);
}

TEST_F(CliPipeline, TeacherCheckpointAsStudentIsRoleError) {
  const CliRun r = Cli({"score", "--manifest", P("corpus/manifest.jsonl"), "--teacher",
                     P("teacher"), "--student", P("teacher"), "--out", P("bad")});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("role_error"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrorsExitTwo) {
  TempDir dir;
  EXPECT_EQ(Cli({}).code, kExitUsage);
  EXPECT_EQ(Cli({"no-such-command"}).code, kExitUsage);
  const CliRun missing = Cli({"train-teacher", "--manifest", (dir / "nope.jsonl").string(), "--out",
                           (dir / "t").string()});
  EXPECT_EQ(missing.code, kExitUsage);
  EXPECT_EQ(missing.err.rfind("error: usage_error: ", 0), 0u) << missing.err;
  EXPECT_EQ(Cli({"evaluate", "--out", (dir / "e").string()}).code, kExitUsage);
  EXPECT_EQ(Cli({"gen-corpus", "--out", (dir / "c").string(), "--config",
                 (dir / "missing.json").string()})
                .code,
            kExitUsage);
}

TEST(Cli, HelpExitsZero) {
  const CliRun r = Cli({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("gen-corpus"), std::string::npos);
}

TEST(Cli, BadConfigValueIsConfigError) {
  TempDir dir;
  WriteFile(dir / "c.json", R"({"workers": 2, "bogus": 1})");
  const CliRun r = Cli({"gen-corpus", "--config", (dir / "c.json").string(), "--out",
                     (dir / "c").string()});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_EQ(r.err.rfind("error: config_error: ", 0), 0u) << r.err;
}

}  // namespace
}  // namespace fpm_spoof
