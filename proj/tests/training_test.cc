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

#include <cmath>
#include <memory>

#include "fpm_spoof/errors.h"
#include "fpm_spoof/synthetic_corpus.h"
#include "fpm_spoof/training.h"
#include "test_util.h"

namespace fpm_spoof {
namespace {

using testing::TempDir;
using testing::TinyBackbone;

ErrorKind KindOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::kUsage;
}

TEST(Cosine, Schedule) {
  TrainConfig c;
  c.learning_rate = 0.1;
  c.min_learning_rate = 0.02;
  c.max_epochs = 4;
  EXPECT_DOUBLE_EQ(CosineLearningRate(c, 0), 0.1);
  EXPECT_NEAR(CosineLearningRate(c, 2), 0.06, 1e-15);
  EXPECT_NEAR(CosineLearningRate(c, 1), 0.02 + 0.04 * (1 + std::sqrt(0.5)), 1e-15);
  for (int e = 1; e < 4; ++e) EXPECT_LT(CosineLearningRate(c, e), CosineLearningRate(c, e - 1));
}

TEST(AdamW, TwoStepsMatchHandCalculation) {
  Param p({2});
  p.value = {1.0f, -2.0f};
  nn::Registry reg;
  reg.params.push_back({"w", &p});
  TrainConfig c;
  c.weight_decay = 0.01;
  AdamW opt(reg, c);
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double g1[2] = {0.5, -0.25}, g2[2] = {-0.2, 0.1};
  double w[2] = {1.0, -2.0}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int step = 1; step <= 2; ++step) {
    const double* g = step == 1 ? g1 : g2;
    p.grad = {static_cast<float>(g[0]), static_cast<float>(g[1])};
    opt.Step(lr);
    for (int i = 0; i < 2; ++i) {
      w[i] -= lr * 0.01 * w[i];
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, step)), vh = v[i] / (1 - std::pow(b2, step));
      w[i] -= lr * mh / (std::sqrt(vh) + eps);
      EXPECT_NEAR(p.value[i], w[i], 1e-6) << "step " << step << " index " << i;
    }
  }
  EXPECT_EQ(opt.steps(), 2);
}

TEST(TrainConfig, ValidationAndJson) {
  TrainConfig c;
  EXPECT_NO_THROW(c.Validate());
  c.early_stop_patience = c.max_epochs;
  EXPECT_THROW(c.Validate(), Error);
  c = {};
  c.learning_rate = -1;
  EXPECT_THROW(c.Validate(), Error);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.Validate(), Error);
  c = {};
  c.max_epochs = 1;
  c.early_stop_patience = 1;
  EXPECT_NO_THROW(c.Validate());
  c.student_init = StudentInit::kTeacherCopy;
  c.seed = 42;
  EXPECT_EQ(ToJson(TrainConfigFromJson(ToJson(c))).dump(), ToJson(c).dump());
  EXPECT_EQ(ParseStudentInit("teacher_copy"), StudentInit::kTeacherCopy);
  EXPECT_THROW(ParseStudentInit("imagenet"), Error);
}

// Small synthetic corpus shared by the training tests.
class TrainingFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    SyntheticCorpusConfig cfg;
    cfg.n_speakers = 4;
    cfg.clips_per_speaker = 8;
    cfg.seed = 3;
    manifest_ = new Manifest(GenerateSyntheticCorpus(cfg, dir_->path()));
  }
  static void TearDownTestSuite() {
    delete manifest_;
    delete dir_;
  }

  static Manifest Real(Split split) { return manifest_->Filter(split).Filter(Label::kReal); }

  static TrainConfig Quick(int epochs, double lr) {
    TrainConfig c;
    c.max_epochs = epochs;
    c.early_stop_patience = std::max(1, epochs - 1);
    c.batch_size = 8;
    c.learning_rate = lr;
    c.seed = 5;
    return c;
  }

  static std::unique_ptr<Backbone> Teacher() {
    static std::unique_ptr<TrainResult> cached;
    if (!cached) {
      cached = std::make_unique<TrainResult>(TrainTeacher(
          Real(Split::kTrain), Real(Split::kDev), TinyBackbone(), FrontendConfig{},
          Quick(2, 3e-3)));
    }
    auto copy = std::make_unique<Backbone>(cached->model->config(), cached->model->frontend(),
                                           Role::kTeacher, 0);
    copy->CopyFeatureWeightsFrom(*cached->model);
    return copy;
  }

  static TempDir* dir_;
  static Manifest* manifest_;
};

TempDir* TrainingFixture::dir_ = nullptr;
Manifest* TrainingFixture::manifest_ = nullptr;

TEST_F(TrainingFixture, TeacherSmokeRunLearnsSpeakers) {
  const TrainResult r = TrainTeacher(Real(Split::kTrain), Real(Split::kDev), TinyBackbone(),
                                     FrontendConfig{}, Quick(6, 1e-2));
  ASSERT_GE(r.log.epochs.size(), 1u);
  ASSERT_GE(r.log.best_epoch, 0);
  const auto& best = r.log.epochs[r.log.best_epoch];
  ASSERT_TRUE(best.dev_accuracy.has_value());
  EXPECT_GT(*best.dev_accuracy, 0.25);
  EXPECT_EQ(r.model->config().n_classes, 4);
  EXPECT_EQ(r.metadata["speakers"].size(), 4u);
  EXPECT_EQ(r.metadata["trainer"], "teacher");
}

TEST_F(TrainingFixture, TeacherTrainingIsDeterministic) {
  const auto cfg = Quick(1, 3e-3);
  const TrainResult a =
      TrainTeacher(Real(Split::kTrain), Real(Split::kDev), TinyBackbone(), FrontendConfig{}, cfg);
  const TrainResult b =
      TrainTeacher(Real(Split::kTrain), Real(Split::kDev), TinyBackbone(), FrontendConfig{}, cfg);
  EXPECT_EQ(a.model->WeightDigest(), b.model->WeightDigest());
  EXPECT_EQ(a.log.epochs[0].dev_loss, b.log.epochs[0].dev_loss);
}

TEST_F(TrainingFixture, ZeroLearningRateStopsEarly) {
  TrainConfig c = Quick(5, 0.0);
  c.early_stop_patience = 1;
  const TrainResult r =
      TrainTeacher(Real(Split::kTrain), Real(Split::kDev), TinyBackbone(), FrontendConfig{}, c);
  EXPECT_LE(r.log.epochs.size(), 2u);
  EXPECT_TRUE(r.log.stopped_early);
  EXPECT_EQ(r.log.best_epoch, 0);
}

TEST_F(TrainingFixture, UnseenDevSpeakerIsLabelSpaceError) {
  Manifest train = Real(Split::kTrain);
  std::erase_if(train.entries, [](const ManifestEntry& e) { return e.speaker_id == "spk03"; });
  EXPECT_EQ(KindOf([&] {
              TrainTeacher(train, Real(Split::kDev), TinyBackbone(), FrontendConfig{},
                           Quick(1, 1e-3));
            }),
            ErrorKind::kLabelSpace);
}

TEST_F(TrainingFixture, EmptyOrFakeInputsAreRejected) {
  Manifest empty;
  empty.base_dir = dir_->path();
  EXPECT_EQ(KindOf([&] {
              TrainTeacher(empty, Real(Split::kDev), TinyBackbone(), FrontendConfig{},
                           Quick(1, 1e-3));
            }),
            ErrorKind::kInsufficientData);
  const auto teacher = Teacher();
  const Manifest with_fake = manifest_->Filter(Split::kEval);
  EXPECT_EQ(KindOf([&] { TrainStudent(*teacher, with_fake, Real(Split::kDev), Quick(1, 1e-3)); }),
            ErrorKind::kOneClassViolation);
}

TEST_F(TrainingFixture, StudentNeverReadsFakeAudio) {
  const auto teacher = Teacher();
  TrainOptions opts;
  int reads = 0;
  opts.on_read = [&](const ManifestEntry& e) {
    ++reads;
    EXPECT_EQ(e.label, Label::kReal);
  };
  TrainStudent(*teacher, Real(Split::kTrain), Real(Split::kDev), Quick(1, 1e-3), opts);
  EXPECT_EQ(reads, static_cast<int>(Real(Split::kTrain).entries.size() +
                                    Real(Split::kDev).entries.size()));
}

TEST_F(TrainingFixture, StudentTrainingLeavesTeacherFrozenAndLowersLoss) {
  const auto teacher = Teacher();
  const std::string before = teacher->WeightDigest();
  const TrainResult r =
      TrainStudent(*teacher, Real(Split::kTrain), Real(Split::kDev), Quick(3, 1e-2));
  EXPECT_EQ(teacher->WeightDigest(), before);
  EXPECT_EQ(r.metadata["teacher_digest"], before);
  EXPECT_EQ(r.model->role(), Role::kStudent);
  ASSERT_TRUE(r.log.initial_dev_loss.has_value());
  EXPECT_LT(r.log.epochs[r.log.best_epoch].dev_loss, *r.log.initial_dev_loss);
}

TEST_F(TrainingFixture, TeacherCopyInitStartsAtZeroLoss) {
  const auto teacher = Teacher();
  TrainConfig c = Quick(1, 0.0);
  c.student_init = StudentInit::kTeacherCopy;
  const TrainResult r = TrainStudent(*teacher, Real(Split::kTrain), Real(Split::kDev), c);
  EXPECT_NEAR(*r.log.initial_dev_loss, 0.0, 1e-12);
  EXPECT_EQ(r.metadata["init"], "teacher_copy");
}

TEST_F(TrainingFixture, StudentRejectsStudentAsTeacherAndMismatchedTopology) {
  const Backbone not_teacher(TinyBackbone(), FrontendConfig{}, Role::kStudent, 1);
  EXPECT_EQ(KindOf([&] {
              TrainStudent(not_teacher, Real(Split::kTrain), Real(Split::kDev), Quick(1, 1e-3));
            }),
            ErrorKind::kRole);
  const auto teacher = Teacher();
  BackboneConfig other = TinyBackbone();
  other.stage_channels = {8, 8, 8, 8};
  EXPECT_EQ(KindOf([&] {
              TrainStudent(*teacher, Real(Split::kTrain), Real(Split::kDev), Quick(1, 1e-3), {},
                           other);
            }),
            ErrorKind::kConfig);
}

TEST_F(TrainingFixture, TrainLogIsJsonLines) {
  TrainLog log;
  log.epochs = {{0, 1.0, 0.9, 0.5, 1e-3}, {1, 0.8, 0.7, std::nullopt, 5e-4}};
  log.best_epoch = 1;
  WriteTrainLog(log, dir_->path() / "log.jsonl");
  std::istringstream in(ReadFile(dir_->path() / "log.jsonl"));
  std::string line;
  std::vector<nlohmann::json> rows;
  while (std::getline(in, line)) rows.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1]["best"], true);
  EXPECT_TRUE(rows[1]["dev_accuracy"].is_null());
}

}  // namespace
}  // namespace fpm_spoof
