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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpm_spoof/backbone.h"
#include "fpm_spoof/feature_cache.h"
#include "fpm_spoof/manifest.h"

namespace fpm_spoof {

enum class StudentInit { kRandom, kTeacherCopy };
std::string_view StudentInitName(StudentInit init);
StudentInit ParseStudentInit(std::string_view token);

struct TrainConfig {
  int max_epochs = 300;
  int early_stop_patience = 15;
  int batch_size = 64;
  double learning_rate = 1e-4;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // Cosine annealing floor.
  double min_learning_rate = 0.0;
  std::uint64_t seed = 0;
  StudentInit student_init = StudentInit::kRandom;

  void Validate() const;
};

nlohmann::ordered_json ToJson(const TrainConfig& config);
TrainConfig TrainConfigFromJson(const nlohmann::json& j);

// Cosine annealing over max_epochs, evaluated at a zero-based epoch index.
double CosineLearningRate(const TrainConfig& config, int epoch);

// Decoupled-weight-decay Adam over every parameter of a registry.
class AdamW {
 public:
  AdamW(nn::Registry& registry, const TrainConfig& config);
  void Step(double learning_rate);
  std::int64_t steps() const { return step_; }

 private:
  nn::Registry& registry_;
  double beta1_, beta2_, eps_, weight_decay_;
  std::vector<std::vector<float>> m_, v_;
  std::int64_t step_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  std::optional<double> dev_accuracy;
  double learning_rate = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  bool stopped_early = false;
  // Dev loss of the freshly initialized model (student only).
  std::optional<double> initial_dev_loss;
};

nlohmann::ordered_json ToJson(const EpochRecord& record);
// One JSON object per epoch.
void WriteTrainLog(const TrainLog& log, const std::filesystem::path& path);

// In-memory 4 s segments with integer targets (speaker index, or -1).
struct SegmentDataset {
  std::vector<Matrix> mels;
  std::vector<int> targets;
  std::size_t size() const { return mels.size(); }
};

struct TrainOptions {
  int workers = 1;
  // Called once for every manifest entry the data loader decodes.
  std::function<void(const ManifestEntry&)> on_read;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Decodes every entry of a manifest into segments. `target_of` maps an entry
// to its integer target.
SegmentDataset LoadSegments(const Manifest& manifest, const FeatureSource& features,
                            const std::function<int(const ManifestEntry&)>& target_of,
                            const TrainOptions& options);

struct TrainResult {
  std::unique_ptr<Backbone> model;
  TrainLog log;
  nlohmann::ordered_json metadata;
};

// Speaker-identification training with cross-entropy. n_classes is set to the
// number of distinct training speakers. Returns the best-dev-loss model.
TrainResult TrainTeacher(const Manifest& train, const Manifest& dev,
                         BackboneConfig backbone, const FrontendConfig& frontend,
                         const TrainConfig& config, const TrainOptions& options = {});

// Feature-pyramid matching against a frozen teacher on real speech only.
// `student_config` defaults to the teacher's topology without a classifier.
TrainResult TrainStudent(const Backbone& teacher, const Manifest& train,
                         const Manifest& dev, const TrainConfig& config,
                         const TrainOptions& options = {},
                         std::optional<BackboneConfig> student_config = std::nullopt);

// Mean fpm loss of `student` against `teacher` over a dataset, inference mode.
double DatasetFpmLoss(const Backbone& teacher, const Backbone& student,
                      const SegmentDataset& data, int batch_size);

}  // namespace fpm_spoof
