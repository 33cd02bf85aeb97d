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

#include "fpm_spoof/training.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "fpm_spoof/errors.h"
#include "fpm_spoof/fpm_loss.h"
#include "fpm_spoof/io_util.h"
#include "fpm_spoof/parallel.h"

namespace fpm_spoof {
namespace {

using Snapshot = std::vector<std::vector<float>>;

Snapshot TakeSnapshot(const Backbone& model) {
  Snapshot s;
  for (const auto& p : model.registry().params) s.push_back(p.param->value);
  for (const auto& b : model.registry().buffers) s.push_back(*b.values);
  return s;
}

void RestoreSnapshot(Backbone& model, const Snapshot& s) {
  std::size_t i = 0;
  for (auto& p : model.registry().params) p.param->value = s[i++];
  for (auto& b : model.registry().buffers) *b.values = s[i++];
}

void ShuffleIndices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

Tensor Batch(const SegmentDataset& data, const std::vector<std::size_t>& idx,
             std::size_t begin, std::size_t end) {
  std::vector<const Matrix*> ptrs;
  for (std::size_t k = begin; k < end; ++k) ptrs.push_back(&data.mels[idx[k]]);
  return StackMels(ptrs);
}

std::vector<std::size_t> Iota(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

// Softmax cross-entropy over [N, K] logits; fills dL/dlogits for the batch
// mean loss and returns the summed loss and number of correct predictions.
double CrossEntropy(const Tensor& logits, const std::vector<int>& targets,
                    Tensor* grad, int* correct) {
  const int n = logits.n;
  const int k = logits.c;
  double total = 0.0;
  if (grad) *grad = Tensor(n, k, 1, 1);
  for (int i = 0; i < n; ++i) {
    const float* z = logits.sample(i);
    const double zmax = *std::max_element(z, z + k);
    double denom = 0.0;
    for (int j = 0; j < k; ++j) denom += std::exp(z[j] - zmax);
    const double log_denom = std::log(denom) + zmax;
    total += log_denom - z[targets[i]];
    if (correct && std::max_element(z, z + k) - z == targets[i]) ++*correct;
    if (grad) {
      for (int j = 0; j < k; ++j) {
        const double p = std::exp(z[j] - log_denom);
        grad->at(i, j, 0, 0) = static_cast<float>((p - (j == targets[i] ? 1.0 : 0.0)) / n);
      }
    }
  }
  return total;
}

// Fixed-order training-mode pass over the training set to refresh BN running
// statistics.
void RefreshBatchNorm(Backbone& model, const SegmentDataset& data, int batch_size) {
  const auto idx = Iota(data.size());
  model.BeginStatsPass();
  for (std::size_t b = 0; b < data.size(); b += batch_size) {
    const std::size_t e = std::min(data.size(), b + batch_size);
    model.Forward(Batch(data, idx, b, e), false);
  }
  model.EndStatsPass();
}

struct DevResult {
  double loss = 0.0;
  std::optional<double> accuracy;
};

DevResult TeacherDev(const Backbone& model, const SegmentDataset& dev, int batch_size) {
  const auto idx = Iota(dev.size());
  double total = 0.0;
  int correct = 0;
  for (std::size_t b = 0; b < dev.size(); b += batch_size) {
    const std::size_t e = std::min(dev.size(), b + batch_size);
    const PyramidBatch out = model.Infer(Batch(dev, idx, b, e), true);
    std::vector<int> targets(dev.targets.begin() + b, dev.targets.begin() + e);
    total += CrossEntropy(out.logits, targets, nullptr, &correct);
  }
  return {total / dev.size(), static_cast<double>(correct) / dev.size()};
}

nlohmann::ordered_json LogSummary(const TrainLog& log, const TrainConfig& config) {
  nlohmann::ordered_json j;
  j["epochs_run"] = log.epochs.size();
  j["best_epoch"] = log.best_epoch;
  if (log.best_epoch >= 0) {
    const auto& best = log.epochs[log.best_epoch];
    j["best_dev_loss"] = best.dev_loss;
    if (best.dev_accuracy) j["best_dev_accuracy"] = *best.dev_accuracy;
  }
  j["stopped_early"] = log.stopped_early;
  j["seed"] = config.seed;
  j["train_config"] = ToJson(config);
  return j;
}

// Shared epoch loop: `train_epoch` runs one pass and returns the mean train
// loss; `dev_eval` returns the dev loss (and accuracy). Keeps the best state.
void RunEpochs(Backbone& model, const SegmentDataset& train, const TrainConfig& config,
               const TrainOptions& options,
               const std::function<double(double lr)>& train_epoch,
               const std::function<DevResult()>& dev_eval, TrainLog& log) {
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  Snapshot best_state = TakeSnapshot(model);
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double lr = CosineLearningRate(config, epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    rec.train_loss = train_epoch(lr);
    RefreshBatchNorm(model, train, config.batch_size);
    const DevResult dev = dev_eval();
    rec.dev_loss = dev.loss;
    rec.dev_accuracy = dev.accuracy;
    log.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
    if (dev.loss < best) {
      best = dev.loss;
      log.best_epoch = epoch;
      best_state = TakeSnapshot(model);
      since_best = 0;
    } else if (++since_best >= config.early_stop_patience) {
      log.stopped_early = epoch + 1 < config.max_epochs;
      break;
    }
  }
  RestoreSnapshot(model, best_state);
}

}  // namespace

std::string_view StudentInitName(StudentInit init) {
  return init == StudentInit::kRandom ? "random" : "teacher_copy";
}

StudentInit ParseStudentInit(std::string_view token) {
  if (token == "random") return StudentInit::kRandom;
  if (token == "teacher_copy") return StudentInit::kTeacherCopy;
  Fail(ErrorKind::kConfig, "unknown student_init '" + std::string(token) + "'");
}

void TrainConfig::Validate() const {
  auto bad = [](const std::string& msg) { Fail(ErrorKind::kConfig, msg); };
  if (max_epochs < 1) bad("max_epochs must be >= 1");
  if (early_stop_patience < 1 || early_stop_patience >= max_epochs) {
    // A patience that can never trigger is allowed only for single-epoch runs.
    if (!(max_epochs == 1 && early_stop_patience >= 1)) {
      bad("early_stop_patience must be in [1, max_epochs)");
    }
  }
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) bad("learning_rate must be >= 0");
  if (!(weight_decay >= 0.0)) bad("weight_decay must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) bad("betas must be in [0,1)");
  if (!(adam_eps > 0)) bad("adam_eps must be positive");
  if (!(min_learning_rate >= 0 && min_learning_rate <= learning_rate)) {
    bad("min_learning_rate must be in [0, learning_rate]");
  }
}

nlohmann::ordered_json ToJson(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["max_epochs"] = c.max_epochs;
  j["early_stop_patience"] = c.early_stop_patience;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  j["min_learning_rate"] = c.min_learning_rate;
  j["seed"] = c.seed;
  j["student_init"] = StudentInitName(c.student_init);
  return j;
}

TrainConfig TrainConfigFromJson(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.min_learning_rate = j.value("min_learning_rate", c.min_learning_rate);
    c.seed = j.value("seed", c.seed);
    c.student_init = ParseStudentInit(j.value("student_init", std::string("random")));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, std::string("train config: ") + e.what());
  }
  c.Validate();
  return c;
}

double CosineLearningRate(const TrainConfig& c, int epoch) {
  return c.min_learning_rate +
         0.5 * (c.learning_rate - c.min_learning_rate) *
             (1.0 + std::cos(std::numbers::pi * epoch / c.max_epochs));
}

AdamW::AdamW(nn::Registry& registry, const TrainConfig& config)
    : registry_(registry), beta1_(config.beta1), beta2_(config.beta2),
      eps_(config.adam_eps), weight_decay_(config.weight_decay) {
  for (const auto& p : registry_.params) {
    m_.emplace_back(p.param->size(), 0.0f);
    v_.emplace_back(p.param->size(), 0.0f);
  }
}

void AdamW::Step(double lr) {
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (std::size_t k = 0; k < registry_.params.size(); ++k) {
    Param& p = *registry_.params[k].param;
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      double w = p.value[i];
      w -= lr * weight_decay_ * w;
      m[i] = static_cast<float>(beta1_ * m[i] + (1.0 - beta1_) * g);
      v[i] = static_cast<float>(beta2_ * v[i] + (1.0 - beta2_) * g * g);
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w -= lr * m_hat / (std::sqrt(v_hat) + eps_);
      p.value[i] = static_cast<float>(w);
    }
  }
}

nlohmann::ordered_json ToJson(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["dev_loss"] = r.dev_loss;
  j["dev_accuracy"] = r.dev_accuracy ? nlohmann::ordered_json(*r.dev_accuracy)
                                     : nlohmann::ordered_json(nullptr);
  j["learning_rate"] = r.learning_rate;
  return j;
}

void WriteTrainLog(const TrainLog& log, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& r : log.epochs) {
    auto j = ToJson(r);
    j["best"] = r.epoch == log.best_epoch;
    out << j.dump() << '\n';
  }
  WriteFile(path, out.str());
}

SegmentDataset LoadSegments(const Manifest& manifest, const FeatureSource& features,
                            const std::function<int(const ManifestEntry&)>& target_of,
                            const TrainOptions& options) {
  const std::size_t n = manifest.entries.size();
  std::vector<std::vector<MelSpectrogram>> per_entry(n);
  for (const auto& e : manifest.entries) {
    if (options.on_read) options.on_read(e);
  }
  ParallelFor(n, options.workers, [&](std::size_t i) {
    per_entry[i] = features.Load(manifest.Resolve(manifest.entries[i]));
  });
  SegmentDataset data;
  for (std::size_t i = 0; i < n; ++i) {
    const int target = target_of(manifest.entries[i]);
    for (auto& mel : per_entry[i]) {
      data.mels.push_back(std::move(mel.values));
      data.targets.push_back(target);
    }
  }
  return data;
}

TrainResult TrainTeacher(const Manifest& train, const Manifest& dev,
                         BackboneConfig backbone, const FrontendConfig& frontend,
                         const TrainConfig& config, const TrainOptions& options) {
  config.Validate();
  RequireRealOnly(train, "teacher training (train)");
  RequireRealOnly(dev, "teacher training (dev)");

  std::map<std::string, int> speakers;
  for (const auto& e : train.entries) speakers.emplace(e.speaker_id, 0);
  int next = 0;
  for (auto& [id, index] : speakers) index = next++;
  for (const auto& e : dev.entries) {
    if (!speakers.contains(e.speaker_id)) {
      Fail(ErrorKind::kLabelSpace,
           "dev speaker '" + e.speaker_id + "' does not appear in the training set");
    }
  }
  backbone.n_classes = static_cast<int>(speakers.size());

  FeatureSource features(frontend);
  auto target = [&speakers](const ManifestEntry& e) { return speakers.at(e.speaker_id); };
  const SegmentDataset train_data = LoadSegments(train, features, target, options);
  const SegmentDataset dev_data = LoadSegments(dev, features, target, options);

  TrainResult result;
  result.model = std::make_unique<Backbone>(backbone, frontend, Role::kTeacher, config.seed);
  Backbone& model = *result.model;
  AdamW optimizer(model.registry(), config);
  std::mt19937_64 rng(config.seed + 1);

  auto train_epoch = [&](double lr) {
    std::vector<std::size_t> idx = Iota(train_data.size());
    ShuffleIndices(idx, rng);
    double total = 0.0;
    for (std::size_t b = 0; b < idx.size(); b += config.batch_size) {
      const std::size_t e = std::min(idx.size(), b + config.batch_size);
      std::vector<int> targets;
      for (std::size_t k = b; k < e; ++k) targets.push_back(train_data.targets[idx[k]]);
      model.ZeroGrad();
      const PyramidBatch out = model.Forward(Batch(train_data, idx, b, e), true);
      Tensor grad;
      total += CrossEntropy(out.logits, targets, &grad, nullptr);
      model.Backward(&grad, {nullptr, nullptr, nullptr});
      optimizer.Step(lr);
    }
    return total / static_cast<double>(idx.size());
  };
  auto dev_eval = [&] { return TeacherDev(model, dev_data, config.batch_size); };
  RunEpochs(model, train_data, config, options, train_epoch, dev_eval, result.log);

  result.metadata = LogSummary(result.log, config);
  result.metadata["trainer"] = "teacher";
  auto ids = nlohmann::ordered_json::array();
  for (const auto& [id, index] : speakers) ids.push_back(id);
  result.metadata["speakers"] = std::move(ids);
  return result;
}

double DatasetFpmLoss(const Backbone& teacher, const Backbone& student,
                      const SegmentDataset& data, int batch_size) {
  const auto idx = Iota(data.size());
  double total = 0.0;
  for (std::size_t b = 0; b < data.size(); b += batch_size) {
    const std::size_t e = std::min(data.size(), b + batch_size);
    const Tensor x = Batch(data, idx, b, e);
    const PyramidBatch t = teacher.Infer(x, false);
    const PyramidBatch s = student.Infer(x, false);
    for (double v : FpmLossPerSample(t.maps, s.maps)) total += v;
  }
  return total / static_cast<double>(data.size());
}

TrainResult TrainStudent(const Backbone& teacher, const Manifest& train,
                         const Manifest& dev, const TrainConfig& config,
                         const TrainOptions& options,
                         std::optional<BackboneConfig> student_config) {
  config.Validate();
  if (teacher.role() != Role::kTeacher) {
    Fail(ErrorKind::kRole, "student training needs a teacher checkpoint");
  }
  RequireRealOnly(train, "student training (train)");
  RequireRealOnly(dev, "student training (dev)");

  BackboneConfig scfg = teacher.config();
  scfg.n_classes = 0;
  if (student_config) {
    if (!student_config->SameTopology(teacher.config())) {
      Fail(ErrorKind::kConfig, "student topology does not match the teacher");
    }
    scfg = *student_config;
    scfg.n_classes = 0;
  }

  FeatureSource features(teacher.frontend());
  auto no_target = [](const ManifestEntry&) { return -1; };
  const SegmentDataset train_data = LoadSegments(train, features, no_target, options);
  const SegmentDataset dev_data = LoadSegments(dev, features, no_target, options);

  TrainResult result;
  result.model = std::make_unique<Backbone>(scfg, teacher.frontend(), Role::kStudent,
                                            config.seed);
  Backbone& student = *result.model;
  if (config.student_init == StudentInit::kTeacherCopy) {
    student.CopyFeatureWeightsFrom(teacher);
  }
  result.log.initial_dev_loss =
      DatasetFpmLoss(teacher, student, dev_data, config.batch_size);

  AdamW optimizer(student.registry(), config);
  std::mt19937_64 rng(config.seed + 1);
  auto train_epoch = [&](double lr) {
    std::vector<std::size_t> idx = Iota(train_data.size());
    ShuffleIndices(idx, rng);
    double total = 0.0;
    for (std::size_t b = 0; b < idx.size(); b += config.batch_size) {
      const std::size_t e = std::min(idx.size(), b + config.batch_size);
      const Tensor x = Batch(train_data, idx, b, e);
      const PyramidBatch t = teacher.Infer(x, false);
      student.ZeroGrad();
      const PyramidBatch s = student.Forward(x, false);
      std::array<Tensor, 3> grads;
      total += FpmLossBatch(t.maps, s.maps, &grads) * static_cast<double>(e - b);
      student.Backward(nullptr, {&grads[0], &grads[1], &grads[2]});
      optimizer.Step(lr);
    }
    return total / static_cast<double>(idx.size());
  };
  auto dev_eval = [&] {
    return DevResult{DatasetFpmLoss(teacher, student, dev_data, config.batch_size), {}};
  };
  RunEpochs(student, train_data, config, options, train_epoch, dev_eval, result.log);

  result.metadata = LogSummary(result.log, config);
  result.metadata["trainer"] = "student";
  result.metadata["init"] = StudentInitName(config.student_init);
  result.metadata["initial_dev_loss"] = *result.log.initial_dev_loss;
  result.metadata["teacher_digest"] = teacher.WeightDigest();
  return result;
}

}  // namespace fpm_spoof
