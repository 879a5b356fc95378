// Copyright 2026 The EPSBench Authors.
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

// Patch-based training with a single convergence-triggered lr decay,
// split evaluation and wall-clock timing.

#ifndef EPSB_TRAINER_H_
#define EPSB_TRAINER_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "epsb/dataset.h"
#include "epsb/losses.h"
#include "epsb/metrics.h"
#include "epsb/models.h"
#include "json.hpp"

namespace epsb {

// Convergence: the moving average of the last `average_window` training
// losses improved by less than `threshold` (relative) over the last
// `improvement_window` steps. If the first convergence has not fired by
// `decay_deadline` x max_steps, the decay is applied there instead.
struct ConvergenceSpec {
  int average_window = 1000;
  int improvement_window = 2000;
  double threshold = 0.005;
  double decay_deadline = 0.8;
};

struct TrainConfig {
  ModelSpec model = ModelSpec::Resnet();
  size_t patch_size = 96;
  size_t batch_size = 16;
  AdamOptions adam;  // adam.lr is the initial rate
  double decay_factor = 10.0;
  ConvergenceSpec convergence;
  int max_steps = 200000;
  uint64_t seed = 1;
  LossKind loss = LossKind::kL1Neighborhood;
  double lambda_nb = 1.0;
  LossNormalization normalization = LossNormalization::kPerPixel;
  double clip_grad_norm = 0.0;  // 0 disables
  int log_interval = 100;
  int validation_interval = 1000;
  bool wall_clock = false;  // adds elapsed seconds to log records

  static TrainConfig Vdcnn();       // 41 x 41 patches, batch 64
  static TrainConfig Resnet();      // 96 x 96 patches, batch 16
  static TrainConfig ResnetMini();  // desk-scale overfit preset
  static TrainConfig VdcnnMini();

  // Throws kArgument on an unusable configuration.
  void Validate() const;
};

TrainConfig TrainPreset(const std::string& name);
nlohmann::json TrainConfigToJson(const TrainConfig& config);
// Missing keys keep the values of `base`.
TrainConfig TrainConfigFromJson(const nlohmann::json& j,
                                const TrainConfig& base = {});
TrainConfig ReadTrainConfig(const std::string& path);

// Tracks the moving-average loss and reports convergence.
class ConvergenceMonitor {
 public:
  explicit ConvergenceMonitor(const ConvergenceSpec& spec) : spec_(spec) {}
  // Returns true once the criterion holds.
  bool Add(double loss);
  void Reset();
  size_t steps() const { return losses_.size(); }
  // Mean of the last `n` losses (n <= steps()).
  double MovingAverage(size_t n) const;
  double MovingAverageAt(size_t end, size_t n) const;

 private:
  ConvergenceSpec spec_;
  std::vector<double> losses_;
  std::vector<double> prefix_{0.0};
};

struct TrainResult {
  explicit TrainResult(Model m) : model(std::move(m)) {}

  Model model;
  int steps = 0;
  int decay_step = -1;
  std::string decay_reason;
  double final_lr = 0;
  std::string end_reason;  // "converged" or "max_steps"
  std::vector<nlohmann::json> log;
};

struct TrainOutputs {
  std::string checkpoint;  // empty: do not write
  std::string log;         // JSONL; empty: keep in memory only
};

// Throws kNumeric on a non-finite loss after restoring and (if requested)
// saving the last parameters that produced a finite loss.
TrainResult Train(std::span<const TrainingExample> train,
                  std::span<const TrainingExample> validation,
                  const TrainConfig& config, const TrainOutputs& outputs = {});
TrainResult Train(const Dataset& dataset, const TrainConfig& config,
                  const TrainOutputs& outputs = {});

WeightedErrors EvaluateExamples(Model& model,
                                std::span<const TrainingExample> examples,
                                PoolingMode mode = PoolingMode::kPerEntry);
WeightedErrors EvaluateSplit(Model& model, const Dataset& dataset, Split split,
                             PoolingMode mode = PoolingMode::kPerEntry);

using Smoother = std::function<Image(const Image&)>;

// Mean wall-clock seconds per image; `warmup` leading calls are excluded.
double TimeIt(const Smoother& smoother, std::span<const Image> images,
              int warmup = 1);

struct TimingRow {
  std::string method;
  double seconds = 0;
};

// "Method | Run time (s)" with the fastest three marked.
std::string FormatTimingTable(std::span<const TimingRow> rows);
nlohmann::json TimingRowsToJson(std::span<const TimingRow> rows);

}  // namespace epsb

#endif  // EPSB_TRAINER_H_
