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

#include "epsb/trainer.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "epsb/error.h"

namespace epsb {
namespace {

using Clock = std::chrono::steady_clock;

const char* NormalizationName(LossNormalization n) {
  return n == LossNormalization::kSum ? "sum" : "per_pixel";
}

LossNormalization ParseNormalization(const std::string& s) {
  if (s == "sum") return LossNormalization::kSum;
  if (s == "per_pixel") return LossNormalization::kPerPixel;
  Fail(ErrorKind::kArgument, "unknown loss normalization '" + s + "'");
}

ModelSpec ModelFromJson(const nlohmann::json& j) {
  if (!j.is_string()) return ModelSpecFromJson(j);
  const std::string name = j;
  if (name == "vdcnn") return ModelSpec::Vdcnn();
  if (name == "resnet") return ModelSpec::Resnet();
  if (name == "vdcnn-mini") return ModelSpec::VdcnnMini();
  if (name == "resnet-mini") return ModelSpec::ResnetMini();
  Fail(ErrorKind::kArgument, "unknown model preset '" + name + "'");
}

// Parameter and running-statistic copies used to roll back a bad step.
struct Snapshot {
  std::vector<Tensor> params;
  std::vector<BatchNormState> norms;

  void Take(const Model& model) {
    params.resize(model.parameters().size());
    for (size_t i = 0; i < params.size(); ++i) {
      params[i] = model.parameters()[i].var.value();
    }
    norms.resize(model.norm_layers().size());
    for (size_t i = 0; i < norms.size(); ++i) norms[i] = model.norm_layers()[i].state;
  }
  void Restore(Model& model) const {
    for (size_t i = 0; i < params.size(); ++i) {
      model.parameters()[i].var.mutable_value() = params[i];
    }
    for (size_t i = 0; i < norms.size(); ++i) model.norm_layers()[i].state = norms[i];
  }
};

bool GradientsFinite(const Model& model) {
  for (const NamedParam& p : model.parameters()) {
    if (!p.var.grad().AllFinite()) return false;
  }
  return true;
}

void ClipGradients(Model& model, double max_norm) {
  double sq = 0;
  for (NamedParam& p : model.parameters()) {
    for (Real g : p.var.grad().data()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm)) return;
  const Real scale = static_cast<Real>(max_norm / norm);
  for (NamedParam& p : model.parameters()) {
    if (p.var.grad().empty()) continue;
    for (Real& g : p.var.mutable_grad().data()) g *= scale;
  }
}

class LogWriter {
 public:
  LogWriter(const std::string& path, std::vector<nlohmann::json>& sink)
      : sink_(sink) {
    if (!path.empty()) {
      out_.open(path, std::ios::trunc);
      if (!out_) Fail(ErrorKind::kIo, "cannot write training log " + path);
    }
  }
  void Write(nlohmann::json record) {
    if (out_.is_open()) {
      out_ << record.dump() << '\n';
      out_.flush();
    }
    sink_.push_back(std::move(record));
  }

 private:
  std::vector<nlohmann::json>& sink_;
  std::ofstream out_;
};

}  // namespace

TrainConfig TrainConfig::Vdcnn() {
  TrainConfig c;
  c.model = ModelSpec::Vdcnn();
  c.patch_size = 41;
  c.batch_size = 64;
  return c;
}

TrainConfig TrainConfig::Resnet() { return TrainConfig(); }

TrainConfig TrainConfig::ResnetMini() {
  TrainConfig c;
  c.model = ModelSpec::ResnetMini();
  c.patch_size = 48;
  c.batch_size = 4;
  c.convergence = {250, 500, 0.005, 0.8};
  c.max_steps = 5000;
  c.log_interval = 50;
  c.validation_interval = 500;
  return c;
}

TrainConfig TrainConfig::VdcnnMini() {
  TrainConfig c = ResnetMini();
  c.model = ModelSpec::VdcnnMini();
  return c;
}

TrainConfig TrainPreset(const std::string& name) {
  if (name == "vdcnn") return TrainConfig::Vdcnn();
  if (name == "resnet") return TrainConfig::Resnet();
  if (name == "vdcnn-mini") return TrainConfig::VdcnnMini();
  if (name == "resnet-mini") return TrainConfig::ResnetMini();
  Fail(ErrorKind::kArgument, "unknown training preset '" + name +
                                 "' (expected vdcnn, resnet, vdcnn-mini or resnet-mini)");
}

void TrainConfig::Validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) Fail(ErrorKind::kArgument, "invalid training config: " + what);
  };
  require(batch_size > 0, "batch_size must be positive");
  require(adam.lr >= 0, "lr must be non-negative");
  require(decay_factor > 0, "decay_factor must be positive");
  require(max_steps > 0, "max_steps must be positive");
  require(lambda_nb >= 0, "lambda_nb must be non-negative");
  require(clip_grad_norm >= 0, "clip_grad_norm must be non-negative");
  require(log_interval > 0, "log_interval must be positive");
  require(validation_interval > 0, "validation_interval must be positive");
  require(convergence.average_window > 0 && convergence.improvement_window > 0,
          "convergence windows must be positive");
  require(convergence.decay_deadline >= 0 && convergence.decay_deadline <= 1,
          "decay_deadline must lie in [0, 1]");
  const int rf = 1 + 2 * (model.architecture == Architecture::kVdcnn
                              ? model.conv_layers
                              : 2 * model.residual_blocks + model.tail_convs + 3);
  require(patch_size >= static_cast<size_t>(rf),
          "patch_size " + std::to_string(patch_size) +
              " is below the receptive field " + std::to_string(rf));
}

nlohmann::json TrainConfigToJson(const TrainConfig& c) {
  return {{"model", ModelSpecToJson(c.model)},
          {"patch_size", c.patch_size},
          {"batch_size", c.batch_size},
          {"lr", c.adam.lr},
          {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
          {"decay_factor", c.decay_factor},
          {"convergence",
           {{"average_window", c.convergence.average_window},
            {"improvement_window", c.convergence.improvement_window},
            {"threshold", c.convergence.threshold},
            {"decay_deadline", c.convergence.decay_deadline}}},
          {"max_steps", c.max_steps},
          {"seed", c.seed},
          {"loss", LossKindName(c.loss)},
          {"lambda_nb", c.lambda_nb},
          {"normalization", NormalizationName(c.normalization)},
          {"clip_grad_norm", c.clip_grad_norm},
          {"log_interval", c.log_interval},
          {"validation_interval", c.validation_interval},
          {"wall_clock", c.wall_clock}};
}

TrainConfig TrainConfigFromJson(const nlohmann::json& j, const TrainConfig& base) {
  TrainConfig c = base;
  try {
    if (j.contains("preset")) c = TrainPreset(j["preset"]);
    if (j.contains("model")) c.model = ModelFromJson(j["model"]);
    c.patch_size = j.value("patch_size", c.patch_size);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.adam.lr = j.value("lr", c.adam.lr);
    if (j.contains("adam")) {
      const auto& a = j["adam"];
      c.adam.beta1 = a.value("beta1", c.adam.beta1);
      c.adam.beta2 = a.value("beta2", c.adam.beta2);
      c.adam.eps = a.value("eps", c.adam.eps);
    }
    c.decay_factor = j.value("decay_factor", c.decay_factor);
    if (j.contains("convergence")) {
      const auto& v = j["convergence"];
      c.convergence.average_window = v.value("average_window", c.convergence.average_window);
      c.convergence.improvement_window =
          v.value("improvement_window", c.convergence.improvement_window);
      c.convergence.threshold = v.value("threshold", c.convergence.threshold);
      c.convergence.decay_deadline = v.value("decay_deadline", c.convergence.decay_deadline);
    }
    c.max_steps = j.value("max_steps", c.max_steps);
    c.seed = j.value("seed", c.seed);
    if (j.contains("loss")) c.loss = ParseLossKind(j["loss"]);
    c.lambda_nb = j.value("lambda_nb", c.lambda_nb);
    if (j.contains("normalization")) c.normalization = ParseNormalization(j["normalization"]);
    c.clip_grad_norm = j.value("clip_grad_norm", c.clip_grad_norm);
    c.log_interval = j.value("log_interval", c.log_interval);
    c.validation_interval = j.value("validation_interval", c.validation_interval);
    c.wall_clock = j.value("wall_clock", c.wall_clock);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, std::string("malformed training config: ") + e.what());
  }
  return c;
}

TrainConfig ReadTrainConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kNotFound, "cannot open training config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, "training config " + path + " is not valid JSON: " + e.what());
  }
  return TrainConfigFromJson(j);
}

bool ConvergenceMonitor::Add(double loss) {
  losses_.push_back(loss);
  prefix_.push_back(prefix_.back() + loss);
  const size_t w = static_cast<size_t>(spec_.average_window);
  const size_t d = static_cast<size_t>(spec_.improvement_window);
  const size_t n = losses_.size();
  if (n < w + d) return false;
  const double before = MovingAverageAt(n - d, w);
  const double now = MovingAverageAt(n, w);
  if (!(before > 0)) return true;
  return (before - now) / before < spec_.threshold;
}

void ConvergenceMonitor::Reset() {
  losses_.clear();
  prefix_.assign(1, 0.0);
}

double ConvergenceMonitor::MovingAverage(size_t n) const {
  return MovingAverageAt(losses_.size(), n);
}

double ConvergenceMonitor::MovingAverageAt(size_t end, size_t n) const {
  n = std::min(n, end);
  if (n == 0) return 0;
  return (prefix_[end] - prefix_[end - n]) / static_cast<double>(n);
}

TrainResult Train(std::span<const TrainingExample> train,
                  std::span<const TrainingExample> validation,
                  const TrainConfig& config, const TrainOutputs& outputs) {
  config.Validate();
  if (train.empty()) Fail(ErrorKind::kValidation, "training split is empty");

  TrainResult result(BuildModel(config.model, config.seed));
  Model& model = result.model;
  LogWriter log(outputs.log, result.log);
  std::mt19937_64 rng(config.seed);
  AdamState adam{config.adam, {}, {}, 0};
  ConvergenceMonitor monitor(config.convergence);
  Snapshot good;
  const auto start = Clock::now();
  const int deadline =
      config.convergence.decay_deadline > 0
          ? static_cast<int>(config.convergence.decay_deadline * config.max_steps)
          : config.max_steps + 1;
  const double pixels =
      static_cast<double>(config.batch_size * config.patch_size * config.patch_size);

  std::ostringstream criterion;
  criterion << "relative improvement of the " << config.convergence.average_window
            << "-step moving-average loss < " << config.convergence.threshold
            << " over " << config.convergence.improvement_window
            << " steps; decay forced at step " << deadline
            << " if not yet converged";
  log.Write({{"event", "config"},
             {"config", TrainConfigToJson(config)},
             {"convergence", criterion.str()},
             {"train_images", train.size()},
             {"validation_images", validation.size()}});

  auto save = [&](int step) {
    if (!outputs.checkpoint.empty()) {
      SaveCheckpoint(model, outputs.checkpoint,
                     {static_cast<uint64_t>(step), adam.options.lr}, &adam);
    }
  };
  auto abort = [&](int step, const std::string& reason, int restored_step) {
    save(restored_step);
    log.Write({{"event", "abort"},
               {"step", step},
               {"reason", reason},
               {"restored_step", restored_step}});
    Fail(ErrorKind::kNumeric,
         reason + " at step " + std::to_string(step) +
             (outputs.checkpoint.empty()
                  ? std::string("; parameters restored")
                  : "; last good parameters saved to " + outputs.checkpoint));
  };
  auto elapsed = [&] {
    return std::chrono::duration<double>(Clock::now() - start).count();
  };

  result.end_reason = "max_steps";
  int step = 0;
  while (step < config.max_steps) {
    ++step;
    PatchBatch batch = SamplePatches(train, config.patch_size, config.batch_size, rng);
    model.ZeroGrad();
    Var out = model.Forward(Var(std::move(batch.sources)), NormMode::kTrain);
    Var loss = ComputeLoss(config.loss, out, batch.targets, config.lambda_nb,
                           config.normalization);
    const double value = loss.value()[0];
    if (!std::isfinite(value)) {
      // The snapshot holds the parameters that produced the last finite loss.
      if (step > 1) good.Restore(model);
      abort(step, "non-finite loss", std::max(step - 2, 0));
    }
    good.Take(model);
    Backward(loss);
    if (!GradientsFinite(model)) abort(step, "non-finite gradient", step - 1);
    if (config.clip_grad_norm > 0) ClipGradients(model, config.clip_grad_norm);
    const std::vector<ParamRef> refs = model.ParamRefs();
    AdamStep(refs, adam);

    const bool converged = monitor.Add(value);
    const bool log_now = step % config.log_interval == 0 || step == config.max_steps;
    if (log_now) {
      const bool per_pixel = config.normalization == LossNormalization::kPerPixel;
      nlohmann::json rec = {{"event", "step"},
                            {"step", step},
                            {"loss", per_pixel ? value * pixels : value},
                            {"loss_normalized", per_pixel ? value : value / pixels},
                            {"loss_ma", monitor.MovingAverage(
                                            config.convergence.average_window)},
                            {"lr", adam.options.lr}};
      if (!validation.empty() &&
          (step % config.validation_interval == 0 || step == config.max_steps)) {
        const WeightedErrors v = EvaluateExamples(model, validation);
        rec["val_wmae"] = v.wmae;
        rec["val_wrmse"] = v.wrmse;
      }
      if (config.wall_clock) rec["elapsed_s"] = elapsed();
      log.Write(rec);
    }

    if (result.decay_step < 0 && (converged || step >= deadline)) {
      const double from = adam.options.lr;
      adam.options.lr = from / config.decay_factor;
      result.decay_step = step;
      result.decay_reason = converged ? "converged" : "deadline";
      log.Write({{"event", "lr_decay"},
                 {"step", step},
                 {"from", from},
                 {"to", adam.options.lr},
                 {"reason", result.decay_reason}});
      monitor.Reset();
    } else if (result.decay_step >= 0 && converged) {
      result.end_reason = "converged";
      break;
    }
  }

  result.steps = step;
  result.final_lr = adam.options.lr;
  nlohmann::json end = {{"event", "end"},
                        {"step", step},
                        {"reason", result.end_reason},
                        {"lr", adam.options.lr},
                        {"decay_step", result.decay_step}};
  if (config.wall_clock) end["elapsed_s"] = elapsed();
  log.Write(end);
  save(step);
  return result;
}

TrainResult Train(const Dataset& dataset, const TrainConfig& config,
                  const TrainOutputs& outputs) {
  if (dataset.SplitIds(Split::kTrain).empty()) {
    Fail(ErrorKind::kValidation, "training split is empty");
  }
  const std::vector<TrainingExample> train = LoadExamples(dataset, Split::kTrain);
  const std::vector<TrainingExample> val = LoadExamples(dataset, Split::kTest);
  return Train(train, val, config, outputs);
}

WeightedErrors EvaluateExamples(Model& model,
                                std::span<const TrainingExample> examples,
                                PoolingMode mode) {
  if (examples.empty()) Fail(ErrorKind::kValidation, "evaluation split is empty");
  std::vector<Image> outputs;
  std::vector<GroundTruthSet> gts;
  for (const TrainingExample& ex : examples) {
    outputs.push_back(Infer(model, ex.source));
    gts.push_back(ex.gts);
  }
  return ComputeWeightedErrors(outputs, gts, mode);
}

WeightedErrors EvaluateSplit(Model& model, const Dataset& dataset, Split split,
                             PoolingMode mode) {
  if (dataset.SplitIds(split).empty()) {
    Fail(ErrorKind::kValidation, std::string(SplitName(split)) + " split is empty");
  }
  return EvaluateExamples(model, LoadExamples(dataset, split), mode);
}

double TimeIt(const Smoother& smoother, std::span<const Image> images, int warmup) {
  if (images.empty()) return 0;
  for (int i = 0; i < warmup; ++i) smoother(images[i % images.size()]);
  double total = 0;
  for (const Image& img : images) {
    const auto t0 = Clock::now();
    const Image out = smoother(img);
    total += std::chrono::duration<double>(Clock::now() - t0).count();
    (void)out;
  }
  return total / static_cast<double>(images.size());
}

std::string FormatTimingTable(std::span<const TimingRow> rows) {
  size_t width = 6;
  std::vector<double> seconds;
  for (const TimingRow& r : rows) {
    width = std::max(width, r.method.size());
    seconds.push_back(r.seconds);
  }
  const std::vector<int> ranks = RankMarkers(seconds);
  auto pad = [&](const std::string& s) {
    return s + std::string(width > s.size() ? width - s.size() : 0, ' ');
  };
  std::ostringstream os;
  os << pad("Method") << " | Run time (s)\n";
  os << std::string(width + 1, '-') << '+' << std::string(13, '-') << '\n';
  for (size_t i = 0; i < rows.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", rows[i].seconds);
    os << pad(rows[i].method) << " | " << buf << RankMarker(ranks[i]) << '\n';
  }
  return os.str();
}

nlohmann::json TimingRowsToJson(std::span<const TimingRow> rows) {
  std::vector<double> seconds;
  for (const TimingRow& r : rows) seconds.push_back(r.seconds);
  const std::vector<int> ranks = RankMarkers(seconds);
  nlohmann::json out = nlohmann::json::array();
  for (size_t i = 0; i < rows.size(); ++i) {
    out.push_back({{"method", rows[i].method},
                   {"seconds", rows[i].seconds},
                   {"rank", ranks[i]}});
  }
  return out;
}

}  // namespace epsb
