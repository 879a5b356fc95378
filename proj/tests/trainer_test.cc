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

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "epsb/applications.h"
#include "epsb/error.h"
#include "epsb/synth.h"
#include "epsb/trainer.h"
#include "test_util.h"

namespace epsb {
namespace {

using testing::ReadFile;
using testing::ScratchDir;

std::vector<TrainingExample> Fixture(const std::string& dir, bool identity, Split split) {
  SynthSpec spec;
  spec.train_images = 2;
  spec.test_images = 1;
  spec.height = 32;
  spec.width = 32;
  spec.seed = 3;
  spec.identity = identity;
  spec.plan = VotePlan::kPlanted;
  GenerateSynthetic(spec, dir);
  return LoadExamples(LoadAndValidate(dir + "/manifest.json"), split);
}

TrainConfig ShortConfig(int steps) {
  TrainConfig c = TrainConfig::VdcnnMini();
  c.patch_size = 16;
  c.batch_size = 2;
  c.max_steps = steps;
  c.log_interval = 5;
  c.validation_interval = 10;
  c.convergence = {5, 10, 0.005, 0.8};
  return c;
}

int CountEvents(const std::vector<nlohmann::json>& log, const std::string& event) {
  int n = 0;
  for (const auto& r : log) n += r.at("event") == event;
  return n;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("convergence monitor follows the moving-average rule") {
  ConvergenceMonitor m({2, 3, 0.1, 0.8});
  CHECK_FALSE(m.Add(10));
  CHECK_FALSE(m.Add(10));
  CHECK(m.MovingAverage(2) == 10);
  CHECK_FALSE(m.Add(4));
  CHECK(m.MovingAverage(2) == 7);
  CHECK(m.MovingAverageAt(2, 2) == 10);
  CHECK_FALSE(m.Add(4));
  CHECK_FALSE(m.Add(4));
  // average(last 2) = 4, three steps earlier it was 7.
  CHECK_FALSE(m.Add(4));
  // 4 versus 4: relative improvement 0 < 0.1.
  CHECK(m.Add(4));
  m.Reset();
  CHECK(m.steps() == 0);
  CHECK_FALSE(m.Add(1));
}

TEST_CASE("monitor does not fire while the loss keeps falling") {
  ConvergenceMonitor m({10, 20, 0.005, 0.8});
  double loss = 1.0;
  for (int i = 0; i < 500; ++i) {
    CHECK_FALSE(m.Add(loss));
    loss *= 0.99;
  }
}

TEST_CASE("train config round trips through json") {
  TrainConfig c = TrainConfig::ResnetMini();
  c.seed = 99;
  c.loss = LossKind::kL2;
  c.clip_grad_norm = 2.5;
  c.wall_clock = true;
  const TrainConfig back = TrainConfigFromJson(TrainConfigToJson(c));
  CHECK(TrainConfigToJson(back) == TrainConfigToJson(c));
  const TrainConfig partial = TrainConfigFromJson({{"seed", 5}}, TrainConfig::Vdcnn());
  CHECK(partial.seed == 5);
  CHECK(partial.patch_size == 41);
  CHECK(partial.batch_size == 64);
  CHECK(TrainPreset("resnet").patch_size == 96);
  CHECK(TrainPreset("resnet").batch_size == 16);
  CHECK_THROWS_AS(TrainPreset("unet"), Error);
}

TEST_CASE("presets carry the baseline training settings") {
  const TrainConfig v = TrainConfig::Vdcnn();
  CHECK(v.adam.lr == 1e-3);
  CHECK(v.decay_factor == 10.0);
  CHECK(v.patch_size == static_cast<size_t>(BuildModel(v.model).ReceptiveField()));
  CHECK_NOTHROW(v.Validate());
  TrainConfig bad = v;
  bad.patch_size = 40;
  CHECK_THROWS_AS(bad.Validate(), Error);
  bad = v;
  bad.lambda_nb = -1;
  CHECK_THROWS_AS(bad.Validate(), Error);
}

TEST_CASE("short training is deterministic") {
  ScratchDir dir("train_det");
  const auto train = Fixture(dir / "data", false, Split::kTrain);
  const auto val = Fixture(dir / "data", false, Split::kTest);
  const TrainConfig c = ShortConfig(20);
  const TrainResult a = Train(train, val, c, {dir / "a.ckpt", dir / "a.jsonl"});
  const TrainResult b = Train(train, val, c, {dir / "b.ckpt", dir / "b.jsonl"});
  CHECK(ReadFile(dir / "a.ckpt") == ReadFile(dir / "b.ckpt"));
  CHECK(ReadFile(dir / "a.jsonl") == ReadFile(dir / "b.jsonl"));
  CHECK(a.steps == 20);
  CHECK(a.log.front().at("event") == "config");
  CHECK(a.log.back().at("event") == "end");
  CHECK(CountEvents(a.log, "lr_decay") == 1);
  CHECK(a.final_lr == doctest::Approx(1e-4));
  TrainingMetadata meta;
  LoadCheckpoint(dir / "a.ckpt", &meta);
  CHECK(meta.step == 20);
}

TEST_CASE("decay falls back to the deadline") {
  ScratchDir dir("train_deadline");
  const auto train = Fixture(dir / "data", false, Split::kTrain);
  TrainConfig c = ShortConfig(20);
  c.convergence = {1000, 2000, 0.005, 0.5};
  const TrainResult r = Train(train, {}, c);
  CHECK(r.decay_step == 10);
  CHECK(r.decay_reason == "deadline");
  CHECK(CountEvents(r.log, "lr_decay") == 1);
}

TEST_CASE("non-finite loss aborts with the last good parameters saved") {
  ScratchDir dir("train_nan");
  auto train = Fixture(dir / "data", false, Split::kTrain);
  for (auto& ex : train) ex.source.data.assign(ex.source.data.size(),
                                               std::numeric_limits<double>::quiet_NaN());
  const TrainConfig c = ShortConfig(5);
  CHECK_THROWS_AS(Train(train, {}, c, {dir / "nan.ckpt", dir / "nan.jsonl"}), Error);
  try {
    Train(train, {}, c, {dir / "nan.ckpt", dir / "nan.jsonl"});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
  }
  Model saved = LoadCheckpoint(dir / "nan.ckpt");
  for (const NamedParam& p : saved.parameters()) {
    for (size_t i = 0; i < p.var.value().size(); ++i) {
      REQUIRE(std::isfinite(p.var.value()[i]));
    }
  }
  CHECK(ReadFile(dir / "nan.jsonl").find("\"abort\"") != std::string::npos);
}

TEST_CASE("non-finite target loss is reported as a loss failure") {
  ScratchDir dir("train_nan_target");
  auto train = Fixture(dir / "data", false, Split::kTrain);
  for (auto& ex : train) {
    for (Image& t : ex.gts.targets) {
      t.data.assign(t.data.size(), std::numeric_limits<double>::infinity());
    }
  }
  CHECK_THROWS_WITH_AS(Train(train, {}, ShortConfig(5), {dir / "inf.ckpt", ""}),
                       doctest::Contains("non-finite loss at step 1"), Error);
  TrainingMetadata meta;
  LoadCheckpoint(dir / "inf.ckpt", &meta);
  CHECK(meta.step == 0);
}

TEST_CASE("identity fixture trains to near-zero error") {
  ScratchDir dir("train_identity");
  const auto train = Fixture(dir / "data", true, Split::kTrain);
  TrainConfig c = TrainConfig::ResnetMini();
  c.patch_size = 32;
  c.max_steps = 200;
  c.validation_interval = 1000;
  TrainResult r = Train(train, {}, c);
  const WeightedErrors trained = EvaluateExamples(r.model, train);
  CHECK(trained.wmae < 1.0);
  Model random = BuildModel(c.model, c.seed);
  CHECK(EvaluateExamples(random, train).wmae >= trained.wmae);
  CHECK(EvaluateExamples(r.model, train).wmae == trained.wmae);
}

TEST_CASE("empty split cannot be evaluated") {
  ScratchDir dir("eval_empty");
  SynthSpec spec;
  spec.train_images = 1;
  spec.test_images = 0;
  spec.height = spec.width = 16;
  GenerateSynthetic(spec, dir.path());
  const Dataset ds = LoadAndValidate(dir / "manifest.json");
  Model m = BuildModel(ModelSpec::VdcnnMini());
  CHECK_THROWS_AS(EvaluateSplit(m, ds, Split::kTest), Error);
  CHECK(EvaluateSplit(m, ds, Split::kTrain).wmae > 0);
}

TEST_CASE("no-op smoother reports near-zero time") {
  const std::vector<Image> images(8, Image(32, 32));
  const double t = TimeIt([](const Image& im) { return im; }, images, 2);
  CHECK(t >= 0);
  CHECK(t < 1e-3);
}

TEST_CASE("repeated timing is stable") {
  std::vector<Image> images;
  for (int i = 0; i < 4; ++i) images.push_back(LowLightScene(64, 64, 0.5));
  const Smoother work = [](const Image& im) { return BilateralSmooth(im, 2.0, 0.1); };
  std::vector<double> runs;
  for (int i = 0; i < 5; ++i) runs.push_back(TimeIt(work, images, 1));
  double mean = 0;
  for (double r : runs) mean += r / runs.size();
  double var = 0;
  for (double r : runs) var += (r - mean) * (r - mean) / runs.size();
  CHECK(std::sqrt(var) / mean < 0.2);
}

TEST_CASE("timing table matches the golden layout") {
  const std::vector<TimingRow> rows = {
      {"SD filter", 10.46}, {"L0 smoothing", 1.24},   {"FGS", 0.05},
      {"Tree Filtering", 0.18}, {"WMF", 0.52},        {"L1 smoothing", 328.0},
      {"LLF", 199.0},       {"VDCNN", 0.41},          {"ResNet", 0.78}};
  CHECK(FormatTimingTable(rows) ==
        ReadFile(std::string(EPSB_GOLDEN_DIR) + "/timing.txt"));
  const nlohmann::json j = TimingRowsToJson(rows);
  REQUIRE(j.size() == 9);
}

}  // TEST_SUITE

}  // namespace epsb
