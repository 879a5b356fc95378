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

// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
// usage: epsb_acceptance <path to epsb CLI>

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "epsb/dataset.h"
#include "epsb/error.h"
#include "epsb/losses.h"
#include "epsb/metrics.h"
#include "epsb/models.h"
#include "epsb/tensor.h"
#include "epsb/trainer.h"
#include "oracles.h"
#include "test_util.h"

namespace epsb {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using testing::ReadFile;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failure notes for one criterion.
class Checker {
 public:
  void Expect(bool ok, const std::string& what) {
    if (!ok && failures_++ < 3) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  Outcome Done(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    return {false, std::to_string(failures_) + " violation(s): " + notes_};
  }

 private:
  int failures_ = 0;
  std::string notes_;
};

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

int Run(const std::string& command, const std::string& log) {
  const int status = std::system((command + " > '" + log + "' 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string Quote(const std::string& s) { return "'" + s + "'"; }

GroundTruthSet RandomSet(size_t k, size_t h, size_t w, std::mt19937_64& rng) {
  GroundTruthSet g;
  g.weights = oracle::RandomWeights(k, rng);
  for (size_t i = 0; i < k; ++i) {
    g.targets.push_back(oracle::RandomImage(h, w, rng));
    g.picks.push_back({static_cast<int>(i) + 1, 1});
  }
  return g;
}

Tensor RandomTensor(const Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(shape);
  for (Real& v : t.data()) v = static_cast<Real>(u(rng));
  return t;
}

Outcome MetricOracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<size_t> images(1, 3), side(1, 8), count(1, 5);
  Checker c;
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = images(rng), h = side(rng), w = side(rng);
    std::vector<Image> outputs;
    std::vector<GroundTruthSet> gts;
    std::vector<std::vector<Image>> targets, selections;
    std::vector<std::vector<double>> weights, uniform;
    for (size_t t = 0; t < n; ++t) {
      outputs.push_back(oracle::RandomImage(h, w, rng));
      gts.push_back(RandomSet(count(rng), h, w, rng));
      targets.push_back(gts.back().targets);
      weights.push_back(gts.back().weights);
      selections.emplace_back();
      for (int k = 0; k < kVotesPerImage; ++k) {
        selections.back().push_back(oracle::RandomImage(h, w, rng));
      }
      uniform.emplace_back(kVotesPerImage, 1.0 / kVotesPerImage);
    }
    for (bool per_entry : {true, false}) {
      const PoolingMode mode = per_entry ? PoolingMode::kPerEntry : PoolingMode::kStrictPaper;
      const oracle::Errors we = oracle::WeightedErrors(outputs, targets, weights, per_entry);
      const oracle::Errors ue = oracle::WeightedErrors(outputs, selections, uniform, per_entry);
      const double errs[] = {
          oracle::RelativeError(Wrmse(outputs, gts, mode), we.wrmse),
          oracle::RelativeError(Wmae(outputs, gts, mode), we.wmae),
          oracle::RelativeError(Rmse14(outputs, selections, mode), ue.wrmse),
          oracle::RelativeError(Mae14(outputs, selections, mode), ue.wmae)};
      for (double e : errs) {
        worst = std::max(worst, e);
        c.Expect(e <= 1e-12, "trial " + std::to_string(trial) + " relative error " +
                                 Fmt("%.3g", e));
      }
    }
  }
  const double secs = Seconds(start);
  c.Expect(secs < 5.0, "runtime " + Fmt("%.2f", secs) + " s");
  return c.Done("200 instances, max relative error " + Fmt("%.2g", worst) + ", " +
                Fmt("%.2f", secs) + " s");
}

Outcome JensenOrdering() {
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<size_t> side(1, 8), count(1, 5);
  Checker c;
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t h = side(rng), w = side(rng);
    const std::vector<Image> outputs = {oracle::RandomImage(h, w, rng)};
    const std::vector<GroundTruthSet> gts = {RandomSet(count(rng), h, w, rng)};
    const WeightedErrors e = ComputeWeightedErrors(outputs, gts);
    c.Expect(e.wrmse >= e.wmae, "trial " + std::to_string(trial));
  }
  return c.Done("1000 instances, 0 violations");
}

Outcome VotingStrategy() {
  std::mt19937_64 rng(103);
  Checker c;
  int tied = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    VoteTally tally;
    std::array<std::array<int, 8>, 7> counts{}, global{};
    // Narrow cell ranges force ties in both count_t and COUNT.
    const int span = trial % 4 == 0 ? 4 : (trial % 4 == 1 ? 10 : 56);
    std::uniform_int_distribution<int> cell(0, span - 1), image(0, 3);
    for (int v = 0; v < 4 * kVotesPerImage; ++v) {
      const int k = cell(rng), t = image(rng);
      tally.Add(t, {k / 8 + 1, k % 8 + 1});
      global[k / 8][k % 8] += 1;
      if (t == 0) counts[k / 8][k % 8] += 1;
    }
    const auto want = oracle::SelectTop(counts, global, 5);
    const RankedSelection got = SelectTop5(tally, 0);
    bool same = got.picks.size() == want.size();
    double sum = 0;
    for (size_t i = 0; same && i < want.size(); ++i) {
      same = got.picks[i] == MethodParam{want[i].method, want[i].param} &&
             got.counts[i] == want[i].count;
      sum += got.weights[i];
    }
    for (size_t i = 1; i < want.size(); ++i) tied += want[i].count == want[i - 1].count;
    c.Expect(same, "trial " + std::to_string(trial) + " ranking differs");
    c.Expect(want.empty() || std::abs(sum - 1.0) <= 1e-12,
             "trial " + std::to_string(trial) + " weight sum " + Fmt("%.17g", sum));
  }
  return c.Done("1000 tallies (" + std::to_string(tied) + " tied neighbours)");
}

Outcome LossCorrectness() {
  std::mt19937_64 rng(104);
  Checker c;
  for (int trial = 0; trial < 50; ++trial) {
    const GroundTruthSet g = RandomSet(1 + trial % 5, 4, 4, rng);
    const Image p = oracle::RandomImage(4, 4, rng);
    c.Expect(oracle::RelativeError(WeightedL2Loss(p, g),
                                   oracle::L2Loss(p, g.targets, g.weights)) <= 1e-12,
             "l2");
    c.Expect(oracle::RelativeError(WeightedL1Loss(p, g),
                                   oracle::L1Loss(p, g.targets, g.weights)) <= 1e-12,
             "l1");
    c.Expect(oracle::RelativeError(NeighborhoodLoss(p, g),
                                   oracle::NeighborhoodLoss(p, g.targets, g.weights)) <= 1e-12,
             "nb");

    Tensor x({1, 3, 4, 4});
    CopyImageToTensor(p, x, 0);
    const std::vector<WeightedTargets> batch = {ToWeightedTargets(g)};
    const double a = CombinedLoss(Var(x), batch, 0.0).value()[0];
    const double b = WeightedL1Loss(Var(x), batch).value()[0];
    c.Expect(std::memcmp(&a, &b, sizeof a) == 0, "lambda 0 not bitwise l1");
  }
  for (int trial = 0; trial < 20; ++trial) {
    GroundTruthSet g = RandomSet(1, 4, 4, rng);
    for (double& v : g.targets[0].data) v = std::floor(v * 1024) / 1024;
    Image p = g.targets[0];
    const double offset = std::ldexp(1.0, -3 - trial % 4);
    for (double& v : p.data) v += offset;
    c.Expect(NeighborhoodLoss(p, g) == 0.0, "nb nonzero under constant offset");
  }
  return c.Done("oracles within 1e-12, offset nb = 0, lambda 0 bitwise");
}

Outcome GradientChecks() {
  const auto start = Clock::now();
  std::mt19937_64 rng(105);
  Checker c;
  double worst = 0;
  auto record = [&](double e, const std::string& what) {
    worst = std::max(worst, e);
    c.Expect(e < 1e-4, what + " " + Fmt("%.2g", e));
  };

  const Tensor probe = RandomTensor({2, 3, 5, 5}, rng);
  auto dot = [&](const Var& v) {
    return Sum(Mul(v, Var(probe)));
  };
  const Tensor x = RandomTensor({2, 3, 5, 5}, rng);
  Var w(RandomTensor({3, 3, 3, 3}, rng), true), b(RandomTensor({3}, rng), true);
  Var gamma(RandomTensor({3}, rng), true), beta(RandomTensor({3}, rng), true);
  Var other(RandomTensor({2, 3, 5, 5}, rng), true);
  record(GradCheck([&](const Var& in) { return dot(Conv2d(in, w, b)); }, x, 1e-6), "conv x");
  Var xv(x);
  record(GradCheckLeaf([&] { return dot(Conv2d(xv, w, b)); }, w, 1e-6), "conv w");
  record(GradCheckLeaf([&] { return dot(Conv2d(xv, w, b)); }, b, 1e-6), "conv b");
  auto bn = [&](const Var& in) {
    BatchNormState s;
    return dot(BatchNorm(in, gamma, beta, NormMode::kTrain, s));
  };
  record(GradCheck(bn, x, 1e-6), "bn x");
  record(GradCheckLeaf([&] { return bn(xv); }, gamma, 1e-6), "bn gamma");
  record(GradCheckLeaf([&] { return bn(xv); }, beta, 1e-6), "bn beta");
  record(GradCheck([&](const Var& in) { return dot(Relu(in)); }, x, 1e-6), "relu");
  record(GradCheck([&](const Var& in) { return dot(Add(in, other)); }, x, 1e-6), "add");

  std::vector<WeightedTargets> batch(2);
  for (auto& wt : batch) {
    wt.targets = {RandomTensor({1, 3, 6, 6}, rng), RandomTensor({1, 3, 6, 6}, rng)};
    wt.weights = {0.6, 0.4};
  }
  const Tensor input = RandomTensor({2, 3, 6, 6}, rng);
  for (const ModelSpec& spec : {ModelSpec::VdcnnMini(), ModelSpec::ResnetMini()}) {
    for (LossKind kind : {LossKind::kL2, LossKind::kL1, LossKind::kL1Neighborhood}) {
      Model m = BuildModel(spec, 3);
      const std::string tag =
          std::string(ArchitectureName(spec.architecture)) + "-mini/" + LossKindName(kind);
      auto loss = [&](const Var& in) {
        return ComputeLoss(kind, m.Forward(in, NormMode::kTrain), batch, 0.7);
      };
      const size_t in_coords[] = {0, 41, 100, 215};
      record(GradCheck(loss, input, 1e-6, in_coords), tag + " input");
      Var in(input);
      for (NamedParam& p : m.parameters()) {
        const size_t size = p.var.value().size();
        const size_t coords[] = {0, size / 2, size - 1};
        record(GradCheckLeaf([&] { return loss(in); }, p.var, 1e-6, coords),
               tag + " " + p.name);
      }
    }
  }

  Model full = BuildModel(ModelSpec::Vdcnn(), 5);
  std::vector<WeightedTargets> one(1);
  one[0].targets = {RandomTensor({1, 3, 8, 8}, rng)};
  one[0].weights = {1.0};
  Var small(RandomTensor({1, 3, 8, 8}, rng));
  auto full_loss = [&] {
    return WeightedL2Loss(full.Forward(small, NormMode::kTrain), one);
  };
  for (size_t i = 0; i < full.parameters().size(); i += 7) {
    const size_t size = full.parameters()[i].var.value().size();
    const size_t coords[] = {0, size - 1};
    record(GradCheckLeaf(full_loss, full.parameters()[i].var, 1e-6, coords),
           "vdcnn/l2 " + full.parameters()[i].name);
  }

  const double secs = Seconds(start);
  c.Expect(secs < 120, "runtime " + Fmt("%.1f", secs) + " s");
  return c.Done("max relative error " + Fmt("%.2g", worst) + ", " + Fmt("%.1f", secs) + " s");
}

Outcome ArchitectureAudit() {
  Checker c;
  const Model v = BuildModel(ModelSpec::Vdcnn());
  const Model r = BuildModel(ModelSpec::Resnet());
  c.Expect(v.ConvLayerCount() == 20, "vdcnn convs " + std::to_string(v.ConvLayerCount()));
  c.Expect(v.ParameterCount() == 668227,
           "vdcnn params " + std::to_string(v.ParameterCount()));
  c.Expect(v.ReceptiveField() == 41, "vdcnn receptive field " + std::to_string(v.ReceptiveField()));
  c.Expect(TrainConfig::Vdcnn().patch_size == 41, "vdcnn patch size");
  c.Expect(r.ConvLayerCount() == 37, "resnet convs " + std::to_string(r.ConvLayerCount()));
  return c.Done("vdcnn 20 convs / 668227 params / rf 41; resnet " +
                std::to_string(r.ConvLayerCount()) + " convs");
}

Outcome OverfitGate(const std::string& cli, const std::string& work) {
  Checker c;
  const std::string data = work + "/overfit";
  if (Run(Quote(cli) + " synth --out " + Quote(data) +
              " --images 4 --test 0 --height 64 --width 64 --seed 7 --plan planted",
          work + "/overfit_synth.txt") != 0) {
    return {false, "synth failed"};
  }
  const auto start = Clock::now();
  const int rc = Run(Quote(cli) + " train --dataset " + Quote(data) +
                         " --preset resnet-mini --out " + Quote(work + "/overfit.ckpt") +
                         " --log " + Quote(work + "/overfit_log.jsonl"),
                     work + "/overfit_train.txt");
  const double secs = Seconds(start);
  if (rc != 0) return {false, "train exited with " + std::to_string(rc)};
  if (Run(Quote(cli) + " evaluate --dataset " + Quote(data) +
              " --split train --models-only --checkpoint ResNet-mini=" +
              Quote(work + "/overfit.ckpt") + " --json " + Quote(work + "/overfit_eval.json"),
          work + "/overfit_eval.txt") != 0) {
    return {false, "evaluate failed"};
  }
  const double wmae =
      nlohmann::json::parse(ReadFile(work + "/overfit_eval.json"))[0]["wmae"].get<double>();

  std::vector<nlohmann::json> decays;
  int steps = 0;
  std::istringstream log(ReadFile(work + "/overfit_log.jsonl"));
  for (std::string line; std::getline(log, line);) {
    const nlohmann::json r = nlohmann::json::parse(line);
    if (r["event"] == "lr_decay") decays.push_back(r);
    if (r["event"] == "end") steps = r["step"];
  }
  c.Expect(wmae < 2.0, "training WMAE " + Fmt("%.3f", wmae));
  c.Expect(steps <= 5000, "steps " + std::to_string(steps));
  c.Expect(decays.size() == 1, std::to_string(decays.size()) + " lr decays");
  if (decays.size() == 1) {
    c.Expect(decays[0]["from"] == 1e-3 && decays[0]["to"] == 1e-4, "decay values");
  }
  c.Expect(secs < 600, "runtime " + Fmt("%.0f", secs) + " s");
  std::string reason = decays.empty() ? "none" : decays[0]["reason"].get<std::string>();
  return c.Done("training WMAE " + Fmt("%.3f", wmae) + " after " + std::to_string(steps) +
                " steps, one decay 1e-3 -> 1e-4 (" + reason + "), " + Fmt("%.0f", secs) + " s");
}

// Every regular file under `dir`, keyed by relative path.
std::map<std::string, std::string> Snapshot(const std::string& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      files[fs::relative(e.path(), dir).string()] = ReadFile(e.path().string());
    }
  }
  return files;
}

Outcome Determinism(const std::string& cli, const std::string& work) {
  Checker c;
  for (const char* run : {"a", "b"}) {
    const std::string dir = work + "/det_" + run;
    const std::string logs = work + "/det_logs_" + run;
    fs::create_directories(dir);
    fs::create_directories(logs);
    const std::string data = dir + "/data";
    c.Expect(Run(Quote(cli) + " synth --out " + Quote(data) + " --images 4 --seed 7",
                 logs + "/synth.txt") == 0,
             std::string("synth ") + run);
    c.Expect(Run(Quote(cli) + " train --dataset " + Quote(data) +
                     " --preset vdcnn-mini --max-steps 40 --patch 24 --batch 2 --out " +
                     Quote(dir + "/model.ckpt") + " --log " + Quote(dir + "/train.jsonl"),
                 logs + "/train.txt") == 0,
             std::string("train ") + run);
    c.Expect(Run(Quote(cli) + " evaluate --dataset " + Quote(data) + " --checkpoint VDCNN=" +
                     Quote(dir + "/model.ckpt") + " --json " + Quote(dir + "/eval.json") +
                     " --table " + Quote(dir + "/eval.txt"),
                 logs + "/evaluate.txt") == 0,
             std::string("evaluate ") + run);
  }
  const auto a = Snapshot(work + "/det_a"), b = Snapshot(work + "/det_b");
  c.Expect(a.size() == b.size(), "different file sets");
  size_t compared = 0;
  for (const auto& [path, bytes] : a) {
    auto it = b.find(path);
    c.Expect(it != b.end() && it->second == bytes, path + " differs");
    ++compared;
  }
  return c.Done(std::to_string(compared) + " artifacts byte-identical across two runs");
}

Outcome Statistics(const std::string& cli, const std::string& work) {
  Checker c;
  int datasets = 0;
  for (const char* plan : {"categorical", "concentrated", "planted"}) {
    const std::string data = work + "/stats_" + plan;
    c.Expect(Run(Quote(cli) + " synth --out " + Quote(data) + " --images 12 --test 3 " +
                     "--height 8 --width 8 --seed 19 --plan " + plan,
                 data + ".synth.txt") == 0,
             std::string("synth ") + plan);
    c.Expect(Run(Quote(cli) + " stats --dataset " + Quote(data) + " --json " +
                     Quote(data + ".stats.json"),
                 data + ".stats.txt") == 0,
             std::string("stats ") + plan);
    nlohmann::json planted = nlohmann::json::parse(ReadFile(data + "/planted.json"));
    planted.erase("spec");
    const nlohmann::json got = nlohmann::json::parse(ReadFile(data + ".stats.json"));
    c.Expect(got == planted, std::string(plan) + " statistics differ from the plan");
    ++datasets;
  }
  std::string real = "real vote log not supplied (EPSB_REAL_DATASET unset), full-dataset check n/a";
  if (const char* path = std::getenv("EPSB_REAL_DATASET"); path && *path) {
    const Dataset ds = LoadAndValidate(path, {.check_files = false});
    const VoteStatistics s = ComputeVoteStatistics(ds.tally());
    const int top = s.per_method[s.TopMethod() - 1];
    const int ge3 = s.ImagesWithMaxRepeatAtLeast(3);
    c.Expect(top == 3999, "top method has " + std::to_string(top) + " choices");
    c.Expect(ge3 == 420, std::to_string(ge3) + " images with max repeat >= 3");
    real = "real log: " + std::to_string(top) + " choices for the top method, " +
           std::to_string(ge3) + "/" + std::to_string(s.images) + " images with max repeat >= 3";
  }
  return c.Done(std::to_string(datasets) + " planted distributions recovered exactly; " + real);
}

MethodResult Row(const std::string& name, double rmse, double mae) {
  MethodResult r;
  r.name = name;
  r.best_wrmse = rmse;
  r.best_wmae = mae;
  return r;
}

Outcome GoldenFormats() {
  Checker c;
  MetricReport report;
  report.methods = {Row("SD filter", 11.57, 7.65), Row("L0 smooth", 10.64, 6.93),
                    Row("FGS", 10.67, 6.82),       Row("TreeFilter", 14.31, 9.24),
                    Row("WMF", 11.83, 7.96),       Row("L1 smooth", 9.89, 5.76),
                    Row("LLF", 11.06, 7.29),       Row("VDCNN", 9.78, 6.15),
                    Row("ResNet", 9.03, 5.55)};
  const std::string golden = EPSB_GOLDEN_DIR;
  c.Expect(FormatLeaderboard(report) == ReadFile(golden + "/leaderboard.txt"),
           "leaderboard layout");
  const std::vector<TimingRow> rows = {
      {"SD filter", 10.46}, {"L0 smoothing", 1.24}, {"FGS", 0.05},
      {"Tree Filtering", 0.18}, {"WMF", 0.52},      {"L1 smoothing", 328.0},
      {"LLF", 199.0},       {"VDCNN", 0.41},        {"ResNet", 0.78}};
  c.Expect(FormatTimingTable(rows) == ReadFile(golden + "/timing.txt"), "timing layout");
  return c.Done("leaderboard and timing tables match golden files");
}

Outcome CheckpointRoundTrip(const std::string& work) {
  Checker c;
  std::mt19937_64 rng(106);
  int inputs = 0;
  for (const ModelSpec& spec : {ModelSpec::VdcnnMini(), ModelSpec::ResnetMini()}) {
    Model m = BuildModel(spec, 8);
    for (int i = 0; i < 3; ++i) m.Forward(Var(RandomTensor({2, 3, 8, 8}, rng)), NormMode::kTrain);
    const std::string path = work + "/roundtrip_" + ArchitectureName(spec.architecture) + ".ckpt";
    SaveCheckpoint(m, path);
    Model loaded = LoadCheckpoint(path);
    for (int i = 0; i < 10; ++i, ++inputs) {
      const Var x(RandomTensor({1, 3, 9, 7}, rng));
      const Tensor a = m.Forward(x, NormMode::kInfer).value();
      const Tensor b = loaded.Forward(x, NormMode::kInfer).value();
      c.Expect(a.size() == b.size() &&
                   std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(Real)) == 0,
               "input " + std::to_string(inputs) + " differs");
    }
  }
  return c.Done(std::to_string(inputs) + " inputs bit-identical after save and load");
}

}  // namespace
}  // namespace epsb

int main(int argc, char** argv) {
  using epsb::Outcome;
  if (argc != 2) {
    std::cerr << "usage: " << argv[0] << " <epsb cli>\n";
    return 2;
  }
  const std::string cli = std::filesystem::absolute(argv[1]).string();
  const std::string work =
      (std::filesystem::temp_directory_path() / ("epsb_acceptance_" + std::to_string(::getpid())))
          .string();
  std::filesystem::remove_all(work);
  std::filesystem::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric-oracle", epsb::MetricOracle},
      {"jensen-ordering", epsb::JensenOrdering},
      {"voting-strategy", epsb::VotingStrategy},
      {"loss-correctness", epsb::LossCorrectness},
      {"gradient-checks", epsb::GradientChecks},
      {"architecture-audit", epsb::ArchitectureAudit},
      {"overfit-gate", [&] { return epsb::OverfitGate(cli, work); }},
      {"determinism", [&] { return epsb::Determinism(cli, work); }},
      {"statistics", [&] { return epsb::Statistics(cli, work); }},
      {"golden-formats", epsb::GoldenFormats},
      {"checkpoint-roundtrip", [&] { return epsb::CheckpointRoundTrip(work); }},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  if (failed == 0) std::filesystem::remove_all(work);
  return failed == 0 ? 0 : 1;
}
