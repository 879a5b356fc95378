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

// epsb: command-line entry point for the benchmark harness.
//
// Exit codes: 0 ok, 1 usage, 2 validation, 3 runtime.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "epsb/annotation.h"
#include "epsb/applications.h"
#include "epsb/dataset.h"
#include "epsb/error.h"
#include "epsb/metrics.h"
#include "epsb/models.h"
#include "epsb/synth.h"
#include "epsb/trainer.h"
#include "httplib.h"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace epsb;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kArgument:
      return kExitUsage;
    case ErrorKind::kValidation:
    case ErrorKind::kShape:
    case ErrorKind::kConsistency:
      return kExitValidation;
    default:
      return kExitRuntime;
  }
}

nlohmann::json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kNotFound, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, path + " is not valid JSON: " + e.what());
  }
}

void WriteJsonFile(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path);
  out << j.dump(1) << '\n';
}

void WriteText(const std::string& text, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path);
  out << text;
}

std::string ManifestPath(const std::string& dataset) {
  return fs::is_directory(dataset) ? (fs::path(dataset) / "manifest.json").string()
                                   : dataset;
}

PoolingMode ParsePooling(const std::string& s) {
  if (s == "default") return PoolingMode::kPerEntry;
  if (s == "strict-paper") return PoolingMode::kStrictPaper;
  Fail(ErrorKind::kArgument, "unknown metric mode '" + s + "'");
}

MethodParam ParseMethodParam(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) {
    Fail(ErrorKind::kArgument, "expected M,P but got '" + s + "'");
  }
  try {
    return {std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1))};
  } catch (const std::exception&) {
    Fail(ErrorKind::kArgument, "expected M,P but got '" + s + "'");
  }
}

// "name=path" or "path" (name defaults to the file stem).
std::pair<std::string, std::string> ParseNamedPath(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) return {fs::path(s).stem().string(), s};
  return {s.substr(0, eq), s.substr(eq + 1)};
}

struct SmootherArgs {
  std::string kind = "bilateral";
  std::string checkpoint;
  double sigma = 4.0;
  double sigma_range = 0.1;

  void Add(CLI::App* cmd) {
    cmd->add_option("--smoother", kind,
                    "identity | gaussian | bilateral | model")
        ->capture_default_str()
        ->check(CLI::IsMember({"identity", "gaussian", "bilateral", "model"}));
    cmd->add_option("--checkpoint", checkpoint, "model checkpoint for --smoother model")
        ->check(CLI::ExistingFile);
    cmd->add_option("--sigma", sigma, "spatial sigma (gaussian, bilateral)")
        ->capture_default_str();
    cmd->add_option("--sigma-range", sigma_range, "range sigma (bilateral)")
        ->capture_default_str();
  }

  ImageFilter Build(std::unique_ptr<Model>& holder) const {
    if (kind == "identity") return IdentitySmooth;
    if (kind == "gaussian") {
      const double s = sigma;
      return [s](const Image& im) { return GaussianSmooth(im, s); };
    }
    if (kind == "bilateral") {
      const double s = sigma, r = sigma_range;
      return [s, r](const Image& im) { return BilateralSmooth(im, s, r); };
    }
    if (checkpoint.empty()) {
      Fail(ErrorKind::kArgument, "--smoother model requires --checkpoint");
    }
    holder = std::make_unique<Model>(LoadCheckpoint(checkpoint));
    return ModelSmoother(*holder);
  }
};

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out;
  std::string config;
  int images = 4;
  int test = 1;
  size_t height = 64;
  size_t width = 64;
  uint64_t seed = 1;
  int votes = kVotesPerImage;
  int volunteers = 26;
  int regions = 8;
  double noise = 0.04;
  std::string plan = "categorical";
  std::string planted = "3,5";
  bool identity = false;
};

void AddSynth(CLI::App& app, SynthArgs& a, std::function<void()>& run) {
  auto* cmd = app.add_subcommand("synth", "Generate a synthetic fixture dataset");
  cmd->add_option("--out", a.out, "output directory")->required();
  cmd->add_option("--config", a.config, "synth spec JSON (flags override)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--images", a.images, "total number of images")->capture_default_str();
  cmd->add_option("--test", a.test, "how many of them form the test split")
      ->capture_default_str();
  cmd->add_option("--height", a.height, "image height")->capture_default_str();
  cmd->add_option("--width", a.width, "image width")->capture_default_str();
  cmd->add_option("--seed", a.seed, "generator seed")->capture_default_str();
  cmd->add_option("--votes", a.votes, "votes per image")->capture_default_str();
  cmd->add_option("--volunteers", a.volunteers, "number of simulated volunteers")
      ->capture_default_str();
  cmd->add_option("--regions", a.regions, "mosaic regions per image")
      ->capture_default_str();
  cmd->add_option("--noise", a.noise, "detail noise sigma")->capture_default_str();
  cmd->add_option("--plan", a.plan, "categorical | concentrated | planted")
      ->capture_default_str();
  cmd->add_option("--planted", a.planted, "M,P used by --plan planted")
      ->capture_default_str();
  cmd->add_flag("--identity", a.identity, "every candidate equals its source");
  run = [cmd, &a] {
    SynthSpec spec;
    if (!a.config.empty()) spec = SynthSpecFromJson(ReadJsonFile(a.config));
    auto set = [&](const char* flag) { return cmd->count(flag) > 0 || a.config.empty(); };
    if (set("--images") || set("--test")) {
      if (a.test < 0 || a.test > a.images) {
        Fail(ErrorKind::kArgument, "--test must lie in [0, --images]");
      }
      spec.train_images = a.images - a.test;
      spec.test_images = a.test;
    }
    if (set("--height")) spec.height = a.height;
    if (set("--width")) spec.width = a.width;
    if (set("--seed")) spec.seed = a.seed;
    if (set("--votes")) spec.votes_per_image = a.votes;
    if (set("--volunteers")) spec.volunteers = a.volunteers;
    if (set("--regions")) spec.regions = a.regions;
    if (set("--noise")) spec.noise = a.noise;
    if (set("--plan")) spec.plan = ParseVotePlan(a.plan);
    if (set("--planted")) spec.planted = ParseMethodParam(a.planted);
    if (cmd->count("--identity")) spec.identity = true;
    const SynthResult r = GenerateSynthetic(spec, a.out);
    std::cout << "wrote " << r.manifest.images.size() << " images and "
              << r.votes.size() << " votes to " << a.out << '\n';
  };
}

// ---------------------------------------------------------------- validate

struct ValidateArgs {
  std::string dataset;
  bool no_files = false;
};

void AddValidate(CLI::App& app, ValidateArgs& a, std::function<void()>& run) {
  auto* cmd = app.add_subcommand("validate", "Check a dataset and its vote log");
  cmd->add_option("--dataset", a.dataset, "dataset directory or manifest")
      ->required()
      ->check(CLI::ExistingPath);
  cmd->add_flag("--no-files", a.no_files, "skip decoding image files");
  run = [&a] {
    const Dataset d = LoadAndValidate(ManifestPath(a.dataset), {!a.no_files});
    std::cout << "ok: " << d.manifest().images.size() << " images ("
              << d.SplitIds(Split::kTrain).size() << " train, "
              << d.SplitIds(Split::kTest).size() << " test), " << d.votes().size()
              << " votes\n";
  };
}

// ---------------------------------------------------------------- stats

struct StatsArgs {
  std::string dataset;
  int method = 0;
  std::string json;
};

void AddStats(CLI::App& app, StatsArgs& a, std::function<void()>& run) {
  auto* cmd = app.add_subcommand("stats", "Vote histograms of a dataset");
  cmd->add_option("--dataset", a.dataset, "dataset directory or manifest")
      ->required()
      ->check(CLI::ExistingPath);
  cmd->add_option("--method", a.method,
                  "method whose parameter histogram is shown (0 = most voted)")
      ->capture_default_str();
  cmd->add_option("--json", a.json, "also write the statistics as JSON");
  run = [&a] {
    const Dataset d = LoadAndValidate(ManifestPath(a.dataset), {false});
    const VoteStatistics s = ComputeVoteStatistics(d.tally(), a.method);
    std::cout << FormatVoteStatistics(s, d.manifest().method_names);
    if (!a.json.empty()) WriteJsonFile(VoteStatisticsToJson(s), a.json);
  };
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string dataset;
  std::string split = "test";
  std::string mode = "default";
  std::vector<std::string> checkpoints;
  bool models_only = false;
  std::string json;
  std::string table;
};

MetricReport BuildReport(const EvaluateArgs& a, bool include_methods,
                         std::optional<int> only_method) {
  const Dataset d = LoadAndValidate(ManifestPath(a.dataset), {false});
  const Split split = ParseSplit(a.split);
  const std::vector<int> ids = d.SplitIds(split);
  if (ids.empty()) Fail(ErrorKind::kValidation, a.split + " split is empty");
  std::vector<GroundTruthSet> gts;
  for (int id : ids) gts.push_back(d.GroundTruth(id));

  MetricReport report;
  report.mode = ParsePooling(a.mode);
  if (include_methods) {
    for (int m = 1; m <= kMethodCount; ++m) {
      if (only_method && *only_method != m) continue;
      const std::string name = d.manifest().method_names[m - 1];
      report.methods.push_back(GreedyParamSearch(
          name, kParamCount,
          [&](size_t s, size_t t) {
            return d.LoadCandidate(ids[t], {m, static_cast<int>(s) + 1});
          },
          gts, report.mode));
    }
  }
  for (const std::string& spec : a.checkpoints) {
    const auto [name, path] = ParseNamedPath(spec);
    Model model = LoadCheckpoint(path);
    std::vector<Image> outputs;
    for (int id : ids) outputs.push_back(Infer(model, d.LoadSource(id)));
    const WeightedErrors e = ComputeWeightedErrors(outputs, gts, report.mode);
    MethodResult r;
    r.name = name;
    r.wrmse = {e.wrmse};
    r.wmae = {e.wmae};
    r.best_wrmse = e.wrmse;
    r.best_wmae = e.wmae;
    report.methods.push_back(r);
  }
  return report;
}

void AddEvaluateOptions(CLI::App* cmd, EvaluateArgs& a) {
  cmd->add_option("--dataset", a.dataset, "dataset directory or manifest")
      ->required()
      ->check(CLI::ExistingPath);
  cmd->add_option("--split", a.split, "train | test")
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "test"}));
  cmd->add_option("--mode", a.mode, "metric pooling: default | strict-paper")
      ->capture_default_str()
      ->check(CLI::IsMember({"default", "strict-paper"}));
  cmd->add_option("--json", a.json, "write machine-readable rows");
  cmd->add_option("--table", a.table, "also write the text table to this file");
}

void AddEvaluate(CLI::App& app, EvaluateArgs& a, std::function<void()>& run) {
  auto* cmd = app.add_subcommand(
      "evaluate", "Leaderboard of WRMSE*/WMAE* over methods and checkpoints");
  AddEvaluateOptions(cmd, a);
  cmd->add_option("--checkpoint", a.checkpoints,
                  "NAME=PATH of a trained model to include (repeatable)");
  cmd->add_flag("--models-only", a.models_only, "skip the candidate methods");
  run = [&a] {
    const MetricReport report = BuildReport(a, !a.models_only, std::nullopt);
    if (report.methods.empty()) Fail(ErrorKind::kArgument, "nothing to evaluate");
    const std::string table = FormatLeaderboard(report);
    std::cout << table;
    if (!a.table.empty()) WriteText(table, a.table);
    if (!a.json.empty()) WriteJsonFile(LeaderboardRows(report), a.json);
  };
}

struct GridArgs {
  EvaluateArgs eval;
  int method = 1;
};

void AddGridsearch(CLI::App& app, GridArgs& a, std::function<void()>& run) {
  auto* cmd = app.add_subcommand(
      "gridsearch", "Per-setting WRMSE/WMAE of one method with its minima");
  AddEvaluateOptions(cmd, a.eval);
  cmd->add_option("--method", a.method, "method index 1..7")
      ->capture_default_str()
      ->check(CLI::Range(1, kMethodCount));
  run = [&a] {
    const MetricReport report = BuildReport(a.eval, true, a.method);
    const MethodResult& r = report.methods.front();
    const std::string table = FormatGridTable(r);
    std::cout << table;
    if (!a.eval.table.empty()) WriteText(table, a.eval.table);
    if (!a.eval.json.empty()) {
      WriteJsonFile({{"method", r.name},
                     {"pooling", PoolingModeName(report.mode)},
                     {"wrmse", r.wrmse},
                     {"wmae", r.wmae},
                     {"best_wrmse", r.best_wrmse},
                     {"best_wmae", r.best_wmae},
                     {"best_wrmse_param", r.best_wrmse_param},
                     {"best_wmae_param", r.best_wmae_param}},
                    a.eval.json);
    }
  };
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string dataset;
  std::string config;
  std::string preset = "resnet-mini";
  std::string out = "model.ckpt";
  std::string log = "train_log.jsonl";
  int max_steps = 0;
  uint64_t seed = 1;
  double lr = 1e-3;
  std::string loss;
  double lambda_nb = 1.0;
  size_t patch = 0;
  size_t batch = 0;
  double clip = 0;
  bool wall_clock = false;
};

void AddTrain(CLI::App& app, TrainArgs& a, std::function<void()>& run) {
  auto* cmd = app.add_subcommand("train", "Train a baseline smoother");
  cmd->add_option("--dataset", a.dataset, "dataset directory or manifest")
      ->required()
      ->check(CLI::ExistingPath);
  cmd->add_option("--config", a.config, "training config JSON (flags override)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--preset", a.preset, "vdcnn | resnet | vdcnn-mini | resnet-mini")
      ->capture_default_str()
      ->check(CLI::IsMember({"vdcnn", "resnet", "vdcnn-mini", "resnet-mini"}));
  cmd->add_option("--out", a.out, "checkpoint path")->capture_default_str();
  cmd->add_option("--log", a.log, "JSONL training log")->capture_default_str();
  cmd->add_option("--max-steps", a.max_steps, "step budget");
  cmd->add_option("--seed", a.seed, "initialization and sampling seed");
  cmd->add_option("--lr", a.lr, "initial learning rate");
  cmd->add_option("--loss", a.loss, "l2 | l1 | l1+nb")
      ->check(CLI::IsMember({"l2", "l1", "l1+nb"}));
  cmd->add_option("--lambda-nb", a.lambda_nb, "neighborhood loss weight");
  cmd->add_option("--patch", a.patch, "patch size");
  cmd->add_option("--batch", a.batch, "mini-batch size");
  cmd->add_option("--clip", a.clip, "gradient-norm clip (0 = off)");
  cmd->add_flag("--wall-clock", a.wall_clock, "record elapsed seconds in the log");
  run = [cmd, &a] {
    TrainConfig c = TrainPreset(a.preset);
    if (!a.config.empty()) c = TrainConfigFromJson(ReadJsonFile(a.config), c);
    if (cmd->count("--max-steps")) c.max_steps = a.max_steps;
    if (cmd->count("--seed")) c.seed = a.seed;
    if (cmd->count("--lr")) c.adam.lr = a.lr;
    if (cmd->count("--loss")) c.loss = ParseLossKind(a.loss);
    if (cmd->count("--lambda-nb")) c.lambda_nb = a.lambda_nb;
    if (cmd->count("--patch")) c.patch_size = a.patch;
    if (cmd->count("--batch")) c.batch_size = a.batch;
    if (cmd->count("--clip")) c.clip_grad_norm = a.clip;
    if (a.wall_clock) c.wall_clock = true;
    c.Validate();
    const Dataset d = LoadAndValidate(ManifestPath(a.dataset));
    const TrainResult r = Train(d, c, {a.out, a.log});
    std::cout << "trained " << r.steps << " steps (" << r.end_reason
              << "), lr decay at step " << r.decay_step << " (" << r.decay_reason
              << "), final lr " << r.final_lr << "; checkpoint " << a.out << '\n';
  };
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  std::string checkpoint;
  std::string input;
  std::string output;
};

void AddInfer(CLI::App& app, InferArgs& a, std::function<void()>& run) {
  auto* cmd = app.add_subcommand("infer", "Smooth one image with a trained model");
  cmd->add_option("--checkpoint", a.checkpoint, "model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--input", a.input, "input PNG")->required()->check(CLI::ExistingFile);
  cmd->add_option("--output", a.output, "output PNG")->required();
  run = [&a] {
    Model m = LoadCheckpoint(a.checkpoint);
    WriteImage(Infer(m, ReadImage(a.input)), a.output);
  };
}

// ---------------------------------------------------------------- timeit

struct TimeitArgs {
  std::string dataset;
  std::string split = "test";
  std::vector<std::string> checkpoints;
  int param = 4;
  int warmup = 1;
  std::string json;
};

void AddTimeit(CLI::App& app, TimeitArgs& a, std::function<void()>& run) {
  auto* cmd = app.add_subcommand("timeit", "Mean run time per image");
  cmd->add_option("--dataset", a.dataset, "dataset directory or manifest")
      ->required()
      ->check(CLI::ExistingPath);
  cmd->add_option("--split", a.split, "train | test")
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "test"}));
  cmd->add_option("--checkpoint", a.checkpoints, "NAME=PATH of a model (repeatable)");
  cmd->add_option("--param", a.param, "setting used for the stand-in smoothers")
      ->capture_default_str()
      ->check(CLI::Range(1, kParamCount));
  cmd->add_option("--warmup", a.warmup, "untimed leading runs")->capture_default_str();
  cmd->add_option("--json", a.json, "write machine-readable rows");
  run = [&a] {
    const Dataset d = LoadAndValidate(ManifestPath(a.dataset), {false});
    std::vector<Image> images;
    for (int id : d.SplitIds(ParseSplit(a.split))) images.push_back(d.LoadSource(id));
    if (images.empty()) Fail(ErrorKind::kValidation, a.split + " split is empty");
    std::vector<TimingRow> rows;
    const auto names = StandInNames();
    for (int m = 1; m <= kMethodCount; ++m) {
      const MethodParam mp{m, a.param};
      rows.push_back({names[m - 1], TimeIt([mp](const Image& im) {
                        return StandInSmooth(im, mp);
                      }, images, a.warmup)});
    }
    for (const std::string& spec : a.checkpoints) {
      const auto [name, path] = ParseNamedPath(spec);
      Model model = LoadCheckpoint(path);
      rows.push_back({name, TimeIt(ModelSmoother(model), images, a.warmup)});
    }
    std::cout << FormatTimingTable(rows);
    if (!a.json.empty()) WriteJsonFile(TimingRowsToJson(rows), a.json);
  };
}

// ---------------------------------------------------------------- tonemap / enhance

struct ToneMapArgs {
  std::string input;
  std::string output;
  double compression = 0.25;
  SmootherArgs smoother;
};

void AddToneMap(CLI::App& app, ToneMapArgs& a, std::function<void()>& run) {
  auto* cmd = app.add_subcommand("tonemap", "Tone-map an HDR image (PFM)");
  cmd->add_option("--input", a.input, "linear radiance PFM")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--output", a.output, "output PNG")->required();
  cmd->add_option("--compression", a.compression, "base-layer compression factor")
      ->capture_default_str();
  a.smoother.Add(cmd);
  run = [&a] {
    std::unique_ptr<Model> holder;
    const ImageFilter f = a.smoother.Build(holder);
    WriteImage(ToneMap(ReadHdr(a.input), f, {a.compression}), a.output);
  };
}

struct EnhanceArgs {
  std::string input;
  std::string output;
  double gamma = 0.5;
  double eps = 1e-4;
  SmootherArgs smoother;
};

void AddEnhance(CLI::App& app, EnhanceArgs& a, std::function<void()>& run) {
  auto* cmd = app.add_subcommand("enhance", "Illumination-reflectance contrast enhancement");
  cmd->add_option("--input", a.input, "input PNG")->required()->check(CLI::ExistingFile);
  cmd->add_option("--output", a.output, "output PNG")->required();
  cmd->add_option("--gamma", a.gamma, "illumination exponent")->capture_default_str();
  cmd->add_option("--eps", a.eps, "division guard")->capture_default_str();
  a.smoother.Add(cmd);
  run = [&a] {
    std::unique_ptr<Model> holder;
    const ImageFilter f = a.smoother.Build(holder);
    WriteImage(ContrastEnhance(ReadImage(a.input), f, {a.gamma, a.eps}), a.output);
  };
}

// ---------------------------------------------------------------- serve

struct ServeArgs {
  std::string dataset;
  std::string volunteers;
  std::string instructions;
  std::string host = "127.0.0.1";
  int port = 8080;
  uint64_t seed = 1;
  int session_minutes = 60;
};

httplib::Server* g_server = nullptr;

void AddServe(CLI::App& app, ServeArgs& a, std::function<void()>& run) {
  auto* cmd = app.add_subcommand("serve", "Run the annotation service");
  cmd->add_option("--dataset", a.dataset, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--volunteers", a.volunteers,
                  "volunteer list (default: <dataset>/volunteers.json)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--instructions", a.instructions,
                  "text file, one instruction per line, served verbatim")
      ->check(CLI::ExistingFile);
  cmd->add_option("--host", a.host, "bind address")->capture_default_str();
  cmd->add_option("--port", a.port, "TCP port")->capture_default_str();
  cmd->add_option("--seed", a.seed, "assignment seed")->capture_default_str();
  cmd->add_option("--session-minutes", a.session_minutes, "daily session limit")
      ->capture_default_str();
  run = [&a] {
    ServiceOptions opts;
    opts.seed = a.seed;
    opts.session.daily_seconds = static_cast<int64_t>(a.session_minutes) * 60;
    if (!a.instructions.empty()) opts.instructions = ReadInstructions(a.instructions);
    const std::string volunteers = a.volunteers.empty()
                                       ? (fs::path(a.dataset) / "volunteers.json").string()
                                       : a.volunteers;
    auto service = AnnotationService::Open(ManifestPath(a.dataset), volunteers, opts);
    httplib::Server server;
    RegisterRoutes(server, *service);
    g_server = &server;
    std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
    std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
    std::cerr << "serving " << a.dataset << " on http://" << a.host << ":" << a.port
              << '\n';
    if (!server.listen(a.host, a.port)) {
      Fail(ErrorKind::kIo, "cannot listen on " + a.host + ":" + std::to_string(a.port));
    }
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-preserving smoothing benchmark harness"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  std::function<void()> run_synth, run_validate, run_stats, run_evaluate, run_grid,
      run_train, run_infer, run_timeit, run_tonemap, run_enhance, run_serve;
  SynthArgs synth;
  ValidateArgs validate;
  StatsArgs stats;
  EvaluateArgs evaluate;
  GridArgs grid;
  TrainArgs train;
  InferArgs infer;
  TimeitArgs timeit;
  ToneMapArgs tonemap;
  EnhanceArgs enhance;
  ServeArgs serve;
  AddSynth(app, synth, run_synth);
  AddValidate(app, validate, run_validate);
  AddStats(app, stats, run_stats);
  AddEvaluate(app, evaluate, run_evaluate);
  AddGridsearch(app, grid, run_grid);
  AddTrain(app, train, run_train);
  AddInfer(app, infer, run_infer);
  AddTimeit(app, timeit, run_timeit);
  AddToneMap(app, tonemap, run_tonemap);
  AddEnhance(app, enhance, run_enhance);
  AddServe(app, serve, run_serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  const std::map<std::string, std::function<void()>*> runners = {
      {"synth", &run_synth},       {"validate", &run_validate},
      {"stats", &run_stats},       {"evaluate", &run_evaluate},
      {"gridsearch", &run_grid},   {"train", &run_train},
      {"infer", &run_infer},       {"timeit", &run_timeit},
      {"tonemap", &run_tonemap},   {"enhance", &run_enhance},
      {"serve", &run_serve}};
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    (*runners.at(name))();
  } catch (const Error& e) {
    std::cerr << "epsb " << name << ": error[" << ErrorKindName(e.kind())
              << "]: " << e.what() << '\n';
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "epsb " << name << ": error[internal]: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
