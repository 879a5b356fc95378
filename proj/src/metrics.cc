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

#include "epsb/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "epsb/error.h"

namespace epsb {
namespace {

constexpr double kScale = 255.0;

void CheckMethodParam(MethodParam mp) {
  if (mp.method < 1 || mp.method > kMethodCount || mp.param < 1 ||
      mp.param > kParamCount) {
    Fail(ErrorKind::kRange, "method/parameter out of range: " + ToString(mp));
  }
}

struct Accumulator {
  double sum_sq = 0;
  double sum_abs = 0;
  double pixels = 0;

  // Adds weight * ||a - b|| terms for one image pair.
  void Add(const Image& out, const Image& target, double weight) {
    double sq = 0, ab = 0;
    for (size_t i = 0; i < out.data.size(); ++i) {
      const double d = out.data[i] - target.data[i];
      sq += d * d;
      ab += std::abs(d);
    }
    sum_sq += weight * sq;
    sum_abs += weight * ab;
  }

  double Denominator(PoolingMode mode) const {
    return mode == PoolingMode::kPerEntry ? pixels * 3 : pixels;
  }
  double Rmse(PoolingMode mode) const {
    return kScale * std::sqrt(sum_sq / Denominator(mode));
  }
  double Mae(PoolingMode mode) const {
    return kScale * sum_abs / Denominator(mode);
  }
};

void CheckOutputSize(const Image& out, const Image& ref, size_t t) {
  if (!out.SameSize(ref)) {
    Fail(ErrorKind::kShape, "output " + std::to_string(t) + " is " +
                                std::to_string(out.height) + "x" +
                                std::to_string(out.width) + ", groundtruth is " +
                                std::to_string(ref.height) + "x" +
                                std::to_string(ref.width));
  }
}

Accumulator AccumulateWeighted(std::span<const Image> outputs,
                               std::span<const GroundTruthSet> gts) {
  if (outputs.size() != gts.size()) {
    Fail(ErrorKind::kShape, std::to_string(outputs.size()) + " outputs for " +
                                std::to_string(gts.size()) + " groundtruth sets");
  }
  if (outputs.empty()) Fail(ErrorKind::kArgument, "no images to evaluate");
  Accumulator acc;
  for (size_t t = 0; t < outputs.size(); ++t) {
    ValidateGroundTruth(gts[t]);
    CheckOutputSize(outputs[t], gts[t].targets.front(), t);
    for (size_t k = 0; k < gts[t].targets.size(); ++k) {
      acc.Add(outputs[t], gts[t].targets[k], gts[t].weights[k]);
    }
    acc.pixels += static_cast<double>(outputs[t].pixels());
  }
  return acc;
}

Accumulator AccumulateUniform(std::span<const Image> outputs,
                              std::span<const std::vector<Image>> selections,
                              int expected) {
  if (outputs.size() != selections.size()) {
    Fail(ErrorKind::kShape, std::to_string(outputs.size()) + " outputs for " +
                                std::to_string(selections.size()) +
                                " selection lists");
  }
  if (outputs.empty()) Fail(ErrorKind::kArgument, "no images to evaluate");
  Accumulator acc;
  for (size_t t = 0; t < outputs.size(); ++t) {
    if (selections[t].size() != static_cast<size_t>(expected)) {
      Fail(ErrorKind::kValidation,
           "image " + std::to_string(t) + " has " +
               std::to_string(selections[t].size()) + " selections, expected " +
               std::to_string(expected));
    }
    const double w = 1.0 / expected;
    for (const Image& y : selections[t]) {
      CheckOutputSize(outputs[t], y, t);
      acc.Add(outputs[t], y, w);
    }
    acc.pixels += static_cast<double>(outputs[t].pixels());
  }
  return acc;
}

std::string Fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string Pad(const std::string& s, size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string RankMarker(int rank) {
  switch (rank) {
    case 1: return " (best)";
    case 2: return " (2nd)";
    case 3: return " (3rd)";
    default: return "";
  }
}

size_t VoteTally::Index(MethodParam mp) {
  CheckMethodParam(mp);
  return static_cast<size_t>((mp.method - 1) * kParamCount + (mp.param - 1));
}

MethodParam VoteTally::FromIndex(size_t index) {
  return {static_cast<int>(index / kParamCount) + 1,
          static_cast<int>(index % kParamCount) + 1};
}

void VoteTally::Add(int image_id, MethodParam mp, int votes) {
  const size_t i = Index(mp);
  per_image_[image_id][i] += votes;
  global_[i] += votes;
}

int VoteTally::count(int image_id, MethodParam mp) const {
  auto it = per_image_.find(image_id);
  return it == per_image_.end() ? 0 : it->second[Index(mp)];
}

int VoteTally::image_total(int image_id) const {
  auto it = per_image_.find(image_id);
  if (it == per_image_.end()) return 0;
  return std::accumulate(it->second.begin(), it->second.end(), 0);
}

int VoteTally::total() const {
  return std::accumulate(global_.begin(), global_.end(), 0);
}

std::vector<int> VoteTally::image_ids() const {
  std::vector<int> ids;
  for (const auto& [id, grid] : per_image_) ids.push_back(id);
  return ids;
}

const VoteTally::Grid& VoteTally::image_grid(int image_id) const {
  auto it = per_image_.find(image_id);
  if (it == per_image_.end()) {
    Fail(ErrorKind::kNotFound, "no votes recorded for image " + std::to_string(image_id));
  }
  return it->second;
}

RankedSelection SelectTop5(const VoteTally& tally, int image_id, int keep) {
  const VoteTally::Grid& grid = tally.image_grid(image_id);
  std::vector<size_t> order;
  for (size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] > 0) order.push_back(i);
  }
  if (order.empty()) {
    Fail(ErrorKind::kValidation,
         "image " + std::to_string(image_id) + " has no nonzero vote counts");
  }
  const VoteTally::Grid& global = tally.global_grid();
  // Index order equals (m, p) lexicographic order.
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (grid[a] != grid[b]) return grid[a] > grid[b];
    if (global[a] != global[b]) return global[a] > global[b];
    return a < b;
  });
  if (order.size() > static_cast<size_t>(keep)) order.resize(keep);

  RankedSelection sel;
  sel.image_id = image_id;
  int kept_total = 0;
  for (size_t i : order) {
    sel.picks.push_back(VoteTally::FromIndex(i));
    sel.counts.push_back(grid[i]);
    kept_total += grid[i];
  }
  for (int c : sel.counts) {
    sel.weights.push_back(static_cast<double>(c) / kept_total);
  }
  return sel;
}

const char* PoolingModeName(PoolingMode mode) {
  return mode == PoolingMode::kPerEntry ? "per-entry" : "strict-paper";
}

WeightedErrors ComputeWeightedErrors(std::span<const Image> outputs,
                                     std::span<const GroundTruthSet> gts,
                                     PoolingMode mode) {
  const Accumulator acc = AccumulateWeighted(outputs, gts);
  return {acc.Rmse(mode), acc.Mae(mode)};
}

double Wrmse(std::span<const Image> outputs,
             std::span<const GroundTruthSet> gts, PoolingMode mode) {
  return AccumulateWeighted(outputs, gts).Rmse(mode);
}

double Wmae(std::span<const Image> outputs, std::span<const GroundTruthSet> gts,
            PoolingMode mode) {
  return AccumulateWeighted(outputs, gts).Mae(mode);
}

double Rmse14(std::span<const Image> outputs,
              std::span<const std::vector<Image>> selections, PoolingMode mode,
              int expected_selections) {
  return AccumulateUniform(outputs, selections, expected_selections).Rmse(mode);
}

double Mae14(std::span<const Image> outputs,
             std::span<const std::vector<Image>> selections, PoolingMode mode,
             int expected_selections) {
  return AccumulateUniform(outputs, selections, expected_selections).Mae(mode);
}

MethodResult GreedyParamSearch(const std::string& name, size_t settings,
                               const OutputFetcher& fetch,
                               std::span<const GroundTruthSet> gts,
                               PoolingMode mode) {
  if (settings == 0) Fail(ErrorKind::kArgument, "method " + name + " has no settings");
  MethodResult result;
  result.name = name;
  for (size_t s = 0; s < settings; ++s) {
    std::vector<Image> outputs;
    outputs.reserve(gts.size());
    for (size_t t = 0; t < gts.size(); ++t) outputs.push_back(fetch(s, t));
    const WeightedErrors e = ComputeWeightedErrors(outputs, gts, mode);
    result.wrmse.push_back(e.wrmse);
    result.wmae.push_back(e.wmae);
  }
  const auto best_rmse = std::min_element(result.wrmse.begin(), result.wrmse.end());
  const auto best_mae = std::min_element(result.wmae.begin(), result.wmae.end());
  result.best_wrmse = *best_rmse;
  result.best_wmae = *best_mae;
  result.best_wrmse_param = static_cast<int>(best_rmse - result.wrmse.begin()) + 1;
  result.best_wmae_param = static_cast<int>(best_mae - result.wmae.begin()) + 1;
  return result;
}

MethodResult GreedyParamSearch(const std::string& name,
                               const std::vector<std::vector<Image>>& outputs,
                               std::span<const GroundTruthSet> gts,
                               PoolingMode mode) {
  for (size_t s = 0; s < outputs.size(); ++s) {
    if (outputs[s].size() != gts.size()) {
      Fail(ErrorKind::kValidation,
           "method " + name + " setting " + std::to_string(s + 1) + " has " +
               std::to_string(outputs[s].size()) + " outputs for " +
               std::to_string(gts.size()) + " images");
    }
  }
  return GreedyParamSearch(
      name, outputs.size(),
      [&](size_t s, size_t t) { return outputs[s][t]; }, gts, mode);
}

std::vector<int> RankMarkers(std::span<const double> values) {
  std::vector<size_t> order(values.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<int> ranks(values.size(), 0);
  for (size_t r = 0; r < order.size() && r < 3; ++r) {
    ranks[order[r]] = static_cast<int>(r) + 1;
  }
  return ranks;
}

std::string FormatLeaderboard(const MetricReport& report) {
  std::vector<double> rmse, mae;
  size_t name_width = 6;
  for (const MethodResult& m : report.methods) {
    rmse.push_back(m.best_wrmse);
    mae.push_back(m.best_wmae);
    name_width = std::max(name_width, m.name.size());
  }
  const std::vector<int> rr = RankMarkers(rmse);
  const std::vector<int> mr = RankMarkers(mae);
  constexpr size_t kColumn = 12;

  std::ostringstream os;
  os << Pad("Method", name_width) << " | " << Pad("WRMSE*", kColumn) << " | "
     << "WMAE*\n";
  os << std::string(name_width + 1, '-') << '+' << std::string(kColumn + 2, '-')
     << '+' << std::string(kColumn + 1, '-') << '\n';
  for (size_t i = 0; i < report.methods.size(); ++i) {
    os << Pad(report.methods[i].name, name_width) << " | "
       << Pad(Fixed2(rmse[i]) + RankMarker(rr[i]), kColumn) << " | "
       << Fixed2(mae[i]) + RankMarker(mr[i]) << '\n';
  }
  return os.str();
}

nlohmann::json LeaderboardRows(const MetricReport& report) {
  std::vector<double> rmse, mae;
  for (const MethodResult& m : report.methods) {
    rmse.push_back(m.best_wrmse);
    mae.push_back(m.best_wmae);
  }
  const std::vector<int> rr = RankMarkers(rmse);
  const std::vector<int> mr = RankMarkers(mae);
  nlohmann::json rows = nlohmann::json::array();
  for (size_t i = 0; i < report.methods.size(); ++i) {
    const MethodResult& m = report.methods[i];
    rows.push_back({{"method", m.name},
                    {"pooling", PoolingModeName(report.mode)},
                    {"wrmse", m.best_wrmse},
                    {"wmae", m.best_wmae},
                    {"wrmse_param", m.best_wrmse_param},
                    {"wmae_param", m.best_wmae_param},
                    {"wrmse_rank", rr[i]},
                    {"wmae_rank", mr[i]}});
  }
  return rows;
}

std::string FormatGridTable(const MethodResult& result) {
  std::ostringstream os;
  os << result.name << '\n';
  os << "p | WRMSE  | WMAE\n";
  os << "--+--------+-------\n";
  for (size_t s = 0; s < result.wrmse.size(); ++s) {
    os << Pad(std::to_string(s + 1), 1) << " | " << Pad(Fixed2(result.wrmse[s]), 6)
       << " | " << Fixed2(result.wmae[s]);
    if (static_cast<int>(s) + 1 == result.best_wrmse_param) os << "  <- WRMSE*";
    if (static_cast<int>(s) + 1 == result.best_wmae_param) os << "  <- WMAE*";
    os << '\n';
  }
  return os.str();
}

}  // namespace epsb
