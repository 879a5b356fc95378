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

// Benchmark quality measures.
//
// Plain RMSE/MAE average uniformly over every volunteer's selection; the
// weighted forms use the top-ranked selections with vote-proportional
// weights. Errors are pooled over all pixels of all images and reported on
// the 0-255 scale.

#ifndef EPSB_METRICS_H_
#define EPSB_METRICS_H_

#include <array>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "epsb/groundtruth.h"
#include "epsb/image.h"
#include "json.hpp"

namespace epsb {

// Vote counts count_t(m, p) per image plus the global COUNT(m, p).
class VoteTally {
 public:
  using Grid = std::array<int, kMethodCount * kParamCount>;

  void Add(int image_id, MethodParam mp, int votes = 1);

  int count(int image_id, MethodParam mp) const;
  int global(MethodParam mp) const { return global_[Index(mp)]; }
  int image_total(int image_id) const;
  int total() const;
  std::vector<int> image_ids() const;
  const Grid& image_grid(int image_id) const;
  const Grid& global_grid() const { return global_; }

  static size_t Index(MethodParam mp);
  static MethodParam FromIndex(size_t index);

 private:
  std::map<int, Grid> per_image_;
  Grid global_{};
};

struct RankedSelection {
  int image_id = 0;
  std::vector<MethodParam> picks;
  std::vector<int> counts;
  std::vector<double> weights;
};

// Orders combinations by count_t desc, then COUNT desc, then (m, p)
// ascending, and keeps the first `keep` with a nonzero count. Weights are
// counts normalized over the kept entries.
RankedSelection SelectTop5(const VoteTally& tally, int image_id,
                           int keep = kMaxGroundTruths);

enum class PoolingMode {
  kPerEntry,     // denominator counts every channel value (pixels x 3)
  kStrictPaper,  // denominator counts pixels; channel norms in numerator
};

const char* PoolingModeName(PoolingMode mode);

struct WeightedErrors {
  double wrmse = 0;
  double wmae = 0;
};

// Weighted errors of `outputs[t]` against `gts[t]`.
WeightedErrors ComputeWeightedErrors(std::span<const Image> outputs,
                                     std::span<const GroundTruthSet> gts,
                                     PoolingMode mode = PoolingMode::kPerEntry);
double Wrmse(std::span<const Image> outputs,
             std::span<const GroundTruthSet> gts,
             PoolingMode mode = PoolingMode::kPerEntry);
double Wmae(std::span<const Image> outputs, std::span<const GroundTruthSet> gts,
            PoolingMode mode = PoolingMode::kPerEntry);

// Uniform 1/14 weight over all selections of each image.
double Rmse14(std::span<const Image> outputs,
              std::span<const std::vector<Image>> selections,
              PoolingMode mode = PoolingMode::kPerEntry,
              int expected_selections = kVotesPerImage);
double Mae14(std::span<const Image> outputs,
             std::span<const std::vector<Image>> selections,
             PoolingMode mode = PoolingMode::kPerEntry,
             int expected_selections = kVotesPerImage);

struct MethodResult {
  std::string name;
  std::vector<double> wrmse;  // one entry per parameter setting
  std::vector<double> wmae;
  double best_wrmse = 0;
  double best_wmae = 0;
  int best_wrmse_param = 1;  // 1-based
  int best_wmae_param = 1;
};

struct MetricReport {
  PoolingMode mode = PoolingMode::kPerEntry;
  std::vector<MethodResult> methods;
};

// Output of a method for (setting, image); settings and images are 0-based.
using OutputFetcher = std::function<Image(size_t setting, size_t image)>;

// Evaluates every setting over the whole split and keeps the minima.
MethodResult GreedyParamSearch(const std::string& name, size_t settings,
                               const OutputFetcher& fetch,
                               std::span<const GroundTruthSet> gts,
                               PoolingMode mode = PoolingMode::kPerEntry);

// outputs[setting][image].
MethodResult GreedyParamSearch(const std::string& name,
                               const std::vector<std::vector<Image>>& outputs,
                               std::span<const GroundTruthSet> gts,
                               PoolingMode mode = PoolingMode::kPerEntry);

// 1, 2, 3 for the three smallest values (ties keep input order), else 0.
std::vector<int> RankMarkers(std::span<const double> values);
// " (best)", " (2nd)", " (3rd)" or "".
std::string RankMarker(int rank);

// Aligned text table: Method | WRMSE* | WMAE*, with (best)/(2nd)/(3rd).
std::string FormatLeaderboard(const MetricReport& report);
// One object per method: method, wrmse, wmae, arg-min parameters, ranks.
nlohmann::json LeaderboardRows(const MetricReport& report);
// Per-setting table for a single method.
std::string FormatGridTable(const MethodResult& result);

}  // namespace epsb

#endif  // EPSB_METRICS_H_
