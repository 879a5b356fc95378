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

#ifndef EPSB_GROUNDTRUTH_H_
#define EPSB_GROUNDTRUTH_H_

#include <compare>
#include <string>
#include <vector>

#include "epsb/image.h"

namespace epsb {

inline constexpr int kMethodCount = 7;
inline constexpr int kParamCount = 8;
inline constexpr int kMaxGroundTruths = 5;
inline constexpr int kVotesPerImage = 14;

// A (method, parameter setting) combination, both 1-based.
struct MethodParam {
  int method = 1;
  int param = 1;

  auto operator<=>(const MethodParam&) const = default;
};

std::string ToString(const MethodParam& mp);  // "m3_p5"

// Top-voted smoothed images for one source image, with normalized weights.
struct GroundTruthSet {
  int image_id = 0;
  std::vector<MethodParam> picks;
  std::vector<double> weights;
  std::vector<Image> targets;
};

inline constexpr double kWeightSumTolerance = 1e-12;

// Throws kValidation if weights are negative or do not sum to 1, kShape if
// the targets disagree in size (with each other or with `reference`).
void ValidateGroundTruth(const GroundTruthSet& gts,
                         const Image* reference = nullptr);

}  // namespace epsb

#endif  // EPSB_GROUNDTRUTH_H_
