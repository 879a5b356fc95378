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

#include "epsb/groundtruth.h"

#include <cmath>

#include "epsb/error.h"

namespace epsb {

std::string ToString(const MethodParam& mp) {
  return "m" + std::to_string(mp.method) + "_p" + std::to_string(mp.param);
}

void ValidateGroundTruth(const GroundTruthSet& gts, const Image* reference) {
  const std::string who = "groundtruth set of image " + std::to_string(gts.image_id);
  if (gts.targets.empty()) Fail(ErrorKind::kValidation, who + " has no targets");
  if (gts.weights.size() != gts.targets.size()) {
    Fail(ErrorKind::kValidation, who + " has " + std::to_string(gts.weights.size()) +
                                     " weights for " +
                                     std::to_string(gts.targets.size()) + " targets");
  }
  double sum = 0;
  for (double w : gts.weights) {
    if (!(w >= 0)) Fail(ErrorKind::kValidation, who + " has a negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightSumTolerance) {
    Fail(ErrorKind::kValidation,
         who + " weights sum to " + std::to_string(sum) + ", expected 1");
  }
  const Image& ref = reference ? *reference : gts.targets.front();
  for (const Image& t : gts.targets) {
    if (!t.SameSize(ref)) {
      Fail(ErrorKind::kShape, who + ": target is " + std::to_string(t.height) +
                                  "x" + std::to_string(t.width) + ", expected " +
                                  std::to_string(ref.height) + "x" +
                                  std::to_string(ref.width));
    }
  }
}

}  // namespace epsb
