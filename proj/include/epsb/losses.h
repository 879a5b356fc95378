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

// Training losses over multi-groundtruth targets.
//
// For prediction P and targets Y^k with weights w_k (summing to 1):
//   l2 = sum_{i,j} sum_k w_k ||P_ij - Y^k_ij||_2^2
//   l1 = sum_{i,j} sum_k w_k ||P_ij - Y^k_ij||_1
//   nb = sum_{i,j} sum_k sum_{(p,q) in N_ij}
//            w_k ||(P_ij - P_pq) - (Y^k_ij - Y^k_pq)||_1
// Norms run over the 3 color channels. N_ij is a square window centred at
// (i, j), clipped at the image border.

#ifndef EPSB_LOSSES_H_
#define EPSB_LOSSES_H_

#include <span>
#include <vector>

#include "epsb/groundtruth.h"
#include "epsb/image.h"
#include "epsb/tensor.h"

namespace epsb {

enum class LossKind { kL2, kL1, kL1Neighborhood };

const char* LossKindName(LossKind kind);  // "l2", "l1", "l1+nb"
LossKind ParseLossKind(const std::string& name);

enum class LossNormalization {
  kSum,       // raw sums as written above
  kPerPixel,  // divided by the number of pixels in the batch (N * H * W)
};

struct NeighborhoodSpec {
  int extent = 5;  // odd window side
};

// Targets for one sample of a batch; each target is 1 x 3 x H x W.
struct WeightedTargets {
  std::vector<Tensor> targets;
  std::vector<double> weights;
};

WeightedTargets ToWeightedTargets(const GroundTruthSet& gts);

// `pred` is N x 3 x H x W and `batch` holds N entries.
Var WeightedL2Loss(const Var& pred, std::span<const WeightedTargets> batch,
                   LossNormalization norm = LossNormalization::kSum);
Var WeightedL1Loss(const Var& pred, std::span<const WeightedTargets> batch,
                   LossNormalization norm = LossNormalization::kSum);
Var NeighborhoodLoss(const Var& pred, std::span<const WeightedTargets> batch,
                     const NeighborhoodSpec& spec = {},
                     LossNormalization norm = LossNormalization::kSum);
// l1 + lambda_nb * nb; lambda_nb == 0 returns the l1 node itself.
Var CombinedLoss(const Var& pred, std::span<const WeightedTargets> batch,
                 double lambda_nb = 1.0, const NeighborhoodSpec& spec = {},
                 LossNormalization norm = LossNormalization::kSum);

Var ComputeLoss(LossKind kind, const Var& pred,
                std::span<const WeightedTargets> batch, double lambda_nb,
                LossNormalization norm = LossNormalization::kSum);

// Image-level convenience forms (raw sums).
double WeightedL2Loss(const Image& pred, const GroundTruthSet& gts);
double WeightedL1Loss(const Image& pred, const GroundTruthSet& gts);
double NeighborhoodLoss(const Image& pred, const GroundTruthSet& gts,
                        const NeighborhoodSpec& spec = {});
double CombinedLoss(const Image& pred, const GroundTruthSet& gts,
                    double lambda_nb = 1.0, const NeighborhoodSpec& spec = {});

}  // namespace epsb

#endif  // EPSB_LOSSES_H_
