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

#include "epsb/losses.h"

#include <cmath>

#include "epsb/error.h"

namespace epsb {
namespace {

struct BatchDims {
  size_t n, c, h, w;
};

BatchDims CheckBatch(const Var& pred, std::span<const WeightedTargets> batch) {
  const Shape& s = pred.shape();
  if (s.size() != 4) {
    Fail(ErrorKind::kShape, "loss: prediction must be N x C x H x W, got " +
                                ShapeString(s));
  }
  if (batch.size() != s[0]) {
    Fail(ErrorKind::kShape, "loss: " + std::to_string(batch.size()) +
                                " target sets for a batch of " +
                                std::to_string(s[0]));
  }
  const Shape sample{1, s[1], s[2], s[3]};
  for (size_t n = 0; n < batch.size(); ++n) {
    const WeightedTargets& wt = batch[n];
    if (wt.targets.empty() || wt.targets.size() != wt.weights.size()) {
      Fail(ErrorKind::kValidation, "loss: sample " + std::to_string(n) +
                                       " needs one weight per target");
    }
    double sum = 0;
    for (double w : wt.weights) {
      if (!(w >= 0)) {
        Fail(ErrorKind::kValidation,
             "loss: negative weight in sample " + std::to_string(n));
      }
      sum += w;
    }
    if (std::abs(sum - 1.0) > kWeightSumTolerance) {
      Fail(ErrorKind::kValidation, "loss: weights of sample " +
                                       std::to_string(n) + " sum to " +
                                       std::to_string(sum) + ", expected 1");
    }
    for (const Tensor& t : wt.targets) {
      if (t.shape() != sample) {
        Fail(ErrorKind::kShape, "loss: target " + ShapeString(t.shape()) +
                                    " does not match prediction sample " +
                                    ShapeString(sample));
      }
    }
  }
  return {s[0], s[1], s[2], s[3]};
}

double NormFactor(LossNormalization norm, const BatchDims& d) {
  return norm == LossNormalization::kSum
             ? 1.0
             : 1.0 / static_cast<double>(d.n * d.h * d.w);
}

Real Sign(double v) { return v > 0 ? Real(1) : (v < 0 ? Real(-1) : Real(0)); }

// Shared body of the two pointwise losses.
template <bool kSquared>
Var PointwiseLoss(const Var& pred, std::span<const WeightedTargets> batch,
                  LossNormalization norm) {
  const BatchDims d = CheckBatch(pred, batch);
  const double scale = NormFactor(norm, d);
  const size_t per = d.c * d.h * d.w;
  const Tensor& p = pred.value();
  Tensor grad(p.shape(), Real(0));
  double total = 0;
  for (size_t n = 0; n < d.n; ++n) {
    const Real* pv = p.ptr() + n * per;
    Real* gv = grad.ptr() + n * per;
    const WeightedTargets& wt = batch[n];
    for (size_t k = 0; k < wt.targets.size(); ++k) {
      const double w = wt.weights[k];
      const Real* y = wt.targets[k].ptr();
      double partial = 0;
      for (size_t i = 0; i < per; ++i) {
        const double diff = static_cast<double>(pv[i]) - y[i];
        if constexpr (kSquared) {
          partial += diff * diff;
          gv[i] += static_cast<Real>(2 * w * diff * scale);
        } else {
          partial += std::abs(diff);
          gv[i] += static_cast<Real>(w * Sign(diff) * scale);
        }
      }
      total += w * partial;
    }
  }
  return MakeResult(Tensor({1}, static_cast<Real>(total * scale)), {pred},
                    [grad = std::move(grad)](Node& self) {
                      Tensor& g = self.inputs[0]->EnsureGrad();
                      const Real up = self.grad[0];
                      for (size_t i = 0; i < g.size(); ++i) g[i] += up * grad[i];
                    });
}

Var ImageVar(const Image& image) { return Var(ImageToTensor(image)); }

}  // namespace

const char* LossKindName(LossKind kind) {
  switch (kind) {
    case LossKind::kL2: return "l2";
    case LossKind::kL1: return "l1";
    case LossKind::kL1Neighborhood: return "l1+nb";
  }
  return "?";
}

LossKind ParseLossKind(const std::string& name) {
  if (name == "l2") return LossKind::kL2;
  if (name == "l1") return LossKind::kL1;
  if (name == "l1+nb" || name == "l1nb") return LossKind::kL1Neighborhood;
  Fail(ErrorKind::kArgument,
       "unknown loss '" + name + "' (expected l2, l1 or l1+nb)");
}

WeightedTargets ToWeightedTargets(const GroundTruthSet& gts) {
  ValidateGroundTruth(gts);
  WeightedTargets wt;
  wt.weights = gts.weights;
  for (const Image& t : gts.targets) wt.targets.push_back(ImageToTensor(t));
  return wt;
}

Var WeightedL2Loss(const Var& pred, std::span<const WeightedTargets> batch,
                   LossNormalization norm) {
  return PointwiseLoss<true>(pred, batch, norm);
}

Var WeightedL1Loss(const Var& pred, std::span<const WeightedTargets> batch,
                   LossNormalization norm) {
  return PointwiseLoss<false>(pred, batch, norm);
}

Var NeighborhoodLoss(const Var& pred, std::span<const WeightedTargets> batch,
                     const NeighborhoodSpec& spec, LossNormalization norm) {
  if (spec.extent < 1 || spec.extent % 2 == 0) {
    Fail(ErrorKind::kArgument, "neighborhood extent must be odd and >= 1, got " +
                                   std::to_string(spec.extent));
  }
  const BatchDims d = CheckBatch(pred, batch);
  const double scale = NormFactor(norm, d);
  const ptrdiff_t r = spec.extent / 2;
  const auto h = static_cast<ptrdiff_t>(d.h);
  const auto w = static_cast<ptrdiff_t>(d.w);
  const size_t plane = d.h * d.w;
  const Tensor& p = pred.value();
  Tensor grad(p.shape(), Real(0));
  double total = 0;

  for (size_t n = 0; n < d.n; ++n) {
    const WeightedTargets& wt = batch[n];
    for (size_t k = 0; k < wt.targets.size(); ++k) {
      const double wk = wt.weights[k];
      const Real* y = wt.targets[k].ptr();
      double partial = 0;
      for (size_t c = 0; c < d.c; ++c) {
        const Real* pv = p.ptr() + (n * d.c + c) * plane;
        const Real* yv = y + c * plane;
        Real* gv = grad.ptr() + (n * d.c + c) * plane;
        for (ptrdiff_t dy = -r; dy <= r; ++dy) {
          for (ptrdiff_t dx = -r; dx <= r; ++dx) {
            // Self-pairs contribute nothing.
            if (dy == 0 && dx == 0) continue;
            const ptrdiff_t y0 = std::max<ptrdiff_t>(0, -dy);
            const ptrdiff_t y1 = std::min(h, h - dy);
            const ptrdiff_t x0 = std::max<ptrdiff_t>(0, -dx);
            const ptrdiff_t x1 = std::min(w, w - dx);
            for (ptrdiff_t i = y0; i < y1; ++i) {
              for (ptrdiff_t j = x0; j < x1; ++j) {
                const ptrdiff_t a = i * w + j;
                const ptrdiff_t b = (i + dy) * w + (j + dx);
                const double diff = (static_cast<double>(pv[a]) - pv[b]) -
                                    (static_cast<double>(yv[a]) - yv[b]);
                partial += std::abs(diff);
                const Real s = static_cast<Real>(wk * Sign(diff) * scale);
                gv[a] += s;
                gv[b] -= s;
              }
            }
          }
        }
      }
      total += wk * partial;
    }
  }
  return MakeResult(Tensor({1}, static_cast<Real>(total * scale)), {pred},
                    [grad = std::move(grad)](Node& self) {
                      Tensor& g = self.inputs[0]->EnsureGrad();
                      const Real up = self.grad[0];
                      for (size_t i = 0; i < g.size(); ++i) g[i] += up * grad[i];
                    });
}

Var CombinedLoss(const Var& pred, std::span<const WeightedTargets> batch,
                 double lambda_nb, const NeighborhoodSpec& spec,
                 LossNormalization norm) {
  if (!(lambda_nb >= 0)) {
    Fail(ErrorKind::kArgument, "lambda_nb must be non-negative, got " +
                                   std::to_string(lambda_nb));
  }
  Var l1 = WeightedL1Loss(pred, batch, norm);
  if (lambda_nb == 0) return l1;
  return Add(l1, Scale(NeighborhoodLoss(pred, batch, spec, norm),
                       static_cast<Real>(lambda_nb)));
}

Var ComputeLoss(LossKind kind, const Var& pred,
                std::span<const WeightedTargets> batch, double lambda_nb,
                LossNormalization norm) {
  switch (kind) {
    case LossKind::kL2: return WeightedL2Loss(pred, batch, norm);
    case LossKind::kL1: return WeightedL1Loss(pred, batch, norm);
    case LossKind::kL1Neighborhood:
      return CombinedLoss(pred, batch, lambda_nb, {}, norm);
  }
  Fail(ErrorKind::kArgument, "unknown loss kind");
}

double WeightedL2Loss(const Image& pred, const GroundTruthSet& gts) {
  ValidateGroundTruth(gts, &pred);
  const WeightedTargets wt = ToWeightedTargets(gts);
  return WeightedL2Loss(ImageVar(pred), {&wt, 1}).value()[0];
}

double WeightedL1Loss(const Image& pred, const GroundTruthSet& gts) {
  ValidateGroundTruth(gts, &pred);
  const WeightedTargets wt = ToWeightedTargets(gts);
  return WeightedL1Loss(ImageVar(pred), {&wt, 1}).value()[0];
}

double NeighborhoodLoss(const Image& pred, const GroundTruthSet& gts,
                        const NeighborhoodSpec& spec) {
  ValidateGroundTruth(gts, &pred);
  const WeightedTargets wt = ToWeightedTargets(gts);
  return NeighborhoodLoss(ImageVar(pred), {&wt, 1}, spec).value()[0];
}

double CombinedLoss(const Image& pred, const GroundTruthSet& gts,
                    double lambda_nb, const NeighborhoodSpec& spec) {
  ValidateGroundTruth(gts, &pred);
  const WeightedTargets wt = ToWeightedTargets(gts);
  return CombinedLoss(ImageVar(pred), {&wt, 1}, lambda_nb, spec).value()[0];
}

}  // namespace epsb
