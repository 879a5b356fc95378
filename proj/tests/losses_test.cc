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
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "epsb/error.h"
#include "epsb/losses.h"
#include "oracles.h"

namespace epsb {
namespace {

struct Instance {
  std::vector<Image> preds;
  std::vector<GroundTruthSet> gts;
};

Instance MakeInstance(size_t n, size_t h, size_t w, std::mt19937_64& rng) {
  Instance in;
  std::uniform_int_distribution<size_t> count(1, 5);
  for (size_t s = 0; s < n; ++s) {
    in.preds.push_back(oracle::RandomImage(h, w, rng));
    GroundTruthSet g;
    const size_t k = count(rng);
    g.weights = oracle::RandomWeights(k, rng);
    for (size_t i = 0; i < k; ++i) {
      g.targets.push_back(oracle::RandomImage(h, w, rng));
      g.picks.push_back({static_cast<int>(i) + 1, 1});
    }
    in.gts.push_back(std::move(g));
  }
  return in;
}

Tensor Stack(const std::vector<Image>& images) {
  Tensor t({images.size(), 3, images[0].height, images[0].width});
  for (size_t n = 0; n < images.size(); ++n) CopyImageToTensor(images[n], t, n);
  return t;
}

std::vector<WeightedTargets> Targets(const std::vector<GroundTruthSet>& gts) {
  std::vector<WeightedTargets> out;
  for (const auto& g : gts) out.push_back(ToWeightedTargets(g));
  return out;
}

Image Flip(const Image& im) { return FlipHorizontal(im); }

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("losses match brute-force oracles on 4x4 batches") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Instance in = MakeInstance(3, 4, 4, rng);
    double l2 = 0, l1 = 0, nb = 0;
    for (size_t n = 0; n < 3; ++n) {
      l2 += oracle::L2Loss(in.preds[n], in.gts[n].targets, in.gts[n].weights);
      l1 += oracle::L1Loss(in.preds[n], in.gts[n].targets, in.gts[n].weights);
      nb += oracle::NeighborhoodLoss(in.preds[n], in.gts[n].targets, in.gts[n].weights);
    }
    const Var pred(Stack(in.preds));
    const auto batch = Targets(in.gts);
    CHECK(oracle::RelativeError(WeightedL2Loss(pred, batch).value()[0], l2) <= 1e-12);
    CHECK(oracle::RelativeError(WeightedL1Loss(pred, batch).value()[0], l1) <= 1e-12);
    CHECK(oracle::RelativeError(NeighborhoodLoss(pred, batch).value()[0], nb) <= 1e-12);
    CHECK(oracle::RelativeError(CombinedLoss(pred, batch, 0.3).value()[0], l1 + 0.3 * nb) <=
          1e-12);
    CHECK(oracle::RelativeError(WeightedL1Loss(pred, batch, LossNormalization::kPerPixel)
                                    .value()[0],
                                l1 / 48) <= 1e-12);
  }
}

TEST_CASE("image-level losses agree with the oracles") {
  std::mt19937_64 rng(22);
  const Instance in = MakeInstance(1, 6, 5, rng);
  const Image& p = in.preds[0];
  const GroundTruthSet& g = in.gts[0];
  CHECK(oracle::RelativeError(WeightedL2Loss(p, g), oracle::L2Loss(p, g.targets, g.weights)) <=
        1e-12);
  CHECK(oracle::RelativeError(WeightedL1Loss(p, g), oracle::L1Loss(p, g.targets, g.weights)) <=
        1e-12);
  CHECK(oracle::RelativeError(NeighborhoodLoss(p, g, {3}),
                              oracle::NeighborhoodLoss(p, g.targets, g.weights, 3)) <= 1e-12);
}

TEST_CASE("neighborhood loss ignores a constant offset") {
  std::mt19937_64 rng(23);
  GroundTruthSet g;
  g.targets = {oracle::RandomImage(4, 4, rng)};
  g.weights = {1.0};
  g.picks = {{1, 1}};
  for (double& v : g.targets[0].data) v = std::floor(v * 256) / 256;
  const double c = 0.125;
  Image p = g.targets[0];
  for (double& v : p.data) v += c;
  CHECK(NeighborhoodLoss(p, g) == 0.0);
  CHECK(WeightedL1Loss(p, g) == doctest::Approx(3 * c * 16).epsilon(1e-12));
}

TEST_CASE("lambda zero returns weighted l1 bitwise") {
  std::mt19937_64 rng(24);
  const Instance in = MakeInstance(2, 4, 4, rng);
  const Var pred(Stack(in.preds));
  const auto batch = Targets(in.gts);
  const double a = CombinedLoss(pred, batch, 0.0).value()[0];
  const double b = WeightedL1Loss(pred, batch).value()[0];
  CHECK(std::memcmp(&a, &b, sizeof a) == 0);
  const double c = CombinedLoss(in.preds[0], in.gts[0], 0.0);
  const double d = WeightedL1Loss(in.preds[0], in.gts[0]);
  CHECK(std::memcmp(&c, &d, sizeof c) == 0);
}

TEST_CASE("loss arguments are validated") {
  std::mt19937_64 rng(25);
  const Instance in = MakeInstance(1, 4, 4, rng);
  const Var pred(Stack(in.preds));
  auto batch = Targets(in.gts);
  CHECK_THROWS_AS(NeighborhoodLoss(pred, batch, {4}), Error);
  CHECK_THROWS_AS(CombinedLoss(pred, batch, -1.0), Error);
  batch[0].weights[0] += 0.5;
  CHECK_THROWS_AS(WeightedL1Loss(pred, batch), Error);
}

TEST_CASE("losses vanish exactly at a single target") {
  std::mt19937_64 rng(26);
  GroundTruthSet g;
  g.targets = {oracle::RandomImage(4, 4, rng)};
  g.weights = {1.0};
  g.picks = {{1, 1}};
  CHECK(WeightedL2Loss(g.targets[0], g) == 0.0);
  CHECK(WeightedL1Loss(g.targets[0], g) == 0.0);
  CHECK(NeighborhoodLoss(g.targets[0], g) == 0.0);
}

TEST_CASE("losses are invariant under horizontal flip") {
  std::mt19937_64 rng(27);
  const Instance in = MakeInstance(1, 5, 6, rng);
  GroundTruthSet flipped = in.gts[0];
  for (Image& t : flipped.targets) t = Flip(t);
  const Image fp = Flip(in.preds[0]);
  CHECK(WeightedL2Loss(fp, flipped) == doctest::Approx(WeightedL2Loss(in.preds[0], in.gts[0])));
  CHECK(WeightedL1Loss(fp, flipped) == doctest::Approx(WeightedL1Loss(in.preds[0], in.gts[0])));
  CHECK(NeighborhoodLoss(fp, flipped) ==
        doctest::Approx(NeighborhoodLoss(in.preds[0], in.gts[0])));
}

TEST_CASE("loss gradients match central differences") {
  std::mt19937_64 rng(28);
  const Instance in = MakeInstance(2, 4, 4, rng);
  const auto batch = Targets(in.gts);
  const Tensor x = Stack(in.preds);
  for (LossKind kind : {LossKind::kL2, LossKind::kL1, LossKind::kL1Neighborhood}) {
    for (LossNormalization norm : {LossNormalization::kSum, LossNormalization::kPerPixel}) {
      INFO(LossKindName(kind));
      CHECK(GradCheck([&](const Var& p) { return ComputeLoss(kind, p, batch, 0.8, norm); }, x,
                      1e-7) < 1e-6);
    }
  }
}

TEST_CASE("loss names round trip") {
  for (LossKind k : {LossKind::kL2, LossKind::kL1, LossKind::kL1Neighborhood}) {
    CHECK(ParseLossKind(LossKindName(k)) == k);
  }
  CHECK_THROWS_AS(ParseLossKind("l3"), Error);
}

}  // TEST_SUITE

}  // namespace epsb
