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

// Deterministic synthetic datasets for desk-scale runs.
//
// Sources are piecewise-constant Voronoi mosaics with additive Gaussian
// detail. The 7 x 8 candidate grid is produced by labeled separable
// smoothers whose strength grows with the setting index; they stand in for
// the real reference filters and only preserve the grid shape.

#ifndef EPSB_SYNTH_H_
#define EPSB_SYNTH_H_

#include <cstdint>
#include <string>
#include <vector>

#include "epsb/dataset.h"
#include "epsb/groundtruth.h"
#include "epsb/image.h"
#include "epsb/metrics.h"
#include "json.hpp"

namespace epsb {

enum class VotePlan {
  kCategorical,   // every vote drawn from one seeded distribution
  kConcentrated,  // each image has a favorite cell drawn with prob. 0.6
  kPlanted,       // every vote is `planted`
};

const char* VotePlanName(VotePlan plan);
VotePlan ParseVotePlan(const std::string& name);

struct SynthSpec {
  int train_images = 3;
  int test_images = 1;
  size_t height = 64;
  size_t width = 64;
  uint64_t seed = 1;
  int votes_per_image = kVotesPerImage;
  int volunteers = 26;
  int regions = 8;
  double noise = 0.04;
  VotePlan plan = VotePlan::kCategorical;
  MethodParam planted{3, 5};
  // Every candidate equals the source.
  bool identity = false;
};

nlohmann::json SynthSpecToJson(const SynthSpec& spec);
SynthSpec SynthSpecFromJson(const nlohmann::json& j);

// Names of the stand-in smoothers, indexed by method - 1.
std::vector<std::string> StandInNames();

// Normalized 1-D kernel of the stand-in smoother for (m, p).
std::vector<double> StandInKernel(MethodParam mp);

Image StandInSmooth(const Image& image, MethodParam mp);

struct SynthImage {
  Image clean;   // piecewise-constant mosaic
  Image source;  // mosaic + detail, quantized to 8 bits
};

// Image `index` (0-based) of the dataset described by `spec`.
SynthImage GenerateSynthImage(const SynthSpec& spec, int index);

struct Volunteer {
  std::string id;
  std::string token;
};

struct SynthResult {
  DatasetManifest manifest;
  std::vector<VoteRecord> votes;
  std::vector<Volunteer> volunteers;
  // Counts recorded while the votes were drawn.
  VoteTally planted;
};

// Votes and volunteers only; no files touched.
SynthResult PlanSynthetic(const SynthSpec& spec);

// Writes manifest.json, votes.jsonl, volunteers.json, planted.json and the
// image tree under `out_dir`.
SynthResult GenerateSynthetic(const SynthSpec& spec, const std::string& out_dir);

nlohmann::json VolunteersToJson(const std::vector<Volunteer>& volunteers);
std::vector<Volunteer> VolunteersFromJson(const nlohmann::json& j);

}  // namespace epsb

#endif  // EPSB_SYNTH_H_
