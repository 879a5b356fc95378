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

// Dataset schema, vote log, validation, statistics and patch sampling.
//
// On-disk layout (paths in the manifest are relative to its directory):
//   manifest.json
//   votes.jsonl                 one vote record per line, append-only
//   images/<t>/source.png
//   images/<t>/m<m>_p<p>.png    candidate for method m, setting p

#ifndef EPSB_DATASET_H_
#define EPSB_DATASET_H_

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "epsb/groundtruth.h"
#include "epsb/image.h"
#include "epsb/losses.h"
#include "epsb/metrics.h"
#include "json.hpp"

namespace epsb {

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr int kFullTrainImages = 400;
inline constexpr int kFullTestImages = 100;

enum class Split { kTrain, kTest };
enum class DatasetMode { kFull, kSynthetic };

const char* SplitName(Split split);
Split ParseSplit(const std::string& name);

struct ImageEntry {
  int id = 0;
  Split split = Split::kTrain;
  std::string source;
  // candidates[m - 1][p - 1]
  std::array<std::array<std::string, kParamCount>, kMethodCount> candidates;

  const std::string& candidate(MethodParam mp) const {
    return candidates[mp.method - 1][mp.param - 1];
  }

  bool operator==(const ImageEntry&) const = default;
};

struct DatasetManifest {
  int schema_version = kManifestSchemaVersion;
  DatasetMode mode = DatasetMode::kSynthetic;
  int votes_per_image = kVotesPerImage;
  std::vector<std::string> method_names;
  std::string vote_log = "votes.jsonl";
  std::vector<ImageEntry> images;

  bool operator==(const DatasetManifest&) const = default;
};

// Labels of the seven reference filters, in method-index order.
std::vector<std::string> ReferenceMethodNames();

nlohmann::json ManifestToJson(const DatasetManifest& manifest);
DatasetManifest ManifestFromJson(const nlohmann::json& j);
DatasetManifest ReadManifest(const std::string& path);
void WriteManifest(const DatasetManifest& manifest, const std::string& path);

// Candidate path under the standard layout.
std::string CandidatePath(int image_id, MethodParam mp);
std::string SourcePath(int image_id);

struct VoteRecord {
  int image_id = 0;
  std::string volunteer;
  MethodParam choice;
  std::string timestamp;

  bool operator==(const VoteRecord&) const = default;
};

// Single-line JSON: {"t":..,"volunteer":..,"m":..,"p":..,"timestamp":..}
std::string VoteRecordToLine(const VoteRecord& record);
VoteRecord ParseVoteRecord(const std::string& line);
std::vector<VoteRecord> ReadVoteLog(const std::string& path);
// Appends one line and flushes before returning.
void AppendVoteRecord(const std::string& path, const VoteRecord& record);

VoteTally TallyVotes(std::span<const VoteRecord> votes);

struct ValidationOptions {
  bool check_files = true;
};

// Checks vote invariants against the manifest: known image ids, method and
// parameter ranges, one vote per (image, volunteer), and exactly
// `votes_per_image` votes for every image.
void ValidateVotes(const DatasetManifest& manifest,
                   std::span<const VoteRecord> votes);

class Dataset {
 public:
  Dataset(DatasetManifest manifest, std::string root,
          std::vector<VoteRecord> votes);

  const DatasetManifest& manifest() const { return manifest_; }
  const std::string& root() const { return root_; }
  const std::vector<VoteRecord>& votes() const { return votes_; }
  const VoteTally& tally() const { return tally_; }

  const ImageEntry& entry(int image_id) const;
  std::vector<int> SplitIds(Split split) const;
  std::string Resolve(const std::string& relative) const;

  Image LoadSource(int image_id) const;
  Image LoadCandidate(int image_id, MethodParam mp) const;
  // Top-ranked selections with their images loaded.
  GroundTruthSet GroundTruth(int image_id) const;
  // Every volunteer's selection, in vote-log order.
  std::vector<Image> Selections(int image_id) const;

 private:
  DatasetManifest manifest_;
  std::string root_;
  std::vector<VoteRecord> votes_;
  VoteTally tally_;
};

// Reads the manifest and vote log and checks every invariant. Errors name
// the offending image id.
Dataset LoadAndValidate(const std::string& manifest_path,
                        const ValidationOptions& options = {});

struct VoteStatistics {
  int images = 0;
  int votes = 0;
  std::array<int, kMethodCount> per_method{};
  int param_method = 1;  // method whose parameter histogram is reported
  std::array<int, kParamCount> per_param{};
  // max_repeat[k] = number of images whose most repeated choice has k votes.
  std::vector<int> max_repeat;

  int TopMethod() const;  // 1-based
  int ImagesWithMaxRepeatAtLeast(int k) const;
};

// `param_method` = 0 reports the parameter histogram of the top method.
VoteStatistics ComputeVoteStatistics(const VoteTally& tally,
                                     int param_method = 0);
std::string FormatVoteStatistics(const VoteStatistics& stats,
                                 const std::vector<std::string>& method_names);
nlohmann::json VoteStatisticsToJson(const VoteStatistics& stats);

// A source image with its groundtruth set, preloaded for training.
struct TrainingExample {
  int image_id = 0;
  Image source;
  GroundTruthSet gts;
};

std::vector<TrainingExample> LoadExamples(const Dataset& dataset, Split split);

struct PatchOrigin {
  size_t example;
  size_t y;
  size_t x;
};

struct PatchBatch {
  Tensor sources;  // N x 3 x P x P
  std::vector<WeightedTargets> targets;
  std::vector<bool> flipped;
  std::vector<PatchOrigin> origins;
};

// Uniform random crops from uniformly chosen examples; each patch (source
// and every target) is mirrored horizontally with probability 1/2.
PatchBatch SamplePatches(std::span<const TrainingExample> examples,
                         size_t patch_size, size_t batch_size,
                         std::mt19937_64& rng);

}  // namespace epsb

#endif  // EPSB_DATASET_H_
