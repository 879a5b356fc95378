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

#include "epsb/dataset.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "epsb/error.h"

namespace epsb {
namespace fs = std::filesystem;
namespace {

const char* ModeName(DatasetMode mode) {
  return mode == DatasetMode::kFull ? "full" : "synthetic";
}

DatasetMode ParseMode(const std::string& s) {
  if (s == "full") return DatasetMode::kFull;
  if (s == "synthetic") return DatasetMode::kSynthetic;
  Fail(ErrorKind::kFormat, "unknown dataset mode '" + s + "'");
}

std::string ImageTag(int id) { return "image " + std::to_string(id); }

}  // namespace

const char* SplitName(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

Split ParseSplit(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  Fail(ErrorKind::kArgument, "unknown split '" + name + "' (expected train or test)");
}

std::vector<std::string> ReferenceMethodNames() {
  return {"SD filter", "L0 smooth", "FGS", "TreeFilter",
          "WMF",       "L1 smooth", "LLF"};
}

std::string SourcePath(int image_id) {
  return "images/" + std::to_string(image_id) + "/source.png";
}

std::string CandidatePath(int image_id, MethodParam mp) {
  return "images/" + std::to_string(image_id) + "/" + ToString(mp) + ".png";
}

nlohmann::json ManifestToJson(const DatasetManifest& manifest) {
  nlohmann::json images = nlohmann::json::array();
  for (const ImageEntry& e : manifest.images) {
    images.push_back({{"id", e.id},
                      {"split", SplitName(e.split)},
                      {"source", e.source},
                      {"candidates", e.candidates}});
  }
  return {{"schema_version", manifest.schema_version},
          {"mode", ModeName(manifest.mode)},
          {"votes_per_image", manifest.votes_per_image},
          {"methods", manifest.method_names},
          {"vote_log", manifest.vote_log},
          {"images", images}};
}

DatasetManifest ManifestFromJson(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.schema_version = j.at("schema_version");
    if (m.schema_version != kManifestSchemaVersion) {
      Fail(ErrorKind::kFormat, "unsupported manifest schema version " +
                                   std::to_string(m.schema_version) +
                                   " (expected " +
                                   std::to_string(kManifestSchemaVersion) + ")");
    }
    m.mode = ParseMode(j.at("mode"));
    m.votes_per_image = j.at("votes_per_image");
    m.method_names = j.at("methods").get<std::vector<std::string>>();
    m.vote_log = j.at("vote_log");
    for (const auto& e : j.at("images")) {
      ImageEntry entry;
      entry.id = e.at("id");
      entry.split = ParseSplit(e.at("split"));
      entry.source = e.at("source");
      const auto& cands = e.at("candidates");
      if (cands.size() != kMethodCount) {
        Fail(ErrorKind::kFormat, ImageTag(entry.id) + " must list " +
                                     std::to_string(kMethodCount) +
                                     " candidate rows");
      }
      for (int mi = 0; mi < kMethodCount; ++mi) {
        if (cands[mi].size() != kParamCount) {
          Fail(ErrorKind::kFormat, ImageTag(entry.id) + " method " +
                                       std::to_string(mi + 1) + " must list " +
                                       std::to_string(kParamCount) +
                                       " candidates");
        }
        for (int pi = 0; pi < kParamCount; ++pi) {
          entry.candidates[mi][pi] = cands[mi][pi].get<std::string>();
        }
      }
      m.images.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, std::string("malformed manifest: ") + e.what());
  }
  if (m.method_names.size() != kMethodCount) {
    Fail(ErrorKind::kFormat, "manifest must name exactly 7 methods");
  }
  return m;
}

DatasetManifest ReadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kNotFound, "cannot open manifest " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, "manifest " + path + " is not valid JSON: " + e.what());
  }
  return ManifestFromJson(j);
}

void WriteManifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot write manifest " + path);
  out << ManifestToJson(manifest).dump(1) << '\n';
}

std::string VoteRecordToLine(const VoteRecord& r) {
  nlohmann::ordered_json j = {{"t", r.image_id},
                              {"volunteer", r.volunteer},
                              {"m", r.choice.method},
                              {"p", r.choice.param},
                              {"timestamp", r.timestamp}};
  return j.dump();
}

VoteRecord ParseVoteRecord(const std::string& line) {
  VoteRecord r;
  try {
    const auto j = nlohmann::json::parse(line);
    r.image_id = j.at("t");
    r.volunteer = j.at("volunteer");
    r.choice.method = j.at("m");
    r.choice.param = j.at("p");
    r.timestamp = j.value("timestamp", "");
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, std::string("malformed vote record: ") + e.what());
  }
  return r;
}

std::vector<VoteRecord> ReadVoteLog(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kNotFound, "cannot open vote log " + path);
  std::vector<VoteRecord> votes;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      votes.push_back(ParseVoteRecord(line));
    } catch (const Error& e) {
      Fail(e.kind(), path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return votes;
}

void AppendVoteRecord(const std::string& path, const VoteRecord& record) {
  std::ofstream out(path, std::ios::app);
  if (!out) Fail(ErrorKind::kIo, "cannot append to vote log " + path);
  out << VoteRecordToLine(record) << '\n';
  out.flush();
  if (!out) Fail(ErrorKind::kIo, "failed appending to vote log " + path);
}

VoteTally TallyVotes(std::span<const VoteRecord> votes) {
  VoteTally tally;
  for (const VoteRecord& v : votes) tally.Add(v.image_id, v.choice);
  return tally;
}

void ValidateVotes(const DatasetManifest& manifest,
                   std::span<const VoteRecord> votes) {
  std::map<int, int> per_image;
  for (const ImageEntry& e : manifest.images) per_image[e.id] = 0;
  std::set<std::pair<int, std::string>> seen;
  for (const VoteRecord& v : votes) {
    auto it = per_image.find(v.image_id);
    if (it == per_image.end()) {
      Fail(ErrorKind::kValidation, "vote by " + v.volunteer +
                                       " references unknown " + ImageTag(v.image_id));
    }
    if (v.choice.method < 1 || v.choice.method > kMethodCount ||
        v.choice.param < 1 || v.choice.param > kParamCount) {
      Fail(ErrorKind::kValidation, ImageTag(v.image_id) + ": vote by " +
                                       v.volunteer + " has out-of-range choice " +
                                       ToString(v.choice));
    }
    if (!seen.insert({v.image_id, v.volunteer}).second) {
      Fail(ErrorKind::kValidation, ImageTag(v.image_id) +
                                       ": duplicate vote by volunteer " +
                                       v.volunteer);
    }
    ++it->second;
  }
  for (const auto& [id, count] : per_image) {
    if (count != manifest.votes_per_image) {
      Fail(ErrorKind::kValidation,
           ImageTag(id) + " has " + std::to_string(count) + " votes, expected " +
               std::to_string(manifest.votes_per_image));
    }
  }
}

Dataset::Dataset(DatasetManifest manifest, std::string root,
                 std::vector<VoteRecord> votes)
    : manifest_(std::move(manifest)),
      root_(std::move(root)),
      votes_(std::move(votes)),
      tally_(TallyVotes(votes_)) {}

const ImageEntry& Dataset::entry(int image_id) const {
  for (const ImageEntry& e : manifest_.images) {
    if (e.id == image_id) return e;
  }
  Fail(ErrorKind::kNotFound, "unknown " + ImageTag(image_id));
}

std::vector<int> Dataset::SplitIds(Split split) const {
  std::vector<int> ids;
  for (const ImageEntry& e : manifest_.images) {
    if (e.split == split) ids.push_back(e.id);
  }
  return ids;
}

std::string Dataset::Resolve(const std::string& relative) const {
  return (fs::path(root_) / relative).string();
}

Image Dataset::LoadSource(int image_id) const {
  return ReadImage(Resolve(entry(image_id).source));
}

Image Dataset::LoadCandidate(int image_id, MethodParam mp) const {
  return ReadImage(Resolve(entry(image_id).candidate(mp)));
}

GroundTruthSet Dataset::GroundTruth(int image_id) const {
  const RankedSelection sel = SelectTop5(tally_, image_id);
  GroundTruthSet gts;
  gts.image_id = image_id;
  gts.picks = sel.picks;
  gts.weights = sel.weights;
  for (const MethodParam& mp : sel.picks) {
    gts.targets.push_back(LoadCandidate(image_id, mp));
  }
  return gts;
}

std::vector<Image> Dataset::Selections(int image_id) const {
  std::vector<Image> out;
  for (const VoteRecord& v : votes_) {
    if (v.image_id == image_id) out.push_back(LoadCandidate(image_id, v.choice));
  }
  return out;
}

Dataset LoadAndValidate(const std::string& manifest_path,
                        const ValidationOptions& options) {
  DatasetManifest manifest = ReadManifest(manifest_path);
  const std::string root = fs::path(manifest_path).parent_path().string();

  std::set<int> ids;
  int train = 0, test = 0;
  for (const ImageEntry& e : manifest.images) {
    if (!ids.insert(e.id).second) {
      Fail(ErrorKind::kValidation, "duplicate " + ImageTag(e.id) + " in manifest");
    }
    (e.split == Split::kTrain ? train : test) += 1;
  }
  if (manifest.mode == DatasetMode::kFull &&
      (train != kFullTrainImages || test != kFullTestImages)) {
    Fail(ErrorKind::kValidation,
         "full dataset must have 400 train / 100 test images, found " +
             std::to_string(train) + " / " + std::to_string(test));
  }
  if (manifest.mode == DatasetMode::kFull &&
      manifest.votes_per_image != kVotesPerImage) {
    Fail(ErrorKind::kValidation, "full dataset requires 14 votes per image");
  }

  std::vector<VoteRecord> votes =
      ReadVoteLog((fs::path(root) / manifest.vote_log).string());
  ValidateVotes(manifest, votes);

  Dataset dataset(std::move(manifest), root, std::move(votes));
  if (options.check_files) {
    for (const ImageEntry& e : dataset.manifest().images) {
      Image source;
      try {
        source = dataset.LoadSource(e.id);
      } catch (const Error& err) {
        Fail(err.kind(), ImageTag(e.id) + ": source: " + err.what());
      }
      for (int m = 1; m <= kMethodCount; ++m) {
        for (int p = 1; p <= kParamCount; ++p) {
          Image cand;
          try {
            cand = dataset.LoadCandidate(e.id, {m, p});
          } catch (const Error& err) {
            Fail(err.kind(), ImageTag(e.id) + ": candidate " + ToString({m, p}) +
                                 ": " + err.what());
          }
          if (!cand.SameSize(source)) {
            Fail(ErrorKind::kShape,
                 ImageTag(e.id) + ": candidate " + ToString({m, p}) + " is " +
                     std::to_string(cand.height) + "x" + std::to_string(cand.width) +
                     ", source is " + std::to_string(source.height) + "x" +
                     std::to_string(source.width));
          }
        }
      }
    }
  }
  return dataset;
}

int VoteStatistics::TopMethod() const {
  return static_cast<int>(std::max_element(per_method.begin(), per_method.end()) -
                          per_method.begin()) +
         1;
}

int VoteStatistics::ImagesWithMaxRepeatAtLeast(int k) const {
  int n = 0;
  for (size_t i = static_cast<size_t>(std::max(k, 0)); i < max_repeat.size(); ++i) {
    n += max_repeat[i];
  }
  return n;
}

VoteStatistics ComputeVoteStatistics(const VoteTally& tally, int param_method) {
  VoteStatistics stats;
  const auto& global = tally.global_grid();
  for (size_t i = 0; i < global.size(); ++i) {
    stats.per_method[i / kParamCount] += global[i];
  }
  stats.votes = tally.total();
  stats.param_method = param_method == 0 ? stats.TopMethod() : param_method;
  if (stats.param_method < 1 || stats.param_method > kMethodCount) {
    Fail(ErrorKind::kRange, "method " + std::to_string(param_method) + " out of range");
  }
  for (int p = 1; p <= kParamCount; ++p) {
    stats.per_param[p - 1] = tally.global({stats.param_method, p});
  }
  for (int id : tally.image_ids()) {
    const auto& grid = tally.image_grid(id);
    const int mx = *std::max_element(grid.begin(), grid.end());
    if (static_cast<size_t>(mx) >= stats.max_repeat.size()) {
      stats.max_repeat.resize(mx + 1, 0);
    }
    stats.max_repeat[mx] += 1;
    stats.images += 1;
  }
  return stats;
}

std::string FormatVoteStatistics(const VoteStatistics& stats,
                                 const std::vector<std::string>& names) {
  std::ostringstream os;
  size_t width = 6;
  for (const auto& n : names) width = std::max(width, n.size());
  auto pad = [&](const std::string& s) {
    return s + std::string(width > s.size() ? width - s.size() : 0, ' ');
  };
  os << "Votes per method (" << stats.votes << " votes, " << stats.images
     << " images)\n";
  os << pad("Method") << " | Votes\n";
  for (int m = 0; m < kMethodCount; ++m) {
    const std::string name =
        m < static_cast<int>(names.size()) ? names[m] : "m" + std::to_string(m + 1);
    os << pad(name) << " | " << stats.per_method[m] << '\n';
  }
  os << "\nVotes per parameter setting of method " << stats.param_method << '\n';
  os << "p | Votes\n";
  for (int p = 0; p < kParamCount; ++p) {
    os << p + 1 << " | " << stats.per_param[p] << '\n';
  }
  os << "\nMaximum number of repeated choices\n";
  os << "max | Images\n";
  for (size_t k = 1; k < stats.max_repeat.size(); ++k) {
    os << k << (k < 10 ? "   | " : "  | ") << stats.max_repeat[k] << '\n';
  }
  os << "images with max >= 3: " << stats.ImagesWithMaxRepeatAtLeast(3) << " of "
     << stats.images << '\n';
  return os.str();
}

nlohmann::json VoteStatisticsToJson(const VoteStatistics& stats) {
  return {{"images", stats.images},
          {"votes", stats.votes},
          {"per_method", stats.per_method},
          {"top_method", stats.TopMethod()},
          {"param_method", stats.param_method},
          {"per_param", stats.per_param},
          {"max_repeat", stats.max_repeat},
          {"images_max_repeat_ge_3", stats.ImagesWithMaxRepeatAtLeast(3)}};
}

std::vector<TrainingExample> LoadExamples(const Dataset& dataset, Split split) {
  std::vector<TrainingExample> out;
  for (int id : dataset.SplitIds(split)) {
    out.push_back({id, dataset.LoadSource(id), dataset.GroundTruth(id)});
  }
  return out;
}

PatchBatch SamplePatches(std::span<const TrainingExample> examples,
                         size_t patch_size, size_t batch_size,
                         std::mt19937_64& rng) {
  if (examples.empty()) Fail(ErrorKind::kArgument, "no examples to sample from");
  if (patch_size == 0 || batch_size == 0) {
    Fail(ErrorKind::kArgument, "patch and batch size must be positive");
  }
  for (const TrainingExample& ex : examples) {
    if (patch_size > ex.source.height || patch_size > ex.source.width) {
      Fail(ErrorKind::kArgument, "patch size " + std::to_string(patch_size) +
                                     " exceeds " + ImageTag(ex.image_id) + " (" +
                                     std::to_string(ex.source.height) + "x" +
                                     std::to_string(ex.source.width) + ")");
    }
  }
  PatchBatch batch;
  batch.sources = Tensor({batch_size, 3, patch_size, patch_size});
  std::uniform_int_distribution<size_t> pick(0, examples.size() - 1);
  std::bernoulli_distribution flip(0.5);
  for (size_t n = 0; n < batch_size; ++n) {
    const size_t e = pick(rng);
    const TrainingExample& ex = examples[e];
    std::uniform_int_distribution<size_t> ys(0, ex.source.height - patch_size);
    std::uniform_int_distribution<size_t> xs(0, ex.source.width - patch_size);
    const size_t y = ys(rng);
    const size_t x = xs(rng);
    const bool mirrored = flip(rng);
    auto cut = [&](const Image& img) {
      Image c = Crop(img, y, x, patch_size, patch_size);
      return mirrored ? FlipHorizontal(c) : c;
    };
    CopyImageToTensor(cut(ex.source), batch.sources, n);
    WeightedTargets wt;
    wt.weights = ex.gts.weights;
    for (const Image& t : ex.gts.targets) wt.targets.push_back(ImageToTensor(cut(t)));
    batch.targets.push_back(std::move(wt));
    batch.flipped.push_back(mirrored);
    batch.origins.push_back({e, y, x});
  }
  return batch;
}

}  // namespace epsb
