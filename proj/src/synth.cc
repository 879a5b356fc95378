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

#include "epsb/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "epsb/error.h"

namespace epsb {
namespace fs = std::filesystem;
namespace {

// Independent stream per (seed, purpose, index).
std::mt19937_64 Stream(uint64_t seed, uint64_t purpose, uint64_t index) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(purpose), static_cast<uint32_t>(index)};
  return std::mt19937_64(seq);
}

enum Purpose : uint64_t { kImages = 1, kVotes = 2, kTokens = 3, kPlan = 4 };

std::vector<double> Normalized(std::vector<double> k) {
  const double s = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& v : k) v /= s;
  return k;
}

std::string Timestamp(int64_t offset_seconds) {
  // 2026-01-01T00:00:00Z
  const std::time_t t = 1767225600 + offset_seconds;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void WriteJson(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path.string());
  out << j.dump(1) << '\n';
}

}  // namespace

const char* VotePlanName(VotePlan plan) {
  switch (plan) {
    case VotePlan::kCategorical: return "categorical";
    case VotePlan::kConcentrated: return "concentrated";
    case VotePlan::kPlanted: return "planted";
  }
  return "?";
}

VotePlan ParseVotePlan(const std::string& name) {
  if (name == "categorical") return VotePlan::kCategorical;
  if (name == "concentrated") return VotePlan::kConcentrated;
  if (name == "planted") return VotePlan::kPlanted;
  Fail(ErrorKind::kArgument, "unknown vote plan '" + name +
                                 "' (expected categorical, concentrated or planted)");
}

nlohmann::json SynthSpecToJson(const SynthSpec& s) {
  return {{"train_images", s.train_images}, {"test_images", s.test_images},
          {"height", s.height},             {"width", s.width},
          {"seed", s.seed},                 {"votes_per_image", s.votes_per_image},
          {"volunteers", s.volunteers},     {"regions", s.regions},
          {"noise", s.noise},               {"plan", VotePlanName(s.plan)},
          {"planted", {s.planted.method, s.planted.param}},
          {"identity", s.identity}};
}

SynthSpec SynthSpecFromJson(const nlohmann::json& j) {
  SynthSpec s;
  try {
    s.train_images = j.value("train_images", s.train_images);
    s.test_images = j.value("test_images", s.test_images);
    s.height = j.value("height", s.height);
    s.width = j.value("width", s.width);
    s.seed = j.value("seed", s.seed);
    s.votes_per_image = j.value("votes_per_image", s.votes_per_image);
    s.volunteers = j.value("volunteers", s.volunteers);
    s.regions = j.value("regions", s.regions);
    s.noise = j.value("noise", s.noise);
    s.plan = ParseVotePlan(j.value("plan", std::string(VotePlanName(s.plan))));
    if (j.contains("planted")) {
      s.planted = {j["planted"].at(0).get<int>(), j["planted"].at(1).get<int>()};
    }
    s.identity = j.value("identity", s.identity);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, std::string("malformed synth spec: ") + e.what());
  }
  return s;
}

std::vector<std::string> StandInNames() {
  return {"box", "gaussian", "tent", "binomial", "hann", "laplace", "epanechnikov"};
}

std::vector<double> StandInKernel(MethodParam mp) {
  if (mp.method < 1 || mp.method > kMethodCount || mp.param < 1 ||
      mp.param > kParamCount) {
    Fail(ErrorKind::kRange, "no stand-in smoother for " + ToString(mp));
  }
  const int p = mp.param;
  std::vector<double> k;
  switch (mp.method) {
    case 1:  // box
      k.assign(2 * p + 1, 1.0);
      break;
    case 2: {  // gaussian
      const double sigma = 0.6 * p;
      const int r = static_cast<int>(std::ceil(3 * sigma));
      for (int i = -r; i <= r; ++i) k.push_back(std::exp(-0.5 * i * i / (sigma * sigma)));
      break;
    }
    case 3: {  // tent
      const int r = p + 1;
      for (int i = -r; i <= r; ++i) k.push_back(r + 1 - std::abs(i));
      break;
    }
    case 4: {  // binomial of order 2p
      const int n = 2 * p;
      double c = 1;
      for (int i = 0; i <= n; ++i) {
        k.push_back(c);
        c = c * (n - i) / (i + 1);
      }
      break;
    }
    case 5: {  // hann
      const int r = p + 1;
      for (int i = -r; i <= r; ++i) {
        const double c = std::cos(M_PI * i / (2.0 * (r + 1)));
        k.push_back(c * c);
      }
      break;
    }
    case 6: {  // laplace
      const double b = 0.5 * p;
      const int r = static_cast<int>(std::ceil(4 * b));
      for (int i = -r; i <= r; ++i) k.push_back(std::exp(-std::abs(i) / b));
      break;
    }
    case 7: {  // epanechnikov
      const int r = p + 1;
      for (int i = -r; i <= r; ++i) {
        const double u = static_cast<double>(i) / (r + 1);
        k.push_back(1 - u * u);
      }
      break;
    }
  }
  return Normalized(std::move(k));
}

Image StandInSmooth(const Image& image, MethodParam mp) {
  return SeparableFilter(image, StandInKernel(mp));
}

SynthImage GenerateSynthImage(const SynthSpec& spec, int index) {
  if (spec.height == 0 || spec.width == 0 || spec.regions < 1) {
    Fail(ErrorKind::kArgument, "synthetic images need positive size and regions");
  }
  auto rng = Stream(spec.seed, kImages, static_cast<uint64_t>(index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> detail(0.0, spec.noise);

  struct Site {
    double y, x;
    double rgb[3];
  };
  std::vector<Site> sites(spec.regions);
  for (Site& s : sites) {
    s.y = unit(rng) * spec.height;
    s.x = unit(rng) * spec.width;
    for (double& c : s.rgb) c = 0.1 + 0.8 * unit(rng);
  }
  SynthImage out{Image(spec.height, spec.width), Image(spec.height, spec.width)};
  for (size_t y = 0; y < spec.height; ++y) {
    for (size_t x = 0; x < spec.width; ++x) {
      size_t best = 0;
      double best_d = INFINITY;
      for (size_t i = 0; i < sites.size(); ++i) {
        const double dy = sites[i].y - y, dx = sites[i].x - x;
        const double d = dy * dy + dx * dx;
        if (d < best_d) best_d = d, best = i;
      }
      for (size_t c = 0; c < 3; ++c) {
        out.clean.at(y, x, c) = sites[best].rgb[c];
        out.source.at(y, x, c) = sites[best].rgb[c] + detail(rng);
      }
    }
  }
  out.source = Quantize8(out.source);
  return out;
}

nlohmann::json VolunteersToJson(const std::vector<Volunteer>& volunteers) {
  nlohmann::json j = nlohmann::json::array();
  for (const Volunteer& v : volunteers) j.push_back({{"id", v.id}, {"token", v.token}});
  return j;
}

std::vector<Volunteer> VolunteersFromJson(const nlohmann::json& j) {
  std::vector<Volunteer> out;
  try {
    for (const auto& v : j) out.push_back({v.at("id"), v.at("token")});
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, std::string("malformed volunteer list: ") + e.what());
  }
  return out;
}

SynthResult PlanSynthetic(const SynthSpec& spec) {
  if (spec.train_images < 0 || spec.test_images < 0 ||
      spec.train_images + spec.test_images == 0) {
    Fail(ErrorKind::kArgument, "synthetic dataset needs at least one image");
  }
  if (spec.votes_per_image < 1 || spec.volunteers < spec.votes_per_image) {
    Fail(ErrorKind::kArgument, "need at least " + std::to_string(spec.votes_per_image) +
                                   " volunteers for " +
                                   std::to_string(spec.votes_per_image) +
                                   " votes per image");
  }
  if (spec.plan == VotePlan::kPlanted &&
      (spec.planted.method < 1 || spec.planted.method > kMethodCount ||
       spec.planted.param < 1 || spec.planted.param > kParamCount)) {
    Fail(ErrorKind::kRange, "planted choice " + ToString(spec.planted) + " out of range");
  }

  SynthResult result;
  DatasetManifest& m = result.manifest;
  m.mode = DatasetMode::kSynthetic;
  m.votes_per_image = spec.votes_per_image;
  m.method_names = StandInNames();
  const int total = spec.train_images + spec.test_images;
  for (int i = 0; i < total; ++i) {
    ImageEntry e;
    e.id = i + 1;
    e.split = i < spec.train_images ? Split::kTrain : Split::kTest;
    e.source = SourcePath(e.id);
    for (int mi = 1; mi <= kMethodCount; ++mi) {
      for (int pi = 1; pi <= kParamCount; ++pi) {
        e.candidates[mi - 1][pi - 1] = CandidatePath(e.id, {mi, pi});
      }
    }
    m.images.push_back(std::move(e));
  }

  auto token_rng = Stream(spec.seed, kTokens, 0);
  for (int k = 1; k <= spec.volunteers; ++k) {
    char id[16], token[40];
    std::snprintf(id, sizeof id, "v%03d", k);
    std::snprintf(token, sizeof token, "%016llx%016llx",
                  static_cast<unsigned long long>(token_rng()),
                  static_cast<unsigned long long>(token_rng()));
    result.volunteers.push_back({id, token});
  }

  // Shared categorical distribution over the 56 cells.
  auto plan_rng = Stream(spec.seed, kPlan, 0);
  std::gamma_distribution<double> gamma(0.7, 1.0);
  std::vector<double> cell_weights(kMethodCount * kParamCount);
  for (double& w : cell_weights) w = gamma(plan_rng);
  std::discrete_distribution<size_t> categorical(cell_weights.begin(),
                                                 cell_weights.end());
  std::uniform_int_distribution<size_t> any_cell(0, cell_weights.size() - 1);
  std::bernoulli_distribution favorite(0.6);

  int64_t clock = 0;
  for (const ImageEntry& e : m.images) {
    auto rng = Stream(spec.seed, kVotes, static_cast<uint64_t>(e.id));
    std::vector<size_t> order(result.volunteers.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const size_t fav = any_cell(rng);
    for (int k = 0; k < spec.votes_per_image; ++k) {
      MethodParam choice;
      switch (spec.plan) {
        case VotePlan::kPlanted:
          choice = spec.planted;
          break;
        case VotePlan::kCategorical:
          choice = VoteTally::FromIndex(categorical(rng));
          break;
        case VotePlan::kConcentrated:
          choice = VoteTally::FromIndex(favorite(rng) ? fav : categorical(rng));
          break;
      }
      clock += 37;
      result.votes.push_back(
          {e.id, result.volunteers[order[k]].id, choice, Timestamp(clock)});
      result.planted.Add(e.id, choice);
    }
  }
  return result;
}

SynthResult GenerateSynthetic(const SynthSpec& spec, const std::string& out_dir) {
  SynthResult result = PlanSynthetic(spec);
  const fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create " + out_dir + ": " + ec.message());

  for (size_t i = 0; i < result.manifest.images.size(); ++i) {
    const ImageEntry& e = result.manifest.images[i];
    const SynthImage img = GenerateSynthImage(spec, static_cast<int>(i));
    fs::create_directories(root / "images" / std::to_string(e.id), ec);
    if (ec) Fail(ErrorKind::kIo, "cannot create image directory: " + ec.message());
    WritePng(img.source, (root / e.source).string());
    for (int mi = 1; mi <= kMethodCount; ++mi) {
      for (int pi = 1; pi <= kParamCount; ++pi) {
        const Image cand =
            spec.identity ? img.source : Quantize8(StandInSmooth(img.source, {mi, pi}));
        WritePng(cand, (root / e.candidate({mi, pi})).string());
      }
    }
  }

  WriteManifest(result.manifest, (root / "manifest.json").string());
  const fs::path log = root / result.manifest.vote_log;
  {
    std::ofstream out(log, std::ios::trunc);
    if (!out) Fail(ErrorKind::kIo, "cannot write " + log.string());
    for (const VoteRecord& v : result.votes) out << VoteRecordToLine(v) << '\n';
  }
  WriteJson(VolunteersToJson(result.volunteers), root / "volunteers.json");

  const VoteStatistics planted = ComputeVoteStatistics(result.planted);
  nlohmann::json pj = VoteStatisticsToJson(planted);
  pj["spec"] = SynthSpecToJson(spec);
  WriteJson(pj, root / "planted.json");
  return result;
}

}  // namespace epsb
