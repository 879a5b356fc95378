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

#include "epsb/annotation.h"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "epsb/error.h"
#include "httplib.h"

namespace epsb {
namespace fs = std::filesystem;
namespace {

constexpr int64_t kDay = 24 * 60 * 60;

std::string ReadBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kNotFound, "missing file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void CheckChoice(MethodParam mp) {
  if (mp.method < 1 || mp.method > kMethodCount || mp.param < 1 ||
      mp.param > kParamCount) {
    Fail(ErrorKind::kRange, "choice " + std::to_string(mp.method) + "/" +
                                std::to_string(mp.param) +
                                " outside methods 1..7, settings 1..8");
  }
}

}  // namespace

int64_t SystemClock() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string IsoTimestamp(int64_t unix_seconds) {
  const std::time_t t = static_cast<std::time_t>(unix_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string Sha256Hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    Fail(ErrorKind::kIo, "sha256 digest failed");
  }
  static const char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 15];
  }
  return out;
}

std::string Sha256File(const std::string& path) { return Sha256Hex(ReadBytes(path)); }

std::map<std::string, std::vector<int>> AssignImages(
    const std::vector<int>& image_ids, const std::vector<std::string>& volunteers,
    int per_image, uint64_t seed) {
  if (per_image < 1 || static_cast<size_t>(per_image) > volunteers.size()) {
    Fail(ErrorKind::kArgument, "cannot give each image " + std::to_string(per_image) +
                                   " distinct volunteers out of " +
                                   std::to_string(volunteers.size()));
  }
  std::mt19937_64 rng(seed);
  std::vector<size_t> tiebreak(volunteers.size());
  std::iota(tiebreak.begin(), tiebreak.end(), 0);
  std::shuffle(tiebreak.begin(), tiebreak.end(), rng);
  std::vector<size_t> rank(volunteers.size());
  for (size_t i = 0; i < tiebreak.size(); ++i) rank[tiebreak[i]] = i;

  std::vector<int> load(volunteers.size(), 0);
  std::map<std::string, std::vector<int>> out;
  for (const std::string& v : volunteers) out[v];
  size_t rotation = 0;
  for (int id : image_ids) {
    std::vector<size_t> order(volunteers.size());
    std::iota(order.begin(), order.end(), 0);
    // Rotating the tie-break rank spreads images across equally loaded
    // volunteers.
    const size_t n = volunteers.size();
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (load[a] != load[b]) return load[a] < load[b];
      return (rank[a] + n - rotation % n) % n < (rank[b] + n - rotation % n) % n;
    });
    for (int k = 0; k < per_image; ++k) {
      ++load[order[k]];
      out[volunteers[order[k]]].push_back(id);
    }
    rotation += static_cast<size_t>(per_image);
  }
  return out;
}

AnnotationService::AnnotationService(DatasetManifest manifest, std::string root,
                                     std::vector<Volunteer> volunteers,
                                     ServiceOptions options)
    : manifest_(std::move(manifest)),
      root_(std::move(root)),
      volunteers_(std::move(volunteers)),
      options_(std::move(options)) {
  std::vector<std::string> ids;
  for (const Volunteer& v : volunteers_) {
    if (!token_to_id_.emplace(v.token, v.id).second) {
      Fail(ErrorKind::kValidation, "duplicate volunteer token for " + v.id);
    }
    ids.push_back(v.id);
  }
  std::vector<int> images;
  for (const ImageEntry& e : manifest_.images) images.push_back(e.id);
  assignment_ = AssignImages(images, ids, manifest_.votes_per_image, options_.seed);

  if (fs::exists(vote_log_path())) {
    for (const VoteRecord& r : ReadVoteLog(vote_log_path())) {
      Entry(r.image_id);
      if (!votes_.emplace(std::make_pair(r.volunteer, r.image_id), r).second) {
        Fail(ErrorKind::kValidation, "vote log has two votes by " + r.volunteer +
                                         " on image " + std::to_string(r.image_id));
      }
    }
  }
}

std::unique_ptr<AnnotationService> AnnotationService::Open(
    const std::string& manifest_path, const std::string& volunteers_path,
    ServiceOptions options) {
  DatasetManifest manifest = ReadManifest(manifest_path);
  std::ifstream in(volunteers_path);
  if (!in) Fail(ErrorKind::kNotFound, "cannot open volunteer list " + volunteers_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, "volunteer list is not valid JSON: " + std::string(e.what()));
  }
  return std::make_unique<AnnotationService>(
      std::move(manifest), fs::path(manifest_path).parent_path().string(),
      VolunteersFromJson(j), std::move(options));
}

std::string AnnotationService::vote_log_path() const {
  return (fs::path(root_) / manifest_.vote_log).string();
}

std::string AnnotationService::Authenticate(const std::string& token) const {
  auto it = token_to_id_.find(token);
  if (token.empty() || it == token_to_id_.end()) {
    Fail(ErrorKind::kUnauthorized, "missing or unknown bearer token");
  }
  return it->second;
}

void AnnotationService::CheckVolunteer(const std::string& volunteer) const {
  if (!assignment_.count(volunteer)) {
    Fail(ErrorKind::kNotFound, "unknown volunteer " + volunteer);
  }
}

void AnnotationService::CheckAssigned(const std::string& volunteer, int image_id) const {
  CheckVolunteer(volunteer);
  Entry(image_id);
  const auto& list = assignment_.at(volunteer);
  if (std::find(list.begin(), list.end(), image_id) == list.end()) {
    Fail(ErrorKind::kForbidden, "image " + std::to_string(image_id) +
                                    " is not assigned to " + volunteer);
  }
}

const ImageEntry& AnnotationService::Entry(int image_id) const {
  for (const ImageEntry& e : manifest_.images) {
    if (e.id == image_id) return e;
  }
  Fail(ErrorKind::kNotFound, "unknown image " + std::to_string(image_id));
}

void AnnotationService::Touch(const std::string& volunteer) {
  const int64_t now = options_.clock();
  const int64_t day = now / kDay;
  Session& s = sessions_[volunteer];
  if (s.day != day) {
    s = {day, 0, now};
  } else {
    const int64_t gap = now - s.last;
    if (gap > 0 && gap <= options_.session.idle_seconds) s.active += gap;
    s.last = std::max(s.last, now);
  }
  if (s.active >= options_.session.daily_seconds) {
    throw SessionLimitError("daily session limit of " +
                                std::to_string(options_.session.daily_seconds / 60) +
                                " minutes reached for " + volunteer,
                            (day + 1) * kDay - now);
  }
}

int64_t AnnotationService::ActiveSecondsToday(const std::string& volunteer) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(volunteer);
  if (it == sessions_.end() || it->second.day != options_.clock() / kDay) return 0;
  return it->second.active;
}

std::vector<int> AnnotationService::Assigned(const std::string& volunteer) const {
  CheckVolunteer(volunteer);
  return assignment_.at(volunteer);
}

std::vector<int> AnnotationService::Pending(const std::string& volunteer) {
  CheckVolunteer(volunteer);
  std::lock_guard lock(mu_);
  Touch(volunteer);
  std::vector<int> out;
  for (int id : assignment_.at(volunteer)) {
    if (!votes_.count({volunteer, id})) out.push_back(id);
  }
  return out;
}

GridResponse AnnotationService::Step1Grid(int image_id, int method) const {
  if (method < 1 || method > kMethodCount) {
    Fail(ErrorKind::kRange, "method " + std::to_string(method) + " outside 1..7");
  }
  const ImageEntry& e = Entry(image_id);
  auto ref = [&](int p, const std::string& rel) {
    const std::string path = (fs::path(root_) / rel).string();
    std::string hash;
    {
      std::lock_guard lock(mu_);
      auto it = hash_cache_.find(path);
      if (it != hash_cache_.end()) hash = it->second;
    }
    if (hash.empty()) {
      if (!fs::exists(path)) {
        Fail(ErrorKind::kNotFound, "image " + std::to_string(image_id) +
                                       ": missing file " + rel);
      }
      hash = Sha256File(path);
      std::lock_guard lock(mu_);
      hash_cache_[path] = hash;
    }
    return CandidateRef{p, "/static/" + rel, hash};
  };
  GridResponse g;
  g.image_id = image_id;
  g.method = method;
  g.source = ref(0, e.source);
  for (int p = 1; p <= kParamCount; ++p) {
    g.candidates.push_back(ref(p, e.candidate({method, p})));
  }
  return g;
}

void AnnotationService::PostPick(const std::string& volunteer, int image_id,
                                 MethodParam pick) {
  CheckChoice(pick);
  CheckAssigned(volunteer, image_id);
  std::lock_guard lock(mu_);
  Touch(volunteer);
  if (votes_.count({volunteer, image_id})) {
    Fail(ErrorKind::kState, "final vote for image " + std::to_string(image_id) +
                                " already recorded; picks are closed");
  }
  picks_[{volunteer, image_id}][pick.method - 1] = pick.param;
}

std::vector<MethodParam> AnnotationService::Finalists(const std::string& volunteer,
                                                      int image_id) {
  CheckAssigned(volunteer, image_id);
  std::lock_guard lock(mu_);
  Touch(volunteer);
  const Picks& picks = picks_[{volunteer, image_id}];
  std::vector<MethodParam> out;
  std::string missing;
  for (int m = 1; m <= kMethodCount; ++m) {
    if (picks[m - 1]) {
      out.push_back({m, *picks[m - 1]});
    } else {
      missing += (missing.empty() ? "" : ",") + std::to_string(m);
    }
  }
  if (!missing.empty()) {
    Fail(ErrorKind::kState, "step 2 needs a step-1 pick for every method; missing " +
                                missing);
  }
  return out;
}

VoteAck AnnotationService::PostVote(const std::string& volunteer, int image_id,
                                    MethodParam choice) {
  CheckChoice(choice);
  CheckAssigned(volunteer, image_id);
  std::lock_guard lock(mu_);
  Touch(volunteer);
  auto existing = votes_.find({volunteer, image_id});
  if (existing != votes_.end()) {
    if (existing->second.choice == choice) return {existing->second, false};
    Fail(ErrorKind::kState, "duplicate final vote by " + volunteer + " on image " +
                                std::to_string(image_id) + " (stored " +
                                ToString(existing->second.choice) + ")");
  }
  const Picks& picks = picks_[{volunteer, image_id}];
  for (int m = 1; m <= kMethodCount; ++m) {
    if (!picks[m - 1]) {
      Fail(ErrorKind::kState, "final vote before all step-1 picks; method " +
                                  std::to_string(m) + " has no pick");
    }
  }
  if (*picks[choice.method - 1] != choice.param) {
    Fail(ErrorKind::kConsistency,
         "final vote " + ToString(choice) + " is not among the step-1 picks (method " +
             std::to_string(choice.method) + " pick is p" +
             std::to_string(*picks[choice.method - 1]) + ")");
  }
  VoteRecord record{image_id, volunteer, choice, IsoTimestamp(options_.clock())};
  AppendVoteRecord(vote_log_path(), record);
  votes_.emplace(std::make_pair(volunteer, image_id), record);
  return {record, true};
}

ProgressReport AnnotationService::Progress() const {
  ProgressReport r;
  for (const ImageEntry& e : manifest_.images) r.votes[e.id] = 0;
  std::vector<VoteRecord> log;
  {
    std::lock_guard lock(mu_);
    if (fs::exists(vote_log_path())) log = ReadVoteLog(vote_log_path());
  }
  for (const VoteRecord& v : log) {
    auto it = r.votes.find(v.image_id);
    if (it != r.votes.end()) ++it->second;
  }
  r.required = manifest_.votes_per_image * static_cast<int>(manifest_.images.size());
  int done = 0;
  for (const auto& [id, n] : r.votes) {
    r.total += n;
    done += std::min(n, manifest_.votes_per_image);
  }
  r.completion = r.required > 0 ? static_cast<double>(done) / r.required : 0.0;
  return r;
}

std::string AnnotationService::ImagePath(int image_id, const std::string& file) const {
  const ImageEntry& e = Entry(image_id);
  auto matches = [&](const std::string& rel) {
    return fs::path(rel).filename().string() == file;
  };
  if (matches(e.source)) return (fs::path(root_) / e.source).string();
  for (const auto& row : e.candidates) {
    for (const std::string& rel : row) {
      if (matches(rel)) return (fs::path(root_) / rel).string();
    }
  }
  Fail(ErrorKind::kNotFound, "image " + std::to_string(image_id) + " has no file " + file);
}

std::vector<std::string> ReadInstructions(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kNotFound, "cannot open instructions file " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

namespace {

int HttpStatus(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUnauthorized: return 401;
    case ErrorKind::kForbidden: return 403;
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kState: return 409;
    case ErrorKind::kConsistency:
    case ErrorKind::kValidation: return 422;
    case ErrorKind::kRefused: return 429;
    case ErrorKind::kRange:
    case ErrorKind::kArgument:
    case ErrorKind::kFormat:
    case ErrorKind::kShape: return 400;
    default: return 500;
  }
}

void Reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename Fn>
httplib::Server::Handler Guard(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const SessionLimitError& e) {
      res.set_header("Retry-After", std::to_string(e.retry_after()));
      Reply(res, 429, {{"error", ErrorKindName(e.kind())},
                       {"message", e.what()},
                       {"retry_after", e.retry_after()}});
    } catch (const Error& e) {
      Reply(res, HttpStatus(e.kind()),
            {{"error", ErrorKindName(e.kind())}, {"message", e.what()}});
    } catch (const nlohmann::json::exception& e) {
      Reply(res, 400, {{"error", "format"}, {"message", e.what()}});
    }
  };
}

int ParseId(const std::string& s, const char* what) {
  try {
    size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  Fail(ErrorKind::kArgument, std::string("invalid ") + what + " '" + s + "'");
}

std::string Bearer(const AnnotationService& service, const httplib::Request& req) {
  const std::string h = req.get_header_value("Authorization");
  const std::string prefix = "Bearer ";
  if (h.compare(0, prefix.size(), prefix) != 0) {
    Fail(ErrorKind::kUnauthorized, "missing bearer token");
  }
  return service.Authenticate(h.substr(prefix.size()));
}

void RequireSelf(const std::string& authed, const std::string& volunteer) {
  if (authed != volunteer) {
    Fail(ErrorKind::kForbidden, "token does not belong to " + volunteer);
  }
}

nlohmann::json RecordJson(const VoteRecord& r) {
  return nlohmann::json::parse(VoteRecordToLine(r));
}

}  // namespace

void RegisterRoutes(httplib::Server& server, AnnotationService& service) {
  AnnotationService* s = &service;

  server.Get("/assignment/:volunteer", Guard([s](const httplib::Request& req,
                                                 httplib::Response& res) {
    const std::string volunteer = req.path_params.at("volunteer");
    RequireSelf(Bearer(*s, req), volunteer);
    Reply(res, 200, {{"volunteer", volunteer},
                     {"assigned", s->Assigned(volunteer)},
                     {"pending", s->Pending(volunteer)}});
  }));

  server.Get("/images/:t/grid/:m", Guard([s](const httplib::Request& req,
                                             httplib::Response& res) {
    const GridResponse g = s->Step1Grid(ParseId(req.path_params.at("t"), "image id"),
                                        ParseId(req.path_params.at("m"), "method"));
    nlohmann::json cands = nlohmann::json::array();
    for (const CandidateRef& c : g.candidates) {
      cands.push_back({{"p", c.param}, {"url", c.url}, {"sha256", c.sha256}});
    }
    res.set_header("Cache-Control", "public, max-age=3600");
    Reply(res, 200, {{"t", g.image_id},
                     {"m", g.method},
                     {"source", {{"url", g.source.url}, {"sha256", g.source.sha256}}},
                     {"candidates", cands}});
  }));

  server.Post("/picks", Guard([s](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const std::string volunteer = body.at("volunteer");
    RequireSelf(Bearer(*s, req), volunteer);
    const int t = body.at("t");
    const MethodParam pick{body.at("m").get<int>(), body.at("p").get<int>()};
    s->PostPick(volunteer, t, pick);
    Reply(res, 200, {{"volunteer", volunteer}, {"t", t}, {"m", pick.method},
                     {"p", pick.param}});
  }));

  server.Get("/finalists/:volunteer/:t", Guard([s](const httplib::Request& req,
                                                   httplib::Response& res) {
    const std::string volunteer = req.path_params.at("volunteer");
    RequireSelf(Bearer(*s, req), volunteer);
    const int t = ParseId(req.path_params.at("t"), "image id");
    nlohmann::json list = nlohmann::json::array();
    for (const MethodParam& mp : s->Finalists(volunteer, t)) {
      const GridResponse g = s->Step1Grid(t, mp.method);
      const CandidateRef& c = g.candidates[mp.param - 1];
      list.push_back({{"m", mp.method}, {"p", mp.param}, {"url", c.url},
                      {"sha256", c.sha256}});
    }
    Reply(res, 200, {{"volunteer", volunteer}, {"t", t}, {"finalists", list}});
  }));

  server.Post("/votes", Guard([s](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const std::string volunteer = body.at("volunteer");
    RequireSelf(Bearer(*s, req), volunteer);
    const VoteAck ack = s->PostVote(
        volunteer, body.at("t").get<int>(),
        {body.at("m").get<int>(), body.at("p").get<int>()});
    Reply(res, 200, {{"stored", ack.stored}, {"record", RecordJson(ack.record)}});
  }));

  server.Get("/progress", Guard([s](const httplib::Request&, httplib::Response& res) {
    const ProgressReport p = s->Progress();
    nlohmann::json images = nlohmann::json::array();
    for (const auto& [id, n] : p.votes) images.push_back({{"t", id}, {"votes", n}});
    Reply(res, 200, {{"images", images},
                     {"total", p.total},
                     {"required", p.required},
                     {"completion", p.completion}});
  }));

  server.Get("/instructions", Guard([s](const httplib::Request&, httplib::Response& res) {
    Reply(res, 200, {{"instructions", s->instructions()}});
  }));

  server.Get("/static/images/:t/:file", Guard([s](const httplib::Request& req,
                                                  httplib::Response& res) {
    const std::string path = s->ImagePath(ParseId(req.path_params.at("t"), "image id"),
                                          req.path_params.at("file"));
    const std::string bytes = ReadBytes(path);
    const std::string etag = "\"" + Sha256Hex(bytes) + "\"";
    res.set_header("ETag", etag);
    res.set_header("Cache-Control", "public, max-age=31536000, immutable");
    if (req.get_header_value("If-None-Match") == etag) {
      res.status = 304;
      return;
    }
    res.status = 200;
    res.set_content(bytes, "image/png");
  }));
}

}  // namespace epsb
