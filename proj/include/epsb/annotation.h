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

// Annotation backend for the two-step selection protocol.
//
// Step 1: for each of the 7 methods a volunteer picks one of the 8
// settings. Step 2: the volunteer picks one of those 7 finalists, which is
// appended to the vote log before the request is acknowledged.
//
// HTTP interface (JSON bodies, bearer token = volunteer token):
//   GET  /assignment/:volunteer        pending and assigned image ids
//   GET  /images/:t/grid/:m            source + 8 candidates, with sha256
//   POST /picks                        {"volunteer","t","m","p"}
//   GET  /finalists/:volunteer/:t      the 7 step-1 picks
//   POST /votes                        {"volunteer","t","m","p"}
//   GET  /progress                     per-image counts from the vote log
//   GET  /instructions                 operator-supplied instruction list
//   GET  /static/images/:t/:file       image bytes, ETag = sha256
// Errors: {"error": kind, "message": text}; 400 bad request or range,
// 401 missing/unknown token, 403 token/volunteer mismatch or unassigned
// image, 404 unknown entity, 409 out-of-order step or duplicate vote,
// 422 inconsistent vote, 429 session limit (Retry-After header).

#ifndef EPSB_ANNOTATION_H_
#define EPSB_ANNOTATION_H_

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "epsb/dataset.h"
#include "epsb/error.h"
#include "epsb/groundtruth.h"
#include "epsb/synth.h"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace epsb {

// Seconds since the Unix epoch.
using ClockFn = std::function<int64_t()>;
int64_t SystemClock();
std::string IsoTimestamp(int64_t unix_seconds);

std::string Sha256Hex(const std::string& bytes);
std::string Sha256File(const std::string& path);

// Each image gets `per_image` distinct volunteers. Images are visited in
// order; each takes the least-loaded volunteers, ties broken by a seeded
// permutation.
std::map<std::string, std::vector<int>> AssignImages(
    const std::vector<int>& image_ids, const std::vector<std::string>& volunteers,
    int per_image, uint64_t seed);

struct SessionLimit {
  int64_t daily_seconds = 60 * 60;
  // Gaps between requests longer than this are not counted as active.
  int64_t idle_seconds = 5 * 60;
};

struct ServiceOptions {
  uint64_t seed = 1;
  SessionLimit session;
  std::vector<std::string> instructions;
  ClockFn clock = SystemClock;
};

struct CandidateRef {
  int param = 0;
  std::string url;
  std::string sha256;
};

struct GridResponse {
  int image_id = 0;
  int method = 0;
  CandidateRef source;
  std::vector<CandidateRef> candidates;  // p = 1..8
};

struct VoteAck {
  VoteRecord record;
  bool stored = false;  // false when the call repeated an existing vote
};

struct ProgressReport {
  std::map<int, int> votes;  // image id -> count
  int total = 0;
  int required = 0;
  double completion = 0;
};

class AnnotationService {
 public:
  AnnotationService(DatasetManifest manifest, std::string root,
                    std::vector<Volunteer> volunteers, ServiceOptions options);

  // Loads manifest.json and volunteers.json from a dataset directory.
  static std::unique_ptr<AnnotationService> Open(const std::string& manifest_path,
                                const std::string& volunteers_path,
                                ServiceOptions options);

  // Volunteer id for a bearer token; throws kUnauthorized if unknown.
  std::string Authenticate(const std::string& token) const;

  std::vector<int> Assigned(const std::string& volunteer) const;
  std::vector<int> Pending(const std::string& volunteer);

  GridResponse Step1Grid(int image_id, int method) const;

  void PostPick(const std::string& volunteer, int image_id, MethodParam pick);
  std::vector<MethodParam> Finalists(const std::string& volunteer, int image_id);
  VoteAck PostVote(const std::string& volunteer, int image_id, MethodParam choice);

  ProgressReport Progress() const;

  // Active seconds used today; refused requests are not counted.
  int64_t ActiveSecondsToday(const std::string& volunteer) const;

  const std::vector<std::string>& instructions() const {
    return options_.instructions;
  }
  const DatasetManifest& manifest() const { return manifest_; }
  std::string vote_log_path() const;
  // Absolute path of an image under the dataset, or kNotFound.
  std::string ImagePath(int image_id, const std::string& file) const;

 private:
  struct Session {
    int64_t day = -1;
    int64_t active = 0;
    int64_t last = 0;
  };
  using Picks = std::array<std::optional<int>, kMethodCount>;

  void CheckVolunteer(const std::string& volunteer) const;
  void CheckAssigned(const std::string& volunteer, int image_id) const;
  const ImageEntry& Entry(int image_id) const;
  // Accounts the request and throws kRefused if the limit is exhausted.
  void Touch(const std::string& volunteer);

  DatasetManifest manifest_;
  std::string root_;
  std::vector<Volunteer> volunteers_;
  ServiceOptions options_;
  std::map<std::string, std::vector<int>> assignment_;
  std::map<std::string, std::string> token_to_id_;

  mutable std::mutex mu_;
  std::map<std::pair<std::string, int>, Picks> picks_;
  std::map<std::pair<std::string, int>, VoteRecord> votes_;
  std::map<std::string, Session> sessions_;
  mutable std::map<std::string, std::string> hash_cache_;
};

// Thrown for session-limit refusals; carries the retry delay.
class SessionLimitError : public Error {
 public:
  SessionLimitError(const std::string& message, int64_t retry_after)
      : Error(ErrorKind::kRefused, message), retry_after_(retry_after) {}
  int64_t retry_after() const { return retry_after_; }

 private:
  int64_t retry_after_;
};

void RegisterRoutes(httplib::Server& server, AnnotationService& service);

std::vector<std::string> ReadInstructions(const std::string& path);

}  // namespace epsb

#endif  // EPSB_ANNOTATION_H_
