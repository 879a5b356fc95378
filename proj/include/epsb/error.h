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

#ifndef EPSB_ERROR_H_
#define EPSB_ERROR_H_

#include <stdexcept>
#include <string>

namespace epsb {

// Broad error category. The CLI maps these onto exit codes.
enum class ErrorKind {
  kShape,         // tensor/image extents disagree
  kValidation,    // dataset or vote-log invariant violated
  kFormat,        // malformed or wrong-version file
  kIo,            // file could not be opened/read/written
  kNotFound,      // unknown id, missing file or tensor
  kRange,         // index outside its domain (method, parameter, ...)
  kState,         // operation invoked in the wrong state or order
  kConsistency,   // request contradicts previously stored data
  kRefused,       // policy refusal (session time exceeded)
  kNumeric,       // non-finite value encountered
  kArgument,      // invalid argument value
  kUnauthorized,  // missing or unknown credentials
  kForbidden,     // credentials valid but not allowed for this resource
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace epsb

#endif  // EPSB_ERROR_H_
