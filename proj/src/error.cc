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

#include "epsb/error.h"

namespace epsb {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kNotFound: return "not-found";
    case ErrorKind::kRange: return "range";
    case ErrorKind::kState: return "state";
    case ErrorKind::kConsistency: return "consistency";
    case ErrorKind::kRefused: return "refused";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kArgument: return "argument";
    case ErrorKind::kUnauthorized: return "unauthorized";
    case ErrorKind::kForbidden: return "forbidden";
  }
  return "unknown";
}

}  // namespace epsb
