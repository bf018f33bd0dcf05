// src/error.cc


// Copyright 2026  The varisep Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "varisep/error.h"

namespace varisep {

const char *ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kMissingFile: return "missing_file";
    case ErrorCode::kMultiChannel: return "multi_channel";
    case ErrorCode::kUnsupportedEncoding: return "unsupported_encoding";
    case ErrorCode::kMalformedFile: return "malformed_file";
    case ErrorCode::kUnwritable: return "unwritable";
    case ErrorCode::kLengthMismatch: return "length_mismatch";
    case ErrorCode::kZeroEnergy: return "zero_energy";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kCountMismatch: return "count_mismatch";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kTooShort: return "too_short";
    case ErrorCode::kDivergence: return "divergence";
  }
  return "unknown";
}

}  // namespace varisep
