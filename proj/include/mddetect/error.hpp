// Copyright 2026 The mddetect Authors
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

#ifndef MDDETECT_ERROR_HPP_
#define MDDETECT_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace mdd {

enum class ErrorKind {
  kMalformedHeader,
  kUnsupportedEncoding,
  kTruncatedData,
  kIoFailure,
  kDegenerateBank,
  kEmptyCorpus,
  kInsufficientEntries,
  kTooSmall,
  kShapeMismatch,
  kLengthMismatch,
  kClassAbsent,
  kBadConfig,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMalformedHeader: return "MalformedHeader";
    case ErrorKind::kUnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorKind::kTruncatedData: return "TruncatedData";
    case ErrorKind::kIoFailure: return "IoFailure";
    case ErrorKind::kDegenerateBank: return "DegenerateBank";
    case ErrorKind::kEmptyCorpus: return "EmptyCorpus";
    case ErrorKind::kInsufficientEntries: return "InsufficientEntries";
    case ErrorKind::kTooSmall: return "TooSmall";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kLengthMismatch: return "LengthMismatch";
    case ErrorKind::kClassAbsent: return "ClassAbsent";
    case ErrorKind::kBadConfig: return "BadConfig";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mdd

#endif  // MDDETECT_ERROR_HPP_
