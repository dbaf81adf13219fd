// Copyright 2026 The OpShield Authors
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

#include "opshield/error.hpp"

namespace opshield {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Format: return "FormatError";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::SingleClassDataset: return "SingleClassDataset";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::TokenOutOfRange: return "TokenOutOfRange";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::Io: return "IoError";
  }
  return "Error";
}

}  // namespace opshield
