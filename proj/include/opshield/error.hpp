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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opshield {

enum class ErrorCode {
  Format,
  EmptyInput,
  EmptySequence,
  EmptyCorpus,
  EmptyDataset,
  SingleClassDataset,
  TooFewSamples,
  LengthMismatch,
  DimMismatch,
  InvalidConfig,
  TokenOutOfRange,
  SequenceTooLong,
  Io,
};

const char* to_string(ErrorCode code);

/// Base class of every error raised by the library. The code lets callers
/// (the CLI in particular) map failures onto exit statuses without string
/// matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed input text. line_no is 1-based; 0 means "not tied to a line".
class FormatError : public Error {
 public:
  FormatError(std::size_t line_no, std::string reason)
      : Error(ErrorCode::Format,
              "line " + std::to_string(line_no) + ": " + reason),
        line_no_(line_no),
        reason_(std::move(reason)) {}

  std::size_t line_no() const noexcept { return line_no_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_no_;
  std::string reason_;
};

}  // namespace opshield
