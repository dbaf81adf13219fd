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

#include <cstdint>
#include <string>
#include <string_view>

#include "opshield/tensor.hpp"

namespace opshield {

/// Little-endian binary writer used by the FTBK, SWAE and head files.
class BinaryWriter {
 public:
  void u32(std::uint32_t v);
  void f32(float v);
  void bytes(std::string_view b) { out_.append(b); }
  void str(std::string_view s);  // u32 length + bytes

  /// name-length/name, u32 rank, u32 dims..., float32 data (row-major).
  /// Rank 1 writes a single dimension of size cols (rows must be 1).
  void tensor(std::string_view name, const Matrix& m, std::uint32_t rank = 2);

  const std::string& data() const { return out_; }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::string_view in) : in_(in) {}

  std::uint32_t u32();
  float f32();
  std::string_view bytes(std::size_t n);
  std::string str();

  /// Reads a tensor record and checks its name and shape against `expected`.
  void tensor(std::string_view name, Matrix& expected);

  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace opshield
