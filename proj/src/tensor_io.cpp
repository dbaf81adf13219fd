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

#include "opshield/tensor_io.hpp"

#include <bit>
#include <cstring>

#include "opshield/error.hpp"

namespace opshield {

void BinaryWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_ += static_cast<char>((v >> (8 * i)) & 0xff);
}

void BinaryWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void BinaryWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.append(s);
}

void BinaryWriter::tensor(std::string_view name, const Matrix& m, std::uint32_t rank) {
  str(name);
  u32(rank);
  if (rank == 1) {
    u32(static_cast<std::uint32_t>(m.size()));
  } else {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
  }
  for (Eigen::Index i = 0; i < m.size(); ++i) f32(static_cast<float>(m.data()[i]));
}

std::string_view BinaryReader::bytes(std::size_t n) {
  if (in_.size() - pos_ < n) throw FormatError(0, "unexpected end of binary data");
  auto out = in_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t BinaryReader::u32() {
  auto b = bytes(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
  return v;
}

float BinaryReader::f32() { return std::bit_cast<float>(u32()); }

std::string BinaryReader::str() {
  std::uint32_t n = u32();
  return std::string(bytes(n));
}

void BinaryReader::tensor(std::string_view name, Matrix& expected) {
  std::string got = str();
  if (got != name) throw FormatError(0, "expected tensor '" + std::string(name) + "', found '" + got + "'");
  std::uint32_t rank = u32();
  std::uint64_t rows = 1;
  std::uint64_t cols = 0;
  if (rank == 1) {
    cols = u32();
  } else if (rank == 2) {
    rows = u32();
    cols = u32();
  } else {
    throw FormatError(0, "unsupported tensor rank for " + got);
  }
  if (rows * cols != static_cast<std::uint64_t>(expected.size()) ||
      (rank == 2 && (rows != static_cast<std::uint64_t>(expected.rows()) ||
                     cols != static_cast<std::uint64_t>(expected.cols())))) {
    throw FormatError(0, "shape mismatch for tensor " + got);
  }
  for (Eigen::Index i = 0; i < expected.size(); ++i) expected.data()[i] = f32();
}

}  // namespace opshield
