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

#include <charconv>
#include <cstdio>

#include "opshield/fasttext.hpp"
#include "opshield/tensor_io.hpp"
#include "opshield/text_escape.hpp"

namespace opshield {
namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError(line_no, "invalid number '" + std::string(s) + "'");
  }
  return value;
}

}  // namespace

std::string save_vec(const EmbeddingModel& model) {
  std::string out = std::to_string(model.vocab_size()) + " " + std::to_string(model.dim()) + "\n";
  char buf[64];
  for (std::size_t i = 0; i < model.vocab_size(); ++i) {
    out += escape_token(model.vocab[i].token);
    for (Eigen::Index d = 0; d < model.input.cols(); ++d) {
      std::snprintf(buf, sizeof buf, " %.6f", model.input(static_cast<Eigen::Index>(i), d));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::string save_buckets(const EmbeddingModel& model) {
  BinaryWriter w;
  w.bytes("FTBK");
  w.u32(static_cast<std::uint32_t>(model.config.buckets));
  w.u32(static_cast<std::uint32_t>(model.dim()));
  w.u32(0);
  const auto offset = static_cast<Eigen::Index>(model.vocab_size());
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(model.config.buckets); ++r) {
    for (Eigen::Index d = 0; d < model.input.cols(); ++d) {
      w.f32(static_cast<float>(model.input(offset + r, d)));
    }
  }
  return w.take();
}

EmbeddingModel load_vec(std::string_view text, const SubwordConfig& config) {
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  if (lines.empty()) throw FormatError(1, "missing .vec header");
  auto header = split_spaces(lines[0]);
  if (header.size() != 2) throw FormatError(1, "header must be '<count> <dim>'");
  auto count = parse_number<std::size_t>(header[0], 1);
  auto dim = parse_number<std::size_t>(header[1], 1);
  if (dim == 0) throw FormatError(1, "dimension must be positive");
  if (lines.size() - 1 != count) throw FormatError(lines.size(), "row count does not match header");

  EmbeddingModel model;
  model.config = config;
  model.config.dim = dim;
  model.input = Matrix::Zero(static_cast<Eigen::Index>(count + config.buckets),
                             static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t line_no = i + 2;
    auto fields = split_spaces(lines[i + 1]);
    if (fields.size() != dim + 1) throw FormatError(line_no, "row arity does not match dimension");
    std::string token = unescape_token(fields[0]);
    if (!model.index.emplace(token, static_cast<std::int32_t>(i)).second) {
      throw FormatError(line_no, "duplicate token");
    }
    model.vocab.push_back({std::move(token), 0});
    for (std::size_t d = 0; d < dim; ++d) {
      model.input(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
          parse_number<double>(fields[d + 1], line_no);
    }
  }
  return model;
}

void load_buckets(std::string_view bytes, EmbeddingModel& model) {
  BinaryReader r(bytes);
  if (r.bytes(4) != "FTBK") throw FormatError(0, "bad bucket file magic");
  std::uint32_t buckets = r.u32();
  std::uint32_t dim = r.u32();
  r.u32();
  if (buckets != model.config.buckets || dim != model.dim()) {
    throw FormatError(0, "bucket table shape does not match the model");
  }
  const auto offset = static_cast<Eigen::Index>(model.vocab_size());
  for (Eigen::Index row = 0; row < static_cast<Eigen::Index>(buckets); ++row) {
    for (Eigen::Index d = 0; d < static_cast<Eigen::Index>(dim); ++d) {
      model.input(offset + row, d) = r.f32();
    }
  }
  if (!r.done()) throw FormatError(0, "trailing bytes in bucket file");
}

}  // namespace opshield
