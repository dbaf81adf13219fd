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

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "opshield/classifier.hpp"
#include "opshield/tensor_io.hpp"
#include "opshield/text_escape.hpp"

namespace opshield {
namespace {

constexpr std::uint32_t kHeadFormatVersion = 1;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::map<std::string, std::string> parse_manifest(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::size_t line_no = 0;
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError(line_no, "manifest line without '='");
    kv[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
  }
  return kv;
}

const std::string& need(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw FormatError(0, "manifest is missing '" + key + "'");
  return it->second;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void save_model(const TrainedModel& model, const std::filesystem::path& dir, const std::string& extra_manifest) {
  std::filesystem::create_directories(dir);
  write_file(dir / "encoder.swae", save_encoder(model.encoder, model.encoder_config));

  BinaryWriter head;
  head.bytes("OSHD");
  head.u32(kHeadFormatVersion);
  for (const auto& t : model.head.tensors()) head.tensor(t.name, *t.value, t.rank);
  if (model.has_projection()) head.tensor("projection", model.projection);
  write_file(dir / "head.bin", head.data());

  std::string vocab;
  for (const auto& tok : model.vocab.tokens) vocab += escape_token(tok) + "\n";
  write_file(dir / "vocab.txt", vocab);

  write_file(dir / "embed.vec", save_vec(model.embed));
  write_file(dir / "embed.ftbk", save_buckets(model.embed));

  const auto& ec = model.embed.config;
  std::string manifest = "format=opshield-model\nversion=1\n";
  manifest += "lambda=" + format_double(model.fusion.lambda) + "\n";
  manifest += "head_hidden=" + std::to_string(model.head.w1.cols()) + "\n";
  manifest += "projection=" + std::string(model.has_projection() ? "1" : "0") + "\n";
  manifest += "embed_dim=" + std::to_string(ec.dim) + "\n";
  manifest += "embed_minn=" + std::to_string(ec.minn) + "\n";
  manifest += "embed_maxn=" + std::to_string(ec.maxn) + "\n";
  manifest += "embed_buckets=" + std::to_string(ec.buckets) + "\n";
  manifest += extra_manifest;
  write_file(dir / "manifest.txt", manifest);
}

TrainedModel load_model(const std::filesystem::path& dir) {
  const auto kv = parse_manifest(read_file(dir / "manifest.txt"));
  if (need(kv, "format") != "opshield-model" || need(kv, "version") != "1") {
    throw FormatError(0, "unsupported model manifest");
  }
  TrainedModel model;
  try {
    model.fusion.lambda = std::stod(need(kv, "lambda"));
    SubwordConfig ec;
    ec.dim = std::stoul(need(kv, "embed_dim"));
    ec.minn = std::stoi(need(kv, "embed_minn"));
    ec.maxn = std::stoi(need(kv, "embed_maxn"));
    ec.buckets = std::stoul(need(kv, "embed_buckets"));
    model.embed = load_vec(read_file(dir / "embed.vec"), ec);
    load_buckets(read_file(dir / "embed.ftbk"), model.embed);
    const auto hidden = std::stoul(need(kv, "head_hidden"));
    load_encoder(read_file(dir / "encoder.swae"), model.encoder, model.encoder_config);
    model.head = ClassifierHead::zeros(model.encoder_config.d_model, hidden);
    const std::string head_bytes = read_file(dir / "head.bin");
    BinaryReader head(head_bytes);
    if (head.bytes(4) != "OSHD" || head.u32() != kHeadFormatVersion) throw FormatError(0, "bad head file header");
    for (auto& t : model.head.tensors()) head.tensor(t.name, *t.value);
    if (need(kv, "projection") == "1") {
      model.projection = Matrix::Zero(static_cast<Eigen::Index>(ec.dim),
                                      static_cast<Eigen::Index>(model.encoder_config.d_model));
      head.tensor("projection", model.projection);
    }
    if (!head.done()) throw FormatError(0, "trailing bytes in head file");
  } catch (const std::logic_error&) {
    throw FormatError(0, "invalid number in model manifest");
  }
  std::vector<std::string> tokens;
  const std::string vocab = read_file(dir / "vocab.txt");
  for (std::size_t pos = 0; pos < vocab.size();) {
    std::size_t nl = vocab.find('\n', pos);
    if (nl == std::string::npos) nl = vocab.size();
    tokens.push_back(unescape_token(std::string_view(vocab).substr(pos, nl - pos)));
    pos = nl + 1;
  }
  if (tokens.size() != model.encoder_config.vocab_size) throw FormatError(0, "vocabulary size mismatch");
  model.vocab = TokenVocab::from_tokens(std::move(tokens));
  model.fusion.validate();
  return model;
}

std::string read_manifest_value(const std::filesystem::path& dir, const std::string& key) {
  const auto kv = parse_manifest(read_file(dir / "manifest.txt"));
  return need(kv, key);
}

}  // namespace opshield
