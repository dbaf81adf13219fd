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

#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <set>
#include <thread>

#include "opshield/eval.hpp"

namespace opshield::cli {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::string> sets;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Config file (falls back to $OPSHIELD_CONFIG)");
  c.seed_opt = sub->add_option("--seed", c.seed, "Seed for the embedder, trainer and split");
  sub->add_option("--jobs", c.jobs, "Worker threads for per-file work")->check(CLI::PositiveNumber);
  sub->add_option("--set", c.sets, "Override one config entry (key=value)");
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void apply_overrides(RunConfig& cfg, const Common& c) {
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed_opt && c.seed_opt->count()) cfg.set_seed(c.seed);
  cfg.validate();
}

RunConfig load_config(const Common& c) {
  std::string path = c.config;
  if (path.empty()) {
    if (const char* env = std::getenv("OPSHIELD_CONFIG"); env && *env) path = env;
  }
  RunConfig cfg;
  if (!path.empty()) cfg.merge_text(read_file(path));
  apply_overrides(cfg, c);
  return cfg;
}

OpcodeDump load_dump(const fs::path& path, bool vld) {
  const std::string text = read_file(path);
  return vld ? import_vld(text) : parse_dump(text);
}

std::string metrics_fields(const Metrics& m) {
  return "acc=" + num(m.accuracy) + " precision=" + num(m.precision) + " recall=" + num(m.recall) +
         " f1=" + num(m.f1) + " tp=" + std::to_string(m.tp) + " fp=" + std::to_string(m.fp) +
         " tn=" + std::to_string(m.tn) + " fn=" + std::to_string(m.fn);
}

// A corpus directory is extracted with the config's mode; anything else is
// read as JSON lines.
std::vector<TokenSequence> load_sequences(const fs::path& input, RunConfig& cfg, std::size_t jobs, std::ostream& err) {
  if (fs::is_directory(input)) {
    std::vector<std::string> skipped;
    auto data = extract_corpus(read_corpus(input), cfg.rules, cfg.decode, cfg.mode, &skipped, jobs);
    for (const auto& id : skipped) err << "warning: " << id << ": no instructions left after filtering\n";
    return data;
  }
  auto data = read_jsonl(read_file(input));
  if (!data.empty()) cfg.mode = data.front().mode;
  return data;
}

void require_labels(const std::vector<TokenSequence>& data) {
  for (const auto& s : data) {
    if (!s.label) throw Error(ErrorCode::EmptyDataset, "sequence " + s.source_id + " has no label");
  }
}

int cmd_parse(const std::vector<std::string>& inputs, bool vld, const std::string& out_dir, std::ostream& out,
              std::ostream& err) {
  std::size_t failed = 0;
  for (const auto& in : inputs) {
    try {
      const std::string canonical = serialize_dump(load_dump(in, vld));
      if (out_dir.empty()) {
        out << canonical;
      } else {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / (fs::path(in).stem().string() + ".odump"), canonical);
      }
    } catch (const Error& e) {
      ++failed;
      err << in << ": " << e.what() << "\n";
    }
  }
  out << "RESULT files=" << inputs.size() << " ok=" << inputs.size() - failed << " failed=" << failed << "\n";
  return failed ? kExitData : kExitOk;
}

int cmd_extract(const std::vector<std::string>& inputs, const RunConfig& cfg, const std::string& out_path,
                std::size_t jobs, std::ostream& out, std::ostream& err) {
  std::vector<LabeledDump> dumps;
  std::set<std::string> unlabeled;
  std::size_t failed = 0;
  for (const auto& in : inputs) {
    try {
      if (fs::is_directory(in)) {
        auto corpus = read_corpus(in);
        dumps.insert(dumps.end(), corpus.begin(), corpus.end());
      } else {
        dumps.push_back({fs::path(in).stem().string(), load_dump(in, false), Label::Benign});
        unlabeled.insert(dumps.back().source_id);
      }
    } catch (const Error& e) {
      ++failed;
      err << in << ": " << e.what() << "\n";
    }
  }
  std::vector<std::string> skipped;
  auto seqs = extract_corpus(dumps, cfg.rules, cfg.decode, cfg.mode, &skipped, jobs);
  for (const auto& id : skipped) err << "warning: " << id << ": no instructions left after filtering, skipped\n";
  for (auto& s : seqs) {
    if (unlabeled.count(s.source_id)) s.label.reset();
  }
  std::string jsonl;
  for (const auto& s : seqs) jsonl += to_jsonl(s) + "\n";
  const std::string result = "RESULT records=" + std::to_string(seqs.size()) +
                             " skipped=" + std::to_string(skipped.size()) + " failed=" + std::to_string(failed) +
                             " mode=" + to_string(cfg.mode) + "\n";
  if (out_path.empty()) {
    out << jsonl;
    err << result;  // stdout carries the JSON lines
  } else {
    write_file(out_path, jsonl);
    out << result;
  }
  return seqs.empty() || failed ? kExitData : kExitOk;
}

int cmd_embed(const std::string& input, RunConfig cfg, const std::string& out_path, std::size_t jobs,
              std::ostream& out, std::ostream& err) {
  const auto data = load_sequences(input, cfg, jobs, err);
  SkipgramStats stats;
  const EmbeddingModel model = train_skipgram(data, cfg.embed, &stats);
  const fs::path vec(out_path);
  write_file(vec, save_vec(model));
  write_file(fs::path(vec).replace_extension(".ftbk"), save_buckets(model));
  out << "RESULT vocab=" << model.vocab_size() << " dim=" << model.dim()
      << " loss=" << num(stats.epoch_loss.empty() ? 0.0 : stats.epoch_loss.back()) << "\n";
  return kExitOk;
}

int cmd_train(const std::string& input, RunConfig cfg, const std::string& out_dir, std::size_t jobs,
              std::ostream& out, std::ostream& err) {
  const auto data = load_sequences(input, cfg, jobs, err);
  require_labels(data);
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no labelled sequences to train on");
  const DatasetSplit split = split_dataset(data, cfg.split);
  const EmbeddingModel embed = train_skipgram(split.train, cfg.embed);
  const TrainResult result = train(split.train, split.val, embed, cfg.encoder, cfg.fusion, cfg.train);

  save_model(result.model, out_dir, "mode=" + std::string(to_string(cfg.mode)) + "\n");
  write_file(fs::path(out_dir) / "config.txt", cfg.to_text());
  std::string history = "epoch,train_loss,val_acc,val_f1\n";
  for (const auto& h : result.history) {
    history += std::to_string(h.epoch) + "," + num(h.train_loss) + "," + num(h.val_acc) + "," + num(h.val_f1) + "\n";
    out << "epoch " << h.epoch << " train_loss=" << num(h.train_loss) << " val_acc=" << num(h.val_acc)
        << " val_f1=" << num(h.val_f1) << "\n";
  }
  write_file(fs::path(out_dir) / "history.csv", history);

  out << "RESULT train=" << split.train.size() << " val=" << split.val.size() << " test=" << split.test.size()
      << " epochs=" << result.history.size();
  if (!result.history.empty()) {
    const auto& last = result.history.back();
    out << " train_loss=" << num(last.train_loss) << " val_acc=" << num(last.val_acc)
        << " val_f1=" << num(last.val_f1);
  }
  out << "\n";
  return kExitOk;
}

RunConfig model_config(const fs::path& model_dir, const Common& c) {
  RunConfig cfg;
  cfg.merge_text(read_file(model_dir / "config.txt"));
  std::string path = c.config;
  if (path.empty()) {
    if (const char* env = std::getenv("OPSHIELD_CONFIG"); env && *env) path = env;
  }
  if (!path.empty()) cfg.merge_text(read_file(path));
  apply_overrides(cfg, c);
  return cfg;
}

int cmd_eval(const std::string& model_dir, const std::string& input, bool all, const Common& c, std::ostream& out,
             std::ostream& err) {
  RunConfig cfg = model_config(model_dir, c);
  const TrainedModel model = load_model(model_dir);
  const auto data = load_sequences(input, cfg, c.jobs, err);
  require_labels(data);
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "nothing to evaluate");
  const auto scored = all ? data : split_dataset(data, cfg.split).test;
  const Metrics m = evaluate(model, scored);
  out << "RESULT n=" << m.total() << " " << metrics_fields(m) << "\n";
  return kExitOk;
}

int cmd_predict(const std::string& model_dir, const std::vector<std::string>& inputs, bool vld, const Common& c,
                std::ostream& out, std::ostream& err) {
  const RunConfig cfg = model_config(model_dir, c);
  const TrainedModel model = load_model(model_dir);
  std::size_t failed = 0, webshells = 0;
  Prediction last;
  for (const auto& in : inputs) {
    try {
      const auto seq = extract_sequence(load_dump(in, vld), cfg.rules, cfg.decode, cfg.mode);
      last = predict(model, seq.tokens);
      if (last.label == Label::Webshell) ++webshells;
      if (inputs.size() > 1) {
        out << in << " prob=" << num(last.probability)
            << " label=" << (last.label == Label::Webshell ? "webshell" : "benign") << "\n";
      }
    } catch (const Error& e) {
      ++failed;
      err << in << ": " << e.what() << "\n";
    }
  }
  if (inputs.size() == 1 && !failed) {
    out << "RESULT prob=" << num(last.probability)
        << " label=" << (last.label == Label::Webshell ? "webshell" : "benign") << "\n";
  } else {
    out << "RESULT files=" << inputs.size() << " webshell=" << webshells
        << " benign=" << inputs.size() - failed - webshells << " failed=" << failed << "\n";
  }
  return failed ? kExitData : kExitOk;
}

int cmd_gen(const Common& c, std::size_t benign, std::size_t malicious, const std::string& out_dir,
            std::ostream& out) {
  const RunConfig cfg = load_config(c);
  const auto corpus = gen_corpus(cfg.split.seed, benign, malicious);
  write_corpus(out_dir, corpus);
  out << "RESULT samples=" << corpus.size() << " benign=" << benign << " malicious=" << malicious
      << " seed=" << cfg.split.seed << " overlap=" << num(opcode_overlap(corpus)) << "\n";
  return kExitOk;
}

int cmd_ablate(const std::string& input, const RunConfig& cfg, const std::string& csv_path, std::ostream& out,
               std::ostream& err) {
  const AblationReport report = run_ablation(read_corpus(input), cfg);
  if (report.warning) err << "warning: " << *report.warning << "\n";
  out << ablation_table(report);
  if (csv_path.empty()) {
    out << ablation_csv(report);
  } else {
    write_file(csv_path, ablation_csv(report));
  }
  out << "RESULT odt_acc=" << num(report.odt.accuracy) << " ost_acc=" << num(report.ost.accuracy)
      << " delta=" << num(report.delta) << " odt_f1=" << num(report.odt.f1) << " ost_f1=" << num(report.ost.f1)
      << "\n";
  return kExitOk;
}

int cmd_lambda(const std::string& input, RunConfig cfg, std::size_t jobs, std::ostream& out, std::ostream& err) {
  const auto data = load_sequences(input, cfg, jobs, err);
  require_labels(data);
  const LambdaSearch search = run_lambda_search(data, cfg);
  out << "lambda,val_acc,val_f1\n";
  for (const auto& row : search.rows) {
    out << num(row.lambda) << "," << num(row.val.accuracy) << "," << num(row.val.f1) << "\n";
  }
  out << "RESULT best_lambda=" << num(search.best_lambda) << " candidates=" << search.rows.size() << "\n";
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  return code == ErrorCode::InvalidConfig ? kExitUsage : kExitData;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Webshell detection from PHP opcode dumps", "opshield"};
  app.require_subcommand(1);

  Common common;
  std::vector<std::string> inputs;
  std::string output, mode, csv_path, model_dir, input, grid;
  bool vld = false, all = false;
  std::size_t benign = 500, malicious = 500;

  auto* parse = app.add_subcommand("parse", "Parse dumps (or VLD output) into canonical .odump");
  parse->add_flag("--vld", vld, "Inputs are VLD opcode listings");
  parse->add_option("-o,--output", output, "Output directory (default: standard output)");
  parse->add_option("inputs", inputs, "Input files")->required();
  add_common(parse, common);

  auto* extract = app.add_subcommand("extract", "Extract token sequences as JSON lines");
  extract->add_option("--mode", mode, "odt or ost")->check(CLI::IsMember({"odt", "ost"}));
  extract->add_option("-o,--output", output, "Output file (default: standard output)");
  extract->add_option("inputs", inputs, ".odump files or corpus directories")->required();
  add_common(extract, common);

  auto* embed = app.add_subcommand("embed", "Train the subword embedder");
  embed->add_option("input", input, "Corpus directory or JSONL file")->required();
  embed->add_option("-o,--output", output, "Output .vec path (a .ftbk sidecar is written next to it)")->required();
  add_common(embed, common);

  auto* train_cmd = app.add_subcommand("train", "Train a classifier on a labelled corpus");
  train_cmd->add_option("input", input, "Corpus directory or labelled JSONL file")->required();
  train_cmd->add_option("-o,--output", output, "Model directory")->required();
  train_cmd->add_option("--mode", mode, "odt or ost")->check(CLI::IsMember({"odt", "ost"}));
  add_common(train_cmd, common);

  auto* eval = app.add_subcommand("eval", "Score a model on the held-out split of a corpus");
  eval->add_option("model", model_dir, "Model directory")->required();
  eval->add_option("input", input, "Corpus directory or labelled JSONL file")->required();
  eval->add_flag("--all", all, "Score every sample instead of the test split");
  add_common(eval, common);

  auto* predict_cmd = app.add_subcommand("predict", "Classify dump files");
  predict_cmd->add_option("model", model_dir, "Model directory")->required();
  predict_cmd->add_option("inputs", inputs, "Dump files")->required();
  predict_cmd->add_flag("--vld", vld, "Inputs are VLD opcode listings");
  add_common(predict_cmd, common);

  auto* gen = app.add_subcommand("gen", "Generate a synthetic labelled corpus");
  gen->add_option("--benign", benign, "Benign samples")->check(CLI::PositiveNumber);
  gen->add_option("--malicious", malicious, "Malicious samples")->check(CLI::PositiveNumber);
  gen->add_option("-o,--output", output, "Corpus directory")->required();
  add_common(gen, common);

  auto* ablate = app.add_subcommand("ablate", "Compare ODT and OST extraction");
  ablate->add_option("input", input, "Corpus directory")->required();
  ablate->add_option("--csv", csv_path, "Write the CSV report here");
  add_common(ablate, common);

  auto* lambda = app.add_subcommand("lambda", "Grid-search the fusion weight");
  lambda->add_option("input", input, "Corpus directory or labelled JSONL file")->required();
  lambda->add_option("--grid", grid, "Comma-separated candidates");
  add_common(lambda, common);

  std::vector<const char*> argv{"opshield"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (parse->parsed()) return cmd_parse(inputs, vld, output, out, err);
    if (predict_cmd->parsed()) return cmd_predict(model_dir, inputs, vld, common, out, err);
    if (eval->parsed()) return cmd_eval(model_dir, input, all, common, out, err);
    if (gen->parsed()) return cmd_gen(common, benign, malicious, output, out);

    RunConfig cfg = load_config(common);
    if (!mode.empty()) cfg.mode = parse_mode(mode);
    if (!grid.empty()) {
      cfg.lambda_grid = parse_double_list(grid);
      cfg.validate();
    }
    if (extract->parsed()) return cmd_extract(inputs, cfg, output, common.jobs, out, err);
    if (embed->parsed()) return cmd_embed(input, cfg, output, common.jobs, out, err);
    if (train_cmd->parsed()) return cmd_train(input, cfg, output, common.jobs, out, err);
    if (ablate->parsed()) return cmd_ablate(input, cfg, csv_path, out, err);
    if (lambda->parsed()) return cmd_lambda(input, cfg, common.jobs, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace opshield::cli
