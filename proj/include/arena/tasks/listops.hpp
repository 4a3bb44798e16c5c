#pragma once

// Nested bracketed list-operation expressions over single digits: generation,
// parsing, serialization, and an exact recursive evaluator. Expressions look
// like `[MAX 4 3 [MIN 2 3] 1 0]` and always evaluate to a digit 0-9.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "arena/core/error.hpp"
#include "arena/core/rng.hpp"

namespace arena::tasks {

enum class ListOp { max_op, min_op, median_op, sum_mod_op };

inline const char* to_string(ListOp op) {
  switch (op) {
    case ListOp::max_op: return "MAX";
    case ListOp::min_op: return "MIN";
    case ListOp::median_op: return "MEDIAN";
    case ListOp::sum_mod_op: return "SUM_MOD";
  }
  return "?";
}

// One node: either a digit leaf or an operator over >= 1 operands.
struct ListOpsExpr {
  bool is_leaf = true;
  int digit = 0;
  ListOp op = ListOp::max_op;
  std::vector<ListOpsExpr> operands;

  bool operator==(const ListOpsExpr& o) const {
    if (is_leaf != o.is_leaf) return false;
    if (is_leaf) return digit == o.digit;
    return op == o.op && operands == o.operands;
  }
};

// MEDIAN of an even count is the floor of the mean of the two central values,
// keeping every result in 0-9. SUM_MOD is the operand sum mod 10.
inline int eval_listops(const ListOpsExpr& e) {
  if (e.is_leaf) return e.digit;
  if (e.operands.empty()) throw ParamError("eval_listops: operator with no operands");
  std::vector<int> vals;
  vals.reserve(e.operands.size());
  for (const auto& o : e.operands) vals.push_back(eval_listops(o));
  switch (e.op) {
    case ListOp::max_op: return *std::max_element(vals.begin(), vals.end());
    case ListOp::min_op: return *std::min_element(vals.begin(), vals.end());
    case ListOp::median_op: {
      std::sort(vals.begin(), vals.end());
      std::size_t n = vals.size();
      if (n % 2 == 1) return vals[n / 2];
      return (vals[n / 2 - 1] + vals[n / 2]) / 2;
    }
    case ListOp::sum_mod_op: {
      int s = 0;
      for (int v : vals) s += v;
      return ((s % 10) + 10) % 10;
    }
  }
  throw ParamError("eval_listops: unknown operator");
}

// Token count of the serialized form: one opener token `[OP`, one `]`, one
// token per digit leaf.
inline int serialized_length(const ListOpsExpr& e) {
  if (e.is_leaf) return 1;
  int n = 2;
  for (const auto& o : e.operands) n += serialized_length(o);
  return n;
}

inline void serialize_into(const ListOpsExpr& e, std::string& out) {
  if (!out.empty()) out.push_back(' ');
  if (e.is_leaf) {
    out.push_back(static_cast<char>('0' + e.digit));
    return;
  }
  out.push_back('[');
  out += to_string(e.op);
  for (const auto& o : e.operands) serialize_into(o, out);
  out += " ]";
}

inline std::string serialize(const ListOpsExpr& e) {
  std::string out;
  serialize_into(e, out);
  return out;
}

namespace detail {

// ']' is self-delimiting so glued closers like "2]]" tokenize as 2, ], ].
// '[' likewise starts a fresh token (its operator name attaches to it).
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> toks;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      toks.push_back(cur);
      cur.clear();
    }
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c == ']') {
      flush();
      toks.push_back("]");
    } else if (c == '[') {
      flush();
      cur.push_back('[');
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return toks;
}

inline ListOpsExpr parse_tokens(const std::vector<std::string>& toks, std::size_t& pos) {
  if (pos >= toks.size()) throw ParseError("listops: unexpected end of input at token " + std::to_string(pos));
  const std::string& t = toks[pos];
  if (t.size() == 1 && t[0] >= '0' && t[0] <= '9') {
    ++pos;
    ListOpsExpr leaf;
    leaf.is_leaf = true;
    leaf.digit = t[0] - '0';
    return leaf;
  }
  if (t.empty() || t[0] != '[')
    throw ParseError("listops: expected digit or '[OP' at token " + std::to_string(pos) + ", got '" + t + "'");
  ListOpsExpr node;
  node.is_leaf = false;
  std::string opname = t.substr(1);
  if (opname == "MAX") node.op = ListOp::max_op;
  else if (opname == "MIN") node.op = ListOp::min_op;
  else if (opname == "MEDIAN") node.op = ListOp::median_op;
  else if (opname == "SUM_MOD") node.op = ListOp::sum_mod_op;
  else throw ParseError("listops: unknown operator '" + opname + "' at token " + std::to_string(pos));
  ++pos;
  while (pos < toks.size() && toks[pos] != "]") node.operands.push_back(parse_tokens(toks, pos));
  if (pos >= toks.size()) throw ParseError("listops: missing ']' for operator opened at token " + std::to_string(pos));
  ++pos;  // consume "]"
  if (node.operands.empty())
    throw ParseError("listops: operator with no operands closing at token " + std::to_string(pos - 1));
  return node;
}

}  // namespace detail

inline ListOpsExpr parse_listops(const std::string& text) {
  std::vector<std::string> toks = detail::tokenize(text);
  if (toks.empty()) throw ParseError("listops: empty input");
  std::size_t pos = 0;
  ListOpsExpr e = detail::parse_tokens(toks, pos);
  if (pos != toks.size())
    throw ParseError("listops: trailing tokens starting at token " + std::to_string(pos));
  return e;
}

struct ListOpsSample {
  std::string tokens;  // space-separated serialized expression
  int label = 0;
};

namespace detail {

// Recursive sampling under a token budget. Each operand is a nested
// expression with probability nest_prob while depth and budget allow;
// otherwise a digit leaf. `budget` counts serialized tokens still available.
inline ListOpsExpr sample_expr(Rng& rng, int depth, int max_depth, int& budget, double nest_prob) {
  ListOpsExpr node;
  node.is_leaf = false;
  node.op = static_cast<ListOp>(rng.uniform_int(4));
  budget -= 2;  // opener + closer
  int n_operands = 2 + static_cast<int>(rng.uniform_int(4));  // 2..5
  for (int i = 0; i < n_operands && budget > 0; ++i) {
    // A nested child needs at least 3 tokens ([OP x ]).
    if (depth < max_depth && budget >= 3 && rng.bernoulli(nest_prob)) {
      node.operands.push_back(sample_expr(rng, depth + 1, max_depth, budget, nest_prob));
    } else {
      ListOpsExpr leaf;
      leaf.is_leaf = true;
      leaf.digit = static_cast<int>(rng.uniform_int(10));
      node.operands.push_back(leaf);
      budget -= 1;
    }
  }
  if (node.operands.empty()) {
    ListOpsExpr leaf;
    leaf.is_leaf = true;
    leaf.digit = static_cast<int>(rng.uniform_int(10));
    node.operands.push_back(leaf);
    budget -= 1;
  }
  return node;
}

}  // namespace detail

// Labels come from the evaluator, never from separate bookkeeping. Samples
// draw from split child streams indexed by position, so output order is
// deterministic regardless of scheduling.
inline std::vector<ListOpsSample> gen_listops(Rng& rng, int max_len, int max_depth, int n,
                                              double nest_prob = 0.25) {
  if (max_len < 5) throw ParamError("gen_listops: max_len " + std::to_string(max_len) + " < 5");
  if (max_depth < 1) throw ParamError("gen_listops: max_depth " + std::to_string(max_depth) + " < 1");
  if (n < 0) throw ParamError("gen_listops: negative n");
  std::vector<ListOpsSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng child = rng.split();
    int budget = max_len;
    ListOpsExpr e = detail::sample_expr(child, 1, max_depth, budget, nest_prob);
    out.push_back({serialize(e), eval_listops(e)});
  }
  return out;
}

// Dataset file: UTF-8, one sample per line, `tokens<TAB>label`.
inline void write_listops(const std::string& path, const std::vector<ListOpsSample>& samples) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_listops: cannot open " + path);
  for (const auto& s : samples) f << s.tokens << '\t' << s.label << '\n';
}

inline std::vector<ListOpsSample> read_listops(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_listops: cannot open " + path);
  std::vector<ListOpsSample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.rfind('\t');
    if (tab == std::string::npos)
      throw ParseError("read_listops: missing tab on line " + std::to_string(lineno));
    ListOpsSample s;
    s.tokens = line.substr(0, tab);
    try {
      s.label = std::stoi(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError("read_listops: bad label on line " + std::to_string(lineno));
    }
    if (s.label < 0 || s.label > 9)
      throw ParseError("read_listops: label out of range on line " + std::to_string(lineno));
    out.push_back(std::move(s));
  }
  return out;
}

// Fixed token-id scheme for feeding expressions to the encoder: digits 0-9
// map to 0-9, operator openers to 10-13, ']' to 14.
inline constexpr int kListOpsVocab = 15;

inline std::vector<int> listops_token_ids(const std::string& tokens) {
  std::vector<int> ids;
  for (const std::string& t : detail::tokenize(tokens)) {
    if (t.size() == 1 && t[0] >= '0' && t[0] <= '9') ids.push_back(t[0] - '0');
    else if (t == "[MAX") ids.push_back(10);
    else if (t == "[MIN") ids.push_back(11);
    else if (t == "[MEDIAN") ids.push_back(12);
    else if (t == "[SUM_MOD") ids.push_back(13);
    else if (t == "]") ids.push_back(14);
    else throw ParseError("listops_token_ids: unknown token '" + t + "'");
  }
  return ids;
}

}  // namespace arena::tasks
