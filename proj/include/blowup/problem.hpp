#pragma once

// Problem-file format: a small TOML-like subset.
//
//   [problem]            name, vars, alpha, k
//   [field]              one expression per variable (split derived by weight)
//   [field.quasi]        explicit quasi part     (alternative to [field],
//   [field.residual]     explicit residual part   both sections required)
//   [params]             numeric parameter bindings used inside expressions
//   [analysis]           order, seeds, bind, tol_newton, tau_hyp
//
// Entries are `key = value`, separated by newlines or ';'.  Values are
// numbers, "strings", [lists] (possibly nested), or {inline = tables}.
// '#' starts a comment outside strings.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blowup/errors.hpp"
#include "blowup/expr.hpp"
#include "blowup/vector_field.hpp"

namespace blowup {

struct AnalysisOptions {
  int order = 3;
  std::vector<std::vector<double>> seeds;
  std::map<std::string, double> bind;  // e.g. {"C1", 0.5}
  double tol_newton = 1e-12;
  double tau_hyp = 1e-8;
};

struct ProblemSpec {
  std::string name = "problem";
  std::vector<std::string> vars;
  QhType type;
  std::vector<std::string> field_raw;     // [field]
  std::vector<std::string> quasi_raw;     // [field.quasi]
  std::vector<std::string> residual_raw;  // [field.residual]
  bool explicit_split = false;
  ParamMap params;
  AnalysisOptions analysis;
};

namespace detail {

struct TomlValue {
  enum class Type { Num, Str, List, Table } type = Type::Num;
  double num = 0.0;
  std::string str;
  std::vector<TomlValue> list;
  std::vector<std::pair<std::string, TomlValue>> table;
};

class TomlScanner {
 public:
  explicit TomlScanner(std::string_view s) : s_(s) {}

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool done() {
    skip_ws();
    return pos_ >= s_.size();
  }
  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }
  char take() { return s_[pos_++]; }
  void expect(char c, const std::string& where) {
    if (peek() != c)
      throw ProblemFormatError("expected '" + std::string(1, c) + "' in " +
                               where);
    take();
  }

  std::string ident() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) ||
            s_[pos_] == '_'))
      ++pos_;
    if (start == pos_)
      throw ProblemFormatError("expected an identifier near '" +
                               std::string(s_.substr(pos_, 8)) + "'");
    return std::string(s_.substr(start, pos_ - start));
  }

  TomlValue value() {
    char c = peek();
    if (c == '"') return string_value();
    if (c == '[') return list_value();
    if (c == '{') return table_value();
    return number_value();
  }

 private:
  TomlValue string_value() {
    take();  // opening quote
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') out += s_[pos_++];
    if (pos_ >= s_.size())
      throw ProblemFormatError("unterminated string");
    take();
    TomlValue v;
    v.type = TomlValue::Type::Str;
    v.str = std::move(out);
    return v;
  }
  TomlValue list_value() {
    take();
    TomlValue v;
    v.type = TomlValue::Type::List;
    if (peek() == ']') {
      take();
      return v;
    }
    while (true) {
      v.list.push_back(value());
      char c = peek();
      if (c == ',') {
        take();
        continue;
      }
      expect(']', "list");
      return v;
    }
  }
  TomlValue table_value() {
    take();
    TomlValue v;
    v.type = TomlValue::Type::Table;
    if (peek() == '}') {
      take();
      return v;
    }
    while (true) {
      std::string key = ident();
      expect('=', "inline table");
      v.table.emplace_back(key, value());
      char c = peek();
      if (c == ',') {
        take();
        continue;
      }
      expect('}', "inline table");
      return v;
    }
  }
  TomlValue number_value() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isdigit(static_cast<unsigned char>(s_[pos_])) ||
            s_[pos_] == '.' || s_[pos_] == '+' || s_[pos_] == '-' ||
            s_[pos_] == 'e' || s_[pos_] == 'E'))
      ++pos_;
    std::string text(s_.substr(start, pos_ - start));
    char* end = nullptr;
    double parsed = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size())
      throw ProblemFormatError("malformed number '" + text + "'");
    TomlValue v;
    v.num = parsed;
    return v;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

// Strips comments and splits the document into (section, key, value) entries.
struct RawEntry {
  std::string section, key;
  TomlValue value;
};

inline std::vector<RawEntry> scan_document(std::string_view text) {
  std::vector<RawEntry> entries;
  std::string section;
  auto flush_line = [&](const std::string& raw) {
    // split on ';' outside strings/brackets
    std::vector<std::string> parts;
    std::string cur;
    int depth = 0;
    bool instr = false;
    for (char c : raw) {
      if (instr) {
        if (c == '"') instr = false;
        cur += c;
      } else if (c == '"') {
        instr = true;
        cur += c;
      } else if (c == '[' || c == '{') {
        ++depth;
        cur += c;
      } else if (c == ']' || c == '}') {
        --depth;
        cur += c;
      } else if (c == ';' && depth == 0) {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    parts.push_back(cur);
    for (auto& p : parts) {
      TomlScanner sc(p);
      if (sc.done()) continue;
      if (sc.peek() == '[') {
        sc.take();
        std::string name = sc.ident();
        if (sc.peek() == '.') {
          sc.take();
          name += "." + sc.ident();
        }
        sc.expect(']', "section header");
        if (!sc.done())
          throw ProblemFormatError("unexpected input after [" + name + "]");
        section = name;
        continue;
      }
      std::string key = sc.ident();
      sc.expect('=', "entry '" + key + "'");
      TomlValue v = sc.value();
      if (!sc.done())
        throw ProblemFormatError("unexpected input after value of '" + key +
                                 "'");
      if (section.empty())
        throw ProblemFormatError("entry '" + key +
                                 "' appears before any [section]");
      entries.push_back({section, key, std::move(v)});
    }
  };
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    std::string_view line = nl == std::string_view::npos
                                ? text.substr(start)
                                : text.substr(start, nl - start);
    std::string stripped;
    bool instr = false;
    for (char c : line) {
      if (c == '"') instr = !instr;
      if (c == '#' && !instr) break;
      if (c != '\r') stripped += c;
    }
    flush_line(stripped);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return entries;
}

inline double num_of(const TomlValue& v, const std::string& what) {
  if (v.type != TomlValue::Type::Num)
    throw ProblemFormatError(what + " must be a number");
  return v.num;
}
inline std::string str_of(const TomlValue& v, const std::string& what) {
  if (v.type != TomlValue::Type::Str)
    throw ProblemFormatError(what + " must be a string");
  return v.str;
}

}  // namespace detail

inline ProblemSpec parse_problem(std::string_view text,
                                 std::string_view fallback_name = {}) {
  using detail::TomlValue;
  ProblemSpec spec;
  if (!fallback_name.empty()) spec.name = std::string(fallback_name);
  std::map<std::string, std::vector<std::pair<std::string, TomlValue>>> secs;
  for (auto& e : detail::scan_document(text))
    secs[e.section].emplace_back(e.key, std::move(e.value));

  static const std::vector<std::string> known{
      "problem", "field", "field.quasi", "field.residual", "params",
      "analysis"};
  for (const auto& [name, _] : secs)
    if (std::find(known.begin(), known.end(), name) == known.end())
      throw ProblemFormatError("unknown section [" + name + "]");

  if (!secs.count("problem"))
    throw ProblemFormatError("missing [problem] section");
  bool saw_vars = false, saw_alpha = false, saw_k = false;
  for (auto& [key, v] : secs["problem"]) {
    if (key == "name") {
      spec.name = detail::str_of(v, "name");
    } else if (key == "vars") {
      if (v.type != TomlValue::Type::List)
        throw ProblemFormatError("vars must be a list of strings");
      for (auto& it : v.list)
        spec.vars.push_back(detail::str_of(it, "vars entry"));
      saw_vars = true;
    } else if (key == "alpha") {
      if (v.type != TomlValue::Type::List)
        throw ProblemFormatError("alpha must be a list of numbers");
      for (auto& it : v.list)
        spec.type.alpha.push_back(detail::num_of(it, "alpha entry"));
      saw_alpha = true;
    } else if (key == "k") {
      spec.type.k = detail::num_of(v, "k");
      saw_k = true;
    } else {
      throw ProblemFormatError("unknown key '" + key + "' in [problem]");
    }
  }
  if (!saw_vars || !saw_alpha || !saw_k)
    throw ProblemFormatError("[problem] needs vars, alpha and k");
  if (spec.vars.size() != spec.type.alpha.size())
    throw ProblemFormatError("vars and alpha must have the same length");
  if (spec.vars.empty()) throw ProblemFormatError("vars must not be empty");
  if (spec.type.k <= 0) throw ProblemFormatError("k must be positive");

  auto read_field = [&](const char* sec, std::vector<std::string>& dst) {
    dst.assign(spec.vars.size(), "");
    std::vector<bool> seen(spec.vars.size(), false);
    for (auto& [key, v] : secs[sec]) {
      auto it = std::find(spec.vars.begin(), spec.vars.end(), key);
      if (it == spec.vars.end())
        throw ProblemFormatError("unknown variable '" + key + "' in [" +
                                 sec + "]");
      std::size_t i = it - spec.vars.begin();
      if (seen[i])
        throw ProblemFormatError("duplicate entry for '" + key + "' in [" +
                                 sec + "]");
      seen[i] = true;
      dst[i] = detail::str_of(v, "field expression");
    }
    for (std::size_t i = 0; i < spec.vars.size(); ++i)
      if (!seen[i])
        throw ProblemFormatError("missing expression for '" + spec.vars[i] +
                                 "' in [" + sec + "]");
  };

  bool have_plain = secs.count("field");
  bool have_quasi = secs.count("field.quasi");
  bool have_res = secs.count("field.residual");
  if (have_plain && (have_quasi || have_res))
    throw ProblemFormatError(
        "[field] cannot be combined with [field.quasi]/[field.residual]");
  if (have_quasi != have_res)
    throw ProblemFormatError(
        "[field.quasi] and [field.residual] must appear together");
  if (!have_plain && !have_quasi)
    throw ProblemFormatError("no field definition found");
  if (have_plain) {
    read_field("field", spec.field_raw);
  } else {
    spec.explicit_split = true;
    read_field("field.quasi", spec.quasi_raw);
    read_field("field.residual", spec.residual_raw);
  }

  for (auto& [key, v] : secs["params"])
    spec.params[key] = detail::num_of(v, "parameter '" + key + "'");

  for (auto& [key, v] : secs["analysis"]) {
    if (key == "order") {
      double o = detail::num_of(v, "order");
      if (o < 1 || o != std::floor(o))
        throw ProblemFormatError("order must be a positive integer");
      spec.analysis.order = int(o);
    } else if (key == "seeds") {
      if (v.type != TomlValue::Type::List)
        throw ProblemFormatError("seeds must be a list of vectors");
      for (auto& row : v.list) {
        if (row.type != TomlValue::Type::List ||
            row.list.size() != spec.vars.size())
          throw ProblemFormatError(
              "each seed must be a vector with one entry per variable");
        std::vector<double> s;
        for (auto& x : row.list) s.push_back(detail::num_of(x, "seed entry"));
        spec.analysis.seeds.push_back(std::move(s));
      }
    } else if (key == "bind") {
      if (v.type != TomlValue::Type::Table)
        throw ProblemFormatError("bind must be an inline table {C1 = ...}");
      for (auto& [ck, cv] : v.table)
        spec.analysis.bind[ck] = detail::num_of(cv, "bind value");
    } else if (key == "tol_newton") {
      spec.analysis.tol_newton = detail::num_of(v, "tol_newton");
    } else if (key == "tau_hyp") {
      spec.analysis.tau_hyp = detail::num_of(v, "tau_hyp");
    } else {
      throw ProblemFormatError("unknown key '" + key + "' in [analysis]");
    }
  }
  return spec;
}

// Builds the vector field, applying parameter overrides before expressions
// are parsed (exponents may fold parameters, so overrides must precede
// parsing).  Certificates are NOT run here; callers decide when.
inline VectorField build_field(const ProblemSpec& spec,
                               const ParamMap& overrides = {}) {
  ParamMap params = spec.params;
  for (const auto& [k, v] : overrides) params[k] = v;
  try {
    if (spec.explicit_split) {
      std::vector<ExprPtr> q, r;
      for (const auto& s : spec.quasi_raw)
        q.push_back(parse_expression(s, spec.vars, params));
      for (const auto& s : spec.residual_raw)
        r.push_back(parse_expression(s, spec.vars, params));
      return VectorField(spec.type, spec.vars, std::move(q), std::move(r),
                         params);
    }
    std::vector<ExprPtr> f;
    for (const auto& s : spec.field_raw)
      f.push_back(parse_expression(s, spec.vars, params));
    SplitField split = auto_split(f, spec.type, spec.vars, params);
    return VectorField(spec.type, spec.vars, std::move(split.quasi),
                       std::move(split.residual), params);
  } catch (const ParseError& e) {
    throw ProblemFormatError(std::string("in '") + spec.name + "': " +
                             e.what());
  }
}

}  // namespace blowup
