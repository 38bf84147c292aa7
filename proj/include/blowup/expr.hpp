#pragma once

// Expression trees for vector-field components, plus:
//   * numeric evaluation with explicit domain errors,
//   * symbolic partial derivatives (for Jacobians),
//   * substitution of log-power series for the variables,
//   * monomial decomposition (for scaling-weight analysis),
//   * a recursive-descent parser and a canonical printer.
//
// Grammar (exponents must fold to literals at parse time; parameters are
// allowed inside a parenthesized exponent and are folded using their bound
// values):
//   expr     := term (('+'|'-') term)*
//   term     := factor (('*'|'/') factor)*
//   factor   := base ('^' exponent)?
//   base     := number | ident | '(' expr ')' | '-' factor
//   exponent := signedNumber | '(' paramExpr ')'

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "blowup/errors.hpp"
#include "blowup/theta_series.hpp"

namespace blowup {

using ParamMap = std::map<std::string, double>;

inline constexpr double kTolDiv = 1e-12;   // |denominator| below this => error
inline constexpr double kIntSnap = 1e-9;   // exponent-to-integer snap window

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

class Expr {
 public:
  enum class Kind { Const, Var, Param, Sum, Prod, Quot, Pow, Neg };

  Kind kind;
  double value = 0.0;       // Const payload, or Pow exponent
  int var = -1;             // Var index
  std::string param;        // Param name
  std::vector<ExprPtr> kids;

  // --- factories (with just enough simplification to keep derivative trees
  // small; anything fancier is out of scope) -------------------------------

  static ExprPtr constant(double c) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Const;
    e->value = c;
    return e;
  }
  static ExprPtr variable(int index) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Var;
    e->var = index;
    return e;
  }
  static ExprPtr parameter(std::string name) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Param;
    e->param = std::move(name);
    return e;
  }
  static ExprPtr sum(std::vector<ExprPtr> kids) {
    std::vector<ExprPtr> flat;
    for (auto& k : kids) {
      if (k->kind == Kind::Sum) {
        flat.insert(flat.end(), k->kids.begin(), k->kids.end());
      } else if (k->kind == Kind::Const && k->value == 0.0) {
        // drop additive zeros
      } else {
        flat.push_back(k);
      }
    }
    if (flat.empty()) return constant(0.0);
    if (flat.size() == 1) return flat[0];
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Sum;
    e->kids = std::move(flat);
    return e;
  }
  static ExprPtr prod(std::vector<ExprPtr> kids) {
    std::vector<ExprPtr> flat;
    double cf = 1.0;
    for (auto& k : kids) {
      if (k->kind == Kind::Prod) {
        flat.insert(flat.end(), k->kids.begin(), k->kids.end());
      } else if (k->kind == Kind::Const) {
        cf *= k->value;
      } else {
        flat.push_back(k);
      }
    }
    if (cf == 0.0) return constant(0.0);
    if (cf != 1.0) flat.insert(flat.begin(), constant(cf));
    if (flat.empty()) return constant(1.0);
    if (flat.size() == 1) return flat[0];
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Prod;
    e->kids = std::move(flat);
    return e;
  }
  static ExprPtr quot(ExprPtr num, ExprPtr den) {
    if (num->kind == Kind::Const && num->value == 0.0) return constant(0.0);
    if (den->kind == Kind::Const && den->value == 1.0) return num;
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Quot;
    e->kids = {std::move(num), std::move(den)};
    return e;
  }
  static ExprPtr pow(ExprPtr base, double expo) {
    if (expo == 1.0) return base;
    if (expo == 0.0) return constant(1.0);
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Pow;
    e->value = expo;
    e->kids = {std::move(base)};
    return e;
  }
  static ExprPtr neg(ExprPtr a) {
    if (a->kind == Kind::Neg) return a->kids[0];
    if (a->kind == Kind::Const) return constant(-a->value);
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Neg;
    e->kids = {std::move(a)};
    return e;
  }

  bool is_zero_const() const { return kind == Kind::Const && value == 0.0; }

  // --- numeric evaluation ---------------------------------------------------

  double evaluate(const std::vector<double>& point,
                  const ParamMap& params) const {
    switch (kind) {
      case Kind::Const:
        return value;
      case Kind::Var:
        return point.at(var);
      case Kind::Param: {
        auto it = params.find(param);
        if (it == params.end())
          throw BlowupError("unbound parameter '" + param + "'");
        return it->second;
      }
      case Kind::Sum: {
        double s = 0.0;
        for (const auto& k : kids) s += k->evaluate(point, params);
        return s;
      }
      case Kind::Prod: {
        double p = 1.0;
        for (const auto& k : kids) p *= k->evaluate(point, params);
        return p;
      }
      case Kind::Quot: {
        double den = kids[1]->evaluate(point, params);
        if (std::abs(den) < kTolDiv) throw DivisionNearZero(den);
        return kids[0]->evaluate(point, params) / den;
      }
      case Kind::Pow: {
        double base = kids[0]->evaluate(point, params);
        double ri = std::round(value);
        if (std::abs(value - ri) < kIntSnap) {
          if (base == 0.0 && ri < 0) throw DivisionNearZero(base);
          return std::pow(base, ri);
        }
        if (base <= 0.0) throw NegativeBaseRealPower(base, value);
        return std::pow(base, value);
      }
      case Kind::Neg:
        return -kids[0]->evaluate(point, params);
    }
    return 0.0;  // unreachable
  }

  // --- symbolic derivative with respect to variable j -----------------------

  ExprPtr differentiate(int j) const {
    switch (kind) {
      case Kind::Const:
      case Kind::Param:
        return constant(0.0);
      case Kind::Var:
        return constant(var == j ? 1.0 : 0.0);
      case Kind::Sum: {
        std::vector<ExprPtr> d;
        for (const auto& k : kids) d.push_back(k->differentiate(j));
        return sum(std::move(d));
      }
      case Kind::Prod: {
        std::vector<ExprPtr> terms;
        for (std::size_t i = 0; i < kids.size(); ++i) {
          std::vector<ExprPtr> f = kids;
          f[i] = kids[i]->differentiate(j);
          terms.push_back(prod(std::move(f)));
        }
        return sum(std::move(terms));
      }
      case Kind::Quot: {
        ExprPtr a = kids[0], b = kids[1];
        ExprPtr num = sum({prod({a->differentiate(j), b}),
                           neg(prod({a, b->differentiate(j)}))});
        return quot(num, prod({b, b}));
      }
      case Kind::Pow: {
        ExprPtr a = kids[0];
        return prod({constant(value), pow(a, value - 1.0),
                     a->differentiate(j)});
      }
      case Kind::Neg:
        return neg(kids[0]->differentiate(j));
    }
    return constant(0.0);  // unreachable
  }

  // --- series substitution --------------------------------------------------

  ThetaSeries substitute(const std::vector<ThetaSeries>& args,
                         const ParamMap& params) const {
    switch (kind) {
      case Kind::Const:
        return ThetaSeries::constant(ParamPoly(value));
      case Kind::Var:
        return args.at(var);
      case Kind::Param: {
        auto it = params.find(param);
        if (it == params.end())
          throw BlowupError("unbound parameter '" + param + "'");
        return ThetaSeries::constant(ParamPoly(it->second));
      }
      case Kind::Sum: {
        ThetaSeries s = kids[0]->substitute(args, params);
        for (std::size_t i = 1; i < kids.size(); ++i)
          s = s + kids[i]->substitute(args, params);
        return s;
      }
      case Kind::Prod: {
        ThetaSeries p = kids[0]->substitute(args, params);
        for (std::size_t i = 1; i < kids.size(); ++i)
          p = p * kids[i]->substitute(args, params);
        return p;
      }
      case Kind::Quot:
        return kids[0]->substitute(args, params) *
               kids[1]->substitute(args, params).inverse();
      case Kind::Pow:
        return kids[0]->substitute(args, params).pow_real(value);
      case Kind::Neg:
        return kids[0]->substitute(args, params).scaled(-1.0);
    }
    return ThetaSeries();  // unreachable
  }

  // --- structural equality --------------------------------------------------

  static bool equal(const ExprPtr& a, const ExprPtr& b) {
    if (a->kind != b->kind || a->value != b->value || a->var != b->var ||
        a->param != b->param || a->kids.size() != b->kids.size())
      return false;
    for (std::size_t i = 0; i < a->kids.size(); ++i)
      if (!equal(a->kids[i], b->kids[i])) return false;
    return true;
  }

  // --- canonical printing ---------------------------------------------------
  // Precedence: Sum < Quot/Prod < Neg < Pow < atom.  The printed form reparses
  // to a structurally identical tree (numbers use %.17g so doubles survive).

  std::string render(const std::vector<std::string>& vars) const {
    return render_prec(vars, 0);
  }

 private:
  static std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // trim to the shortest representation that still round-trips
    for (int prec = 1; prec <= 16; ++prec) {
      char cand[40];
      std::snprintf(cand, sizeof cand, "%.*g", prec, v);
      if (std::strtod(cand, nullptr) == v) return cand;
    }
    return buf;
  }

  std::string render_prec(const std::vector<std::string>& vars,
                          int parent) const {
    auto wrap = [&](const std::string& s, int prec) {
      return prec < parent ? "(" + s + ")" : s;
    };
    switch (kind) {
      case Kind::Const:
        if (value < 0.0) return wrap("-" + num(-value), 2);
        return num(value);
      case Kind::Var:
        return vars.at(var);
      case Kind::Param:
        return param;
      case Kind::Sum: {
        std::string out = kids[0]->render_prec(vars, 1);
        for (std::size_t i = 1; i < kids.size(); ++i) {
          const Expr& k = *kids[i];
          if (k.kind == Kind::Neg)
            out += " - " + k.kids[0]->render_prec(vars, 2);
          else if (k.kind == Kind::Const && k.value < 0.0)
            out += " - " + num(-k.value);
          else
            out += " + " + kids[i]->render_prec(vars, 1);
        }
        return wrap(out, 0);
      }
      case Kind::Prod: {
        std::string out = kids[0]->render_prec(vars, 1);
        for (std::size_t i = 1; i < kids.size(); ++i) {
          // later Quot factors must be parenthesized: a*(x/y), since a*x/y
          // reparses as (a*x)/y
          int child_min = kids[i]->kind == Kind::Quot ? 2 : 1;
          out += "*" + kids[i]->render_prec(vars, child_min);
        }
        return wrap(out, 1);
      }
      case Kind::Quot:
        return wrap(kids[0]->render_prec(vars, 1) + "/" +
                        kids[1]->render_prec(vars, 2),
                    1);
      case Kind::Pow:
        return wrap(kids[0]->render_prec(vars, 4) + "^" + num(value), 3);
      case Kind::Neg:
        return wrap("-" + kids[0]->render_prec(vars, 2), 2);
    }
    return "";  // unreachable
  }
};

// ---------------------------------------------------------------------------
// Monomial decomposition.  Treats the expression as a sum of terms
// c * y1^b1 * ... * yn^bn (real exponents allowed; parameters and constant
// subexpressions may appear in c) and throws NotMonomialSum otherwise.
// ---------------------------------------------------------------------------

struct Monomial {
  std::vector<double> exps;  // per-variable exponent
  double coeff;              // numeric coefficient with parameters bound
  ExprPtr term;              // original subtree (kept for exact re-splits)
};

namespace detail {

inline bool contains_var(const ExprPtr& e) {
  if (e->kind == Expr::Kind::Var) return true;
  for (const auto& k : e->kids)
    if (contains_var(k)) return true;
  return false;
}

struct MonoData {
  std::vector<double> exps;
  double coeff;
};

inline std::vector<MonoData> mono_product(const std::vector<MonoData>& a,
                                          const std::vector<MonoData>& b) {
  std::vector<MonoData> out;
  out.reserve(a.size() * b.size());
  for (const auto& x : a)
    for (const auto& y : b) {
      MonoData m = x;
      m.coeff *= y.coeff;
      for (std::size_t l = 0; l < m.exps.size(); ++l) m.exps[l] += y.exps[l];
      out.push_back(std::move(m));
    }
  return out;
}

// Fully distributed monomial expansion.  Products, negations, integer powers
// and single-monomial denominators distribute over sums; everything else
// (a variable-bearing sum under a fractional power or in a denominator) is
// rejected with NotMonomialSum.
inline std::vector<MonoData> expand_tree(const ExprPtr& e, int nvars,
                                         const ParamMap& params) {
  if (!contains_var(e)) {
    const double v = e->evaluate({}, params);
    if (!std::isfinite(v))
      throw NotMonomialSum("constant subexpression is not finite");
    return {{std::vector<double>(nvars, 0.0), v}};
  }
  switch (e->kind) {
    case Expr::Kind::Var: {
      MonoData m{std::vector<double>(nvars, 0.0), 1.0};
      m.exps.at(e->var) = 1.0;
      return {m};
    }
    case Expr::Kind::Neg: {
      auto out = expand_tree(e->kids[0], nvars, params);
      for (auto& m : out) m.coeff = -m.coeff;
      return out;
    }
    case Expr::Kind::Sum: {
      std::vector<MonoData> out;
      for (const auto& k : e->kids) {
        auto part = expand_tree(k, nvars, params);
        out.insert(out.end(), part.begin(), part.end());
      }
      return out;
    }
    case Expr::Kind::Prod: {
      std::vector<MonoData> out{{std::vector<double>(nvars, 0.0), 1.0}};
      for (const auto& k : e->kids)
        out = mono_product(out, expand_tree(k, nvars, params));
      return out;
    }
    case Expr::Kind::Quot: {
      auto num = expand_tree(e->kids[0], nvars, params);
      auto den = expand_tree(e->kids[1], nvars, params);
      if (den.size() != 1)
        throw NotMonomialSum("variable-bearing sum inside a denominator");
      if (den[0].coeff == 0.0)
        throw NotMonomialSum("division by a zero coefficient");
      for (auto& m : num) {
        m.coeff /= den[0].coeff;
        for (int l = 0; l < nvars; ++l) m.exps[l] -= den[0].exps[l];
      }
      return num;
    }
    case Expr::Kind::Pow: {
      auto base = expand_tree(e->kids[0], nvars, params);
      const double p = e->value;
      if (base.size() == 1) {
        MonoData m = base[0];
        m.coeff = std::pow(m.coeff, p);
        if (!std::isfinite(m.coeff))
          throw NotMonomialSum("coefficient power is not finite");
        for (auto& b : m.exps) b *= p;
        return {m};
      }
      if (p >= 0.0 && p == std::floor(p) && p <= 32.0) {
        std::vector<MonoData> out{{std::vector<double>(nvars, 0.0), 1.0}};
        for (int rep = 0; rep < int(p); ++rep) out = mono_product(out, base);
        return out;
      }
      throw NotMonomialSum(
          "variable-bearing sum under a non-integer or negative power");
    }
    case Expr::Kind::Const:
    case Expr::Kind::Param:
      break;  // handled by the constant fast path above
  }
  throw NotMonomialSum("unexpected node in monomial expansion");
}

}  // namespace detail

inline std::vector<Monomial> monomial_terms(const ExprPtr& e, int nvars,
                                            const ParamMap& params) {
  std::vector<Monomial> out;
  for (auto& md : detail::expand_tree(e, nvars, params)) {
    if (md.coeff == 0.0) continue;
    Monomial m;
    m.exps = std::move(md.exps);
    m.coeff = md.coeff;
    // Synthesize an equivalent subtree (parameters already folded into the
    // coefficient) so callers can regroup terms into new expressions.
    std::vector<ExprPtr> factors;
    factors.push_back(Expr::constant(m.coeff));
    for (int l = 0; l < nvars; ++l) {
      if (m.exps[l] == 0.0) continue;
      if (m.exps[l] == 1.0)
        factors.push_back(Expr::variable(l));
      else
        factors.push_back(Expr::pow(Expr::variable(l), m.exps[l]));
    }
    m.term = Expr::prod(std::move(factors));
    out.push_back(std::move(m));
  }
  return out;
}

inline bool is_monomial_sum(const ExprPtr& e, int nvars,
                            const ParamMap& params) {
  try {
    monomial_terms(e, nvars, params);
    return true;
  } catch (const NotMonomialSum&) {
    return false;
  }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

class ExprParser {
 public:
  ExprParser(std::string_view text, const std::vector<std::string>& vars,
             const ParamMap& params)
      : text_(text), vars_(vars), params_(params) {}

  ExprPtr parse() {
    ExprPtr e = parse_expr(false);
    skip_ws();
    if (pos_ != text_.size())
      throw ParseError("unexpected trailing input", line(), col());
    return e;
  }

 private:
  ExprPtr parse_expr(bool fold_only) {
    ExprPtr left = parse_term(fold_only);
    skip_ws();
    std::vector<ExprPtr> terms{left};
    while (peek() == '+' || peek() == '-') {
      char op = take();
      ExprPtr rhs = parse_term(fold_only);
      terms.push_back(op == '+' ? rhs : Expr::neg(rhs));
      skip_ws();
    }
    return terms.size() == 1 ? terms[0] : Expr::sum(std::move(terms));
  }

  ExprPtr parse_term(bool fold_only) {
    ExprPtr acc = parse_factor(fold_only);
    skip_ws();
    while (peek() == '*' || peek() == '/') {
      char op = take();
      ExprPtr rhs = parse_factor(fold_only);
      acc = op == '*' ? Expr::prod({acc, rhs}) : Expr::quot(acc, rhs);
      skip_ws();
    }
    return acc;
  }

  ExprPtr parse_factor(bool fold_only) {
    ExprPtr base = parse_base(fold_only);
    skip_ws();
    if (peek() == '^') {
      take();
      double expo = parse_exponent();
      return Expr::pow(std::move(base), expo);
    }
    return base;
  }

  ExprPtr parse_base(bool fold_only) {
    skip_ws();
    char c = peek();
    if (c == '-') {
      take();
      return Expr::neg(parse_factor(fold_only));
    }
    if (c == '(') {
      take();
      ExprPtr e = parse_expr(fold_only);
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      return Expr::constant(parse_number());
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      auto [name, l, cl] = parse_ident();
      for (std::size_t i = 0; i < vars_.size(); ++i)
        if (vars_[i] == name) {
          if (fold_only)
            throw NonLiteralExponent("variable '" + name + "' in exponent", l,
                                     cl);
          return Expr::variable(int(i));
        }
      if (params_.count(name)) return Expr::parameter(name);
      throw UnknownIdentifier(name, l, cl);
    }
    throw ParseError(std::string("unexpected character '") +
                         (c ? std::string(1, c) : "<end>") + "'",
                     line(), col());
  }

  // Exponents are literals: either a signed number, or a parenthesized
  // arithmetic expression over numbers and parameters that folds to one.
  double parse_exponent() {
    skip_ws();
    if (peek() == '(') {
      int l = line(), cl = col();
      take();
      ExprPtr e = parse_expr(/*fold_only=*/true);
      expect(')');
      try {
        return e->evaluate({}, params_);
      } catch (const BlowupError& err) {
        throw NonLiteralExponent(err.what(), l, cl);
      }
    }
    double sign = 1.0;
    if (peek() == '-') take(), sign = -1.0;
    else if (peek() == '+') take();
    skip_ws();
    if (!std::isdigit(static_cast<unsigned char>(peek())) && peek() != '.')
      throw NonLiteralExponent("expected a number", line(), col());
    return sign * parse_number();
  }

  double parse_number() {
    std::size_t start = pos_;
    while (std::isdigit(static_cast<unsigned char>(peek()))) take();
    if (peek() == '.') {
      take();
      while (std::isdigit(static_cast<unsigned char>(peek()))) take();
    }
    if (peek() == 'e' || peek() == 'E') {
      std::size_t save = pos_;
      take();
      if (peek() == '+' || peek() == '-') take();
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        while (std::isdigit(static_cast<unsigned char>(peek()))) take();
      } else {
        pos_ = save;  // 'e' starts an identifier, not an exponent
      }
    }
    std::string s(text_.substr(start, pos_ - start));
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
      throw ParseError("malformed number '" + s + "'", line(), col());
    return v;
  }

  std::tuple<std::string, int, int> parse_ident() {
    int l = line(), cl = col();
    std::size_t start = pos_;
    while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')
      take();
    return {std::string(text_.substr(start, pos_ - start)), l, cl};
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t'))
      ++pos_;
  }
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  char take() { return text_[pos_++]; }
  void expect(char c) {
    skip_ws();
    if (peek() != c)
      throw ParseError(std::string("expected '") + c + "'", line(), col());
    take();
  }
  int line() const {
    return 1 + int(std::count(text_.begin(), text_.begin() + pos_, '\n'));
  }
  int col() const {
    auto nl = text_.rfind('\n', pos_ == 0 ? 0 : pos_ - 1);
    return nl == std::string_view::npos ? int(pos_) + 1 : int(pos_ - nl);
  }

  std::string_view text_;
  const std::vector<std::string>& vars_;
  const ParamMap& params_;
  std::size_t pos_ = 0;
};

inline ExprPtr parse_expression(std::string_view text,
                                const std::vector<std::string>& vars,
                                const ParamMap& params) {
  return ExprParser(text, vars, params).parse();
}

}  // namespace blowup
