#pragma once

// Polynomials in the free expansion parameters C1, C2, ... with double
// coefficients.  These appear as series coefficients once stable modes inject
// free constants; all arithmetic the expansion needs is ring arithmetic plus
// division by scalars, so that is all this type offers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "blowup/errors.hpp"

namespace blowup {

inline constexpr double kEpsClean = 1e-13;  // |coeff| below this is dropped

class ParamPoly {
 public:
  // One monomial: coefficient * prod_i C_{i+1}^{exps[i]}.  Exponent vectors
  // are kept trimmed (no trailing zeros) so the constant monomial is {}.
  struct Mono {
    std::vector<unsigned> exps;
    double c = 0.0;
  };

  ParamPoly() = default;
  /*implicit*/ ParamPoly(double c) {
    if (std::abs(c) >= kEpsClean) mono_.push_back({{}, c});
  }
  static ParamPoly variable(std::size_t index, unsigned power = 1) {
    ParamPoly p;
    std::vector<unsigned> e(index + 1, 0);
    e[index] = power;
    if (power == 0) e.clear();
    p.mono_.push_back({std::move(e), 1.0});
    return p;
  }

  bool is_zero() const { return mono_.empty(); }
  bool is_constant() const {
    return mono_.empty() || (mono_.size() == 1 && mono_[0].exps.empty());
  }
  double constant_value() const {
    if (mono_.empty()) return 0.0;
    if (!is_constant())
      throw SeriesDomainError("coefficient still depends on free parameters");
    return mono_[0].c;
  }
  double max_abs_coeff() const {
    double m = 0.0;
    for (const auto& t : mono_) m = std::max(m, std::abs(t.c));
    return m;
  }
  const std::vector<Mono>& monomials() const { return mono_; }
  // Highest parameter index used, or -1 for constant polynomials.
  int max_param_index() const {
    int m = -1;
    for (const auto& t : mono_)
      if (!t.exps.empty()) m = std::max(m, int(t.exps.size()) - 1);
    return m;
  }

  friend ParamPoly operator+(const ParamPoly& a, const ParamPoly& b) {
    ParamPoly r;
    r.mono_.reserve(a.mono_.size() + b.mono_.size());
    std::size_t i = 0, j = 0;
    while (i < a.mono_.size() || j < b.mono_.size()) {
      if (j == b.mono_.size() ||
          (i < a.mono_.size() && less(a.mono_[i].exps, b.mono_[j].exps))) {
        r.push(a.mono_[i++]);
      } else if (i == a.mono_.size() ||
                 less(b.mono_[j].exps, a.mono_[i].exps)) {
        r.push(b.mono_[j++]);
      } else {
        Mono m{a.mono_[i].exps, a.mono_[i].c + b.mono_[j].c};
        r.push(std::move(m));
        ++i, ++j;
      }
    }
    return r;
  }
  friend ParamPoly operator-(const ParamPoly& a, const ParamPoly& b) {
    return a + (b * -1.0);
  }
  friend ParamPoly operator*(const ParamPoly& a, double s) {
    ParamPoly r;
    for (const auto& t : a.mono_) r.push({t.exps, t.c * s});
    return r;
  }
  friend ParamPoly operator*(double s, const ParamPoly& a) { return a * s; }
  friend ParamPoly operator*(const ParamPoly& a, const ParamPoly& b) {
    // Accumulate into a map keyed by exponent vector, then normalize.
    std::map<std::vector<unsigned>, double> acc;
    for (const auto& ta : a.mono_)
      for (const auto& tb : b.mono_) {
        std::vector<unsigned> e(std::max(ta.exps.size(), tb.exps.size()), 0);
        for (std::size_t i = 0; i < ta.exps.size(); ++i) e[i] += ta.exps[i];
        for (std::size_t i = 0; i < tb.exps.size(); ++i) e[i] += tb.exps[i];
        trim(e);
        acc[e] += ta.c * tb.c;
      }
    ParamPoly r;
    for (auto& [e, c] : acc) r.push({e, c});
    return r;
  }
  ParamPoly operator-() const { return *this * -1.0; }
  friend ParamPoly operator/(const ParamPoly& a, double s) {
    if (std::abs(s) < 1e-300) throw DivisionNearZero(s);
    return a * (1.0 / s);
  }

  bool operator==(const ParamPoly& o) const {
    if (mono_.size() != o.mono_.size()) return false;
    for (std::size_t i = 0; i < mono_.size(); ++i)
      if (mono_[i].exps != o.mono_[i].exps || mono_[i].c != o.mono_[i].c)
        return false;
    return true;
  }

  // Numeric value with C_{i+1} = values[i]; missing entries default to 0.
  double eval(const std::vector<double>& values) const {
    double sum = 0.0;
    for (const auto& t : mono_) {
      double term = t.c;
      for (std::size_t i = 0; i < t.exps.size(); ++i) {
        if (t.exps[i] == 0) continue;
        double v = i < values.size() ? values[i] : 0.0;
        term *= std::pow(v, int(t.exps[i]));
      }
      sum += term;
    }
    return sum;
  }

  // Substitutes numeric values for *all* parameters, producing a constant.
  ParamPoly bind(const std::vector<double>& values) const {
    return ParamPoly(eval(values));
  }

  // Renders e.g. "-0.417*C1^2 + 0.3*C1*C2"; constants render as plain numbers.
  std::string render() const {
    if (mono_.empty()) return "0";
    std::string out;
    for (std::size_t i = 0; i < mono_.size(); ++i) {
      const auto& t = mono_[i];
      double c = t.c;
      if (i == 0) {
        if (c < 0) out += "-", c = -c;
      } else {
        out += c < 0 ? " - " : " + ";
        c = std::abs(c);
      }
      std::string vars;
      for (std::size_t p = 0; p < t.exps.size(); ++p) {
        if (t.exps[p] == 0) continue;
        if (!vars.empty()) vars += "*";
        vars += "C" + std::to_string(p + 1);
        if (t.exps[p] > 1) vars += "^" + std::to_string(t.exps[p]);
      }
      std::string num = format_double(c);
      if (vars.empty())
        out += num;
      else if (num == "1")
        out += vars;
      else
        out += num + "*" + vars;
    }
    return out;
  }

  static std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
  }

 private:
  static void trim(std::vector<unsigned>& e) {
    while (!e.empty() && e.back() == 0) e.pop_back();
  }
  static bool less(const std::vector<unsigned>& a,
                   const std::vector<unsigned>& b) {
    return a < b;  // lexicographic on trimmed exponent vectors
  }
  void push(Mono m) {
    if (std::abs(m.c) < kEpsClean) return;
    mono_.push_back(std::move(m));
  }

  std::vector<Mono> mono_;  // sorted by exponent vector, no zero coeffs
};

}  // namespace blowup
