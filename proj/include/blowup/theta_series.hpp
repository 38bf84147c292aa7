#pragma once

// Finite log-power series in theta = t_max - t:
//
//   S(theta) = sum_j  c_j(C) * theta^gamma_j * ln(theta)^{m_j},
//
// with real exponents gamma_j, integer log powers m_j >= 0 and coefficients
// that are polynomials in the free constants C1, C2, ...  Every series tracks
// a truncation exponent `trunc`: terms with gamma > trunc are unknown and are
// dropped on construction, and arithmetic propagates the tightest honest
// truncation for its result.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "blowup/errors.hpp"
#include "blowup/param_poly.hpp"

namespace blowup {

inline constexpr double kGammaMergeTol = 1e-10;  // exponent-key merge window
inline constexpr double kInfExp = std::numeric_limits<double>::infinity();

struct ThetaTerm {
  double gamma = 0.0;
  int logpow = 0;
  ParamPoly coeff;
};

class ThetaSeries {
 public:
  ThetaSeries() = default;
  explicit ThetaSeries(double trunc) : trunc_(trunc) {}
  static ThetaSeries constant(ParamPoly c, double trunc = kInfExp) {
    ThetaSeries s(trunc);
    s.add_term(0.0, 0, std::move(c));
    return s;
  }
  static ThetaSeries monomial(ParamPoly c, double gamma, int logpow = 0,
                              double trunc = kInfExp) {
    ThetaSeries s(trunc);
    s.add_term(gamma, logpow, std::move(c));
    return s;
  }

  double trunc() const { return trunc_; }
  void set_trunc(double t) {
    trunc_ = t;
    drop_beyond_trunc();
  }
  bool empty() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }
  const std::vector<ThetaTerm>& terms() const { return terms_; }

  // Minimal exponent present (+inf for the zero series).
  double deg() const { return terms_.empty() ? kInfExp : terms_.front().gamma; }
  bool has_log_terms() const {
    for (const auto& t : terms_)
      if (t.logpow > 0) return true;
    return false;
  }
  double max_abs_coeff() const {
    double m = 0.0;
    for (const auto& t : terms_) m = std::max(m, t.coeff.max_abs_coeff());
    return m;
  }
  int max_param_index() const {
    int m = -1;
    for (const auto& t : terms_)
      m = std::max(m, t.coeff.max_param_index());
    return m;
  }

  // Inserts c * theta^gamma * ln^m, merging into an existing key when one
  // lies within kGammaMergeTol (the established exponent wins, so lattice
  // exponents do not drift).  Keeps the term list sorted by (gamma asc,
  // logpow desc) with no zero coefficients.
  void add_term(double gamma, int logpow, ParamPoly c) {
    if (c.is_zero()) return;
    if (gamma > trunc_ + kGammaMergeTol) return;
    std::size_t lo = lower_bound(gamma - kGammaMergeTol);
    std::size_t best = terms_.size();
    double best_dist = kGammaMergeTol;
    for (std::size_t i = lo;
         i < terms_.size() && terms_[i].gamma <= gamma + kGammaMergeTol; ++i) {
      if (terms_[i].logpow != logpow) continue;
      double d = std::abs(terms_[i].gamma - gamma);
      if (d <= best_dist) best_dist = d, best = i;
    }
    if (best < terms_.size()) {
      ParamPoly sum = terms_[best].coeff + c;
      if (sum.is_zero())
        terms_.erase(terms_.begin() + best);
      else
        terms_[best].coeff = std::move(sum);
      return;
    }
    // insertion point: gamma asc, logpow desc within equal gamma
    std::size_t i = lo;
    while (i < terms_.size() &&
           (terms_[i].gamma < gamma - kGammaMergeTol ||
            (std::abs(terms_[i].gamma - gamma) <= kGammaMergeTol &&
             terms_[i].logpow > logpow)))
      ++i;
    terms_.insert(terms_.begin() + i, ThetaTerm{gamma, logpow, std::move(c)});
  }

  friend ThetaSeries operator+(const ThetaSeries& a, const ThetaSeries& b) {
    ThetaSeries r(std::min(a.trunc_, b.trunc_));
    for (const auto& t : a.terms_) r.add_term(t.gamma, t.logpow, t.coeff);
    for (const auto& t : b.terms_) r.add_term(t.gamma, t.logpow, t.coeff);
    return r;
  }
  friend ThetaSeries operator-(const ThetaSeries& a, const ThetaSeries& b) {
    return a + b.scaled(-1.0);
  }
  ThetaSeries operator-() const { return scaled(-1.0); }

  ThetaSeries scaled(const ParamPoly& f) const {
    ThetaSeries r(trunc_);
    for (const auto& t : terms_) r.add_term(t.gamma, t.logpow, t.coeff * f);
    return r;
  }
  ThetaSeries scaled(double f) const { return scaled(ParamPoly(f)); }

  // Multiplies by theta^shift (exact, so the truncation shifts too).
  ThetaSeries shifted(double shift) const {
    ThetaSeries r(trunc_ + shift);
    for (const auto& t : terms_)
      r.add_term(t.gamma + shift, t.logpow, t.coeff);
    return r;
  }

  friend ThetaSeries operator*(const ThetaSeries& a, const ThetaSeries& b) {
    // Error propagation: unknown tail of a (theta^{>Ta}) enters the product
    // multiplied by b's leading power and vice versa, so the honest result
    // truncation is min(Ta + deg b, Tb + deg a).  The zero series is exact.
    double ta = a.empty() ? kInfExp : a.trunc_ + b.deg();
    double tb = b.empty() ? kInfExp : b.trunc_ + a.deg();
    ThetaSeries r(std::min(ta, tb));
    for (const auto& x : a.terms_)
      for (const auto& y : b.terms_)
        r.add_term(x.gamma + y.gamma, x.logpow + y.logpow, x.coeff * y.coeff);
    return r;
  }

  // Integer power by repeated multiplication; m >= 0.
  ThetaSeries pow_int(int m) const {
    ThetaSeries acc = constant(ParamPoly(1.0), kInfExp);
    for (int i = 0; i < m; ++i) acc = acc * (*this);
    return acc;
  }

  // 1/S.  Requires a parameter-free nonzero leading coefficient with no log
  // factor; later terms may carry parameters and logs.
  ThetaSeries inverse() const {
    if (terms_.empty())
      throw SeriesDomainError("inverse of the zero series");
    const ThetaTerm& lead = terms_.front();
    if (lead.logpow != 0)
      throw SeriesDomainError("inverse: leading term carries ln(theta)");
    if (!lead.coeff.is_constant())
      throw SeriesDomainError(
          "inverse: leading coefficient depends on free parameters");
    double c0 = lead.coeff.constant_value();
    double g0 = lead.gamma;
    ThetaSeries u = tail_over_lead();  // S/(c0 theta^{g0}) - 1, deg > 0
    ThetaSeries acc = constant(ParamPoly(1.0), u.trunc_);
    ThetaSeries upow = acc;
    double d = u.deg();
    for (int j = 1; !u.empty() && j * d <= u.trunc_ + kGammaMergeTol; ++j) {
      upow = upow * u;
      acc = acc + upow.scaled(j % 2 == 0 ? 1.0 : -1.0);
    }
    acc.set_trunc(trunc_ - g0);  // shifted(-g0) then yields trunc - 2*g0
    return acc.shifted(-g0).scaled(1.0 / c0);
  }

  // S^r for real r via the binomial series.  Requires a parameter-free
  // positive leading coefficient with no log factor.  Integer r (within
  // 1e-9) takes the exact repeated-multiplication path instead, which has no
  // positivity requirement.
  ThetaSeries pow_real(double r) const {
    double rInt = std::round(r);
    if (std::abs(r - rInt) < 1e-9) {
      int m = int(rInt);
      return m >= 0 ? pow_int(m) : inverse().pow_int(-m);
    }
    if (terms_.empty())
      throw SeriesDomainError("real power of the zero series");
    const ThetaTerm& lead = terms_.front();
    if (lead.logpow != 0)
      throw SeriesDomainError("pow_real: leading term carries ln(theta)");
    if (!lead.coeff.is_constant())
      throw SeriesDomainError(
          "pow_real: leading coefficient depends on free parameters");
    double c0 = lead.coeff.constant_value();
    if (c0 <= 0) throw NegativeBaseRealPower(c0, r);
    double g0 = lead.gamma;
    ThetaSeries u = tail_over_lead();
    ThetaSeries acc = constant(ParamPoly(1.0), u.trunc_);
    ThetaSeries upow = acc;
    double d = u.deg(), binom = 1.0;
    for (int j = 1; !u.empty() && j * d <= u.trunc_ + kGammaMergeTol; ++j) {
      binom *= (r - (j - 1)) / j;
      upow = upow * u;
      acc = acc + upow.scaled(binom);
    }
    acc.set_trunc(trunc_ - g0);  // shifted(r*g0) then yields trunc + (r-1)*g0
    return acc.shifted(r * g0).scaled(std::pow(c0, r));
  }

  // Termwise antiderivative with respect to t (d/dt = -d/dtheta), adding no
  // integration constants.  theta^-1 terms integrate to log powers.
  ThetaSeries primitive() const {
    ThetaSeries r(trunc_ + 1);
    for (const auto& t : terms_) {
      if (std::abs(t.gamma + 1.0) <= 1e-12) {
        r.add_term(t.gamma + 1.0, t.logpow + 1,
                   t.coeff * (-1.0 / (t.logpow + 1)));
      } else {
        ParamPoly a = t.coeff * (-1.0 / (t.gamma + 1.0));
        r.add_term(t.gamma + 1.0, t.logpow, a);
        for (int l = 1; l <= t.logpow; ++l) {
          a = a * (-double(t.logpow - l + 1) / (t.gamma + 1.0));
          r.add_term(t.gamma + 1.0, t.logpow - l, a);
        }
      }
    }
    return r;
  }

  // Termwise d/dt = -d/dtheta.
  ThetaSeries differentiate() const {
    ThetaSeries r(trunc_ - 1);
    for (const auto& t : terms_) {
      if (t.gamma != 0.0)
        r.add_term(t.gamma - 1.0, t.logpow, t.coeff * (-t.gamma));
      if (t.logpow > 0)
        r.add_term(t.gamma - 1.0, t.logpow - 1, t.coeff * double(-t.logpow));
    }
    return r;
  }

  // Drops coefficients below `eps` in magnitude (after parameter binding the
  // telescoped differences leave ~1 ulp dust; this removes it).
  ThetaSeries cleaned(double eps = kEpsClean) const {
    ThetaSeries r(trunc_);
    for (const auto& t : terms_)
      if (t.coeff.max_abs_coeff() >= eps) r.add_term(t.gamma, t.logpow, t.coeff);
    return r;
  }

  // Substitutes numeric values for the free parameters.
  ThetaSeries bind(const std::vector<double>& params) const {
    ThetaSeries r(trunc_);
    for (const auto& t : terms_)
      r.add_term(t.gamma, t.logpow, t.coeff.bind(params));
    return r;
  }

  double eval_numeric(double theta,
                      const std::vector<double>& params = {}) const {
    double lg = std::log(theta), sum = 0.0;
    for (const auto& t : terms_) {
      double lp = 1.0;
      for (int i = 0; i < t.logpow; ++i) lp *= lg;
      sum += t.coeff.eval(params) * std::pow(theta, t.gamma) * lp;
    }
    return sum;
  }

  bool operator==(const ThetaSeries& o) const {
    if (terms_.size() != o.terms_.size()) return false;
    for (std::size_t i = 0; i < terms_.size(); ++i)
      if (terms_[i].gamma != o.terms_[i].gamma ||
          terms_[i].logpow != o.terms_[i].logpow ||
          !(terms_[i].coeff == o.terms_[i].coeff))
        return false;
    return true;
  }

  // "0.7071067812*theta^-0.5 + ..." with parameter coefficients in parens.
  std::string render(const std::string& var = "theta") const {
    if (terms_.empty()) return "0";
    std::string out;
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      const auto& t = terms_[i];
      std::string c = t.coeff.render();
      bool neg = !c.empty() && c[0] == '-';
      std::string mag = neg ? c.substr(1) : c;
      if (mag.find(' ') != std::string::npos) {
        mag = "(" + c + ")";  // multi-term coefficient: keep its signs inside
        neg = false;
      }
      // Exponents inherit rounding dust from the eigensolve; snap the
      // displayed value so e.g. -6.7e-16 shows as the theta^0 term it is.
      double g = std::abs(t.gamma) < 1e-10 ? 0.0 : t.gamma;
      std::string powers;
      if (g != 0.0) powers += var + "^" + ParamPoly::format_double(g);
      for (int m = 0; m < t.logpow; ++m) {
        if (!powers.empty()) powers += "*";
        powers += "ln(" + var + ")";
      }
      std::string piece;
      if (powers.empty())
        piece = mag;
      else if (mag == "1")
        piece = powers;
      else
        piece = mag + "*" + powers;
      if (i == 0)
        out += (neg ? "-" : "") + piece;
      else
        out += (neg ? " - " : " + ") + piece;
    }
    return out;
  }

 private:
  // Index of the first term with gamma >= g (terms sorted by gamma).
  std::size_t lower_bound(double g) const {
    std::size_t lo = 0, hi = terms_.size();
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (terms_[mid].gamma < g)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  }

  // S/(c0*theta^{g0}) - 1 where (c0, g0) is the leading term; deg > 0.
  ThetaSeries tail_over_lead() const {
    const ThetaTerm& lead = terms_.front();
    double c0 = lead.coeff.constant_value(), g0 = lead.gamma;
    ThetaSeries u(trunc_ - g0);
    for (std::size_t i = 1; i < terms_.size(); ++i)
      u.add_term(terms_[i].gamma - g0, terms_[i].logpow,
                 terms_[i].coeff * (1.0 / c0));
    if (!u.empty() && u.deg() <= kGammaMergeTol)
      throw SeriesDomainError(
          "relative tail has non-positive degree; cannot form a convergent "
          "expansion");
    return u;
  }

  void drop_beyond_trunc() {
    while (!terms_.empty() && terms_.back().gamma > trunc_ + kGammaMergeTol)
      terms_.pop_back();
  }

  std::vector<ThetaTerm> terms_;
  double trunc_ = kInfExp;
};

}  // namespace blowup
