#pragma once

// Shared test utilities: run the full analysis pipeline on a bundled problem
// and pick out roots and series coefficients.

#include <cmath>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "blowup/builtin_problems.hpp"
#include "blowup/expansion.hpp"
#include "blowup/problem.hpp"
#include "blowup/spectral.hpp"

namespace test_util {

using namespace blowup;

struct AnalyzedRoot {
  BalanceRoot root;
  SpectralData sd;
  GapData gap;
};

struct AnalyzedProblem {
  ProblemSpec spec;
  VectorField field;
  std::vector<AnalyzedRoot> roots;
};

inline AnalyzedProblem analyze_builtin(const std::string& name,
                                       const ParamMap& overrides = {}) {
  ProblemSpec spec = load_builtin(name);
  VectorField f = build_field(spec, overrides);
  f.check_certificates();
  SpectralOptions sopt;
  sopt.tol_newton = spec.analysis.tol_newton;
  sopt.tau_hyp = spec.analysis.tau_hyp;
  AnalyzedProblem out{std::move(spec), std::move(f), {}};
  for (const auto& r :
       solve_balance(out.field, out.spec.analysis.seeds, sopt)) {
    AnalyzedRoot ar;
    ar.root = r;
    ar.sd = spectral_decompose(power_matrix(out.field, r.Y0),
                               out.spec.analysis.tau_hyp);
    ar.gap = delta_gap(out.field, ar.sd);
    out.roots.push_back(std::move(ar));
  }
  return out;
}

inline const AnalyzedRoot& root_near(const AnalyzedProblem& ap,
                                     std::initializer_list<double> y0,
                                     double tol = 1e-6) {
  for (const auto& r : ap.roots) {
    if (std::size_t(r.root.Y0.size()) != y0.size()) continue;
    double d = 0.0;
    int i = 0;
    for (double v : y0) d = std::max(d, std::abs(r.root.Y0(i++) - v));
    if (d <= tol) return r;
  }
  throw std::runtime_error("no balance root near the requested point");
}

// Constant coefficient at exponent `gamma` (given log power), if present.
inline std::optional<double> coeff_at(const ThetaSeries& s, double gamma,
                                      int logpow = 0, double tol = 1e-9) {
  for (const auto& t : s.terms())
    if (t.logpow == logpow && std::abs(t.gamma - gamma) <= tol)
      return t.coeff.constant_value();
  return std::nullopt;
}

// Coefficient of the C1^p monomial at exponent `gamma` (p = 0: the
// parameter-free part).
inline std::optional<double> param_coeff_at(const ThetaSeries& s, double gamma,
                                            unsigned p, double tol = 1e-9) {
  for (const auto& t : s.terms()) {
    if (t.logpow != 0 || std::abs(t.gamma - gamma) > tol) continue;
    for (const auto& m : t.coeff.monomials()) {
      if (p == 0 && m.exps.empty()) return m.c;
      if (m.exps.size() == 1 && m.exps[0] == p) return m.c;
    }
    return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace test_util
