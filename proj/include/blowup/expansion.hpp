#pragma once

// Stage 3: the multi-order expansion.  With y = theta^{-Lambda/k} Y and
// theta = t_max - t, the profile satisfies
//
//   dY/dt = theta^{-1} ( f_q(Y) - (1/k) Lambda Y )
//         + theta^{Lambda/k} f_res(theta^{-Lambda/k} Y).
//
// Writing Y = Y0 + sum_j Y_j and linearizing about the balance root Y0 gives,
// for each order j >= 1,
//
//   dY_j/dt = theta^{-1} A Y_j + g_j,
//
// where A is the power matrix and g_j collects the lower-order nonlinear and
// residual contributions.  In the Jordan frame v = Pinv Y_j each block solves
// by a per-term recurrence over theta^gamma ln^m theta sources; strictly
// stable eigendirections additionally admit homogeneous solutions, which
// enter once (at j = 1) carrying the free constants C1, C2, ...

#include <Eigen/Dense>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include "blowup/errors.hpp"
#include "blowup/spectral.hpp"
#include "blowup/theta_series.hpp"
#include "blowup/vector_field.hpp"

namespace blowup {

struct ExpansionOptions {
  int order = 3;
  double resonance_detect = 1e-10;  // |gamma+1+lambda| below: resonance zone
  double resonance_hard = 1e-12;    // and below this: definitely resonant
  double tau_hyp = 1e-8;
};

struct BlowupExpansion {
  Eigen::VectorXd Y0;
  SpectralData spec;
  GapData gap;
  int order = 1;
  double delta = kInfExp;
  double final_below = kInfExp;  // exponents strictly below this are final
  double trunc = kInfExp;        // working truncation of all series
  std::vector<std::vector<ThetaSeries>> stages;  // stages[j][i], j = 0..order-1
  std::vector<ThetaSeries> sum;                  // per component
  std::vector<double> prefactor;                 // y_i = theta^{prefactor_i} Y_i
  int n_free_params = 0;
  bool exact = false;
  std::vector<double> lattice;
  std::vector<std::string> warnings;
};

namespace detail {

// Solves dv/dt = theta^{-1} lambda v + h for one scalar component, termwise.
inline ThetaSeries scalar_solve(double lambda, const ThetaSeries& h,
                                const ExpansionOptions& opt) {
  ThetaSeries v(h.trunc() + 1.0);
  for (const auto& t : h.terms()) {
    double r = t.gamma + 1.0 + lambda;
    if (std::abs(r) <= opt.resonance_hard) {
      v.add_term(t.gamma + 1.0, t.logpow + 1,
                 t.coeff * (-1.0 / (t.logpow + 1)));
    } else if (std::abs(r) < opt.resonance_detect) {
      ThetaSeries res, nonres;
      res.add_term(t.gamma + 1.0, t.logpow + 1,
                   t.coeff * (-1.0 / (t.logpow + 1)));
      nonres.add_term(t.gamma + 1.0, t.logpow, t.coeff * (-1.0 / r));
      throw ResonanceToleranceAmbiguous(std::abs(r), res.render(),
                                        nonres.render());
    } else {
      ParamPoly b = t.coeff * (-1.0 / r);
      v.add_term(t.gamma + 1.0, t.logpow, b);
      for (int l = 1; l <= t.logpow; ++l) {
        b = b * (-double(t.logpow - l + 1) / r);
        v.add_term(t.gamma + 1.0, t.logpow - l, b);
      }
    }
  }
  return v;
}

inline std::vector<ThetaSeries> mat_vec(const Eigen::MatrixXd& M,
                                        const std::vector<ThetaSeries>& x) {
  std::vector<ThetaSeries> out;
  for (int r = 0; r < M.rows(); ++r) {
    ThetaSeries acc;
    for (int c = 0; c < M.cols(); ++c) {
      if (M(r, c) == 0.0) continue;
      acc = acc + x[c].scaled(M(r, c));
    }
    out.push_back(acc.cleaned());
  }
  return out;
}

// One linear step in the Jordan frame; injects the homogeneous stable-mode
// solutions (fresh free parameters) when `inject` is set.
inline std::vector<ThetaSeries> solve_linear_step(
    const SpectralData& sd, const std::vector<ThetaSeries>& g, bool inject,
    double trunc, int& param_counter, const ExpansionOptions& opt) {
  const int n = int(g.size());
  std::vector<ThetaSeries> h = mat_vec(sd.Pinv, g);
  std::vector<ThetaSeries> v(n);
  for (const auto& blk : sd.blocks) {
    const int m = blk.size;
    for (int p = m - 1; p >= 0; --p) {
      ThetaSeries rhs = h[blk.col + p];
      if (p + 1 < m) rhs = rhs + v[blk.col + p + 1].shifted(-1.0);
      rhs.set_trunc(std::min(rhs.trunc(), trunc));
      v[blk.col + p] = scalar_solve(blk.lambda, rhs, opt);
    }
    if (inject && blk.lambda < -opt.tau_hyp) {
      // column q of theta^{-J} = theta^{-lambda} exp(-N ln theta):
      // v_p += C * (-1)^{q-p} ln^{q-p}(theta) theta^{-lambda} / (q-p)!
      for (int q = 1; q <= m; ++q) {
        ParamPoly C = ParamPoly::variable(param_counter++);
        double fact = 1.0;
        for (int p = q; p >= 1; --p) {
          int d = q - p;
          if (d > 0) fact *= d;
          v[blk.col + p - 1].add_term(
              -blk.lambda, d, C * ((d % 2 == 0 ? 1.0 : -1.0) / fact));
        }
      }
    }
  }
  for (auto& s : v) s.set_trunc(std::min(s.trunc(), trunc));
  return mat_vec(sd.P, v);
}

}  // namespace detail

// All exponent sums of the stable generators {-Re lambda_s} and the residual
// generators, up to `bound`; always contains 0.
inline std::vector<double> predict_exponent_lattice(const SpectralData& sd,
                                                    const GapData& gap,
                                                    double bound) {
  std::vector<double> gens;
  auto push_gen = [&](double g) {
    for (double e : gens)
      if (std::abs(e - g) <= 1e-9) return;
    gens.push_back(g);
  };
  for (const auto& ev : sd.eigenvalues)
    if (ev.real() < 0) push_gen(-ev.real());
  for (double g : gap.residual_gens)
    if (g <= bound + 1e-9) push_gen(g);
  for (double g : gens)
    if (g <= 1e-9)
      throw BlowupError("non-positive lattice generator; expansion "
                        "hypotheses are violated");

  std::vector<double> lattice;
  std::priority_queue<double, std::vector<double>, std::greater<>> heap;
  heap.push(0.0);
  while (!heap.empty() && lattice.size() < 20000) {
    double e = heap.top();
    heap.pop();
    if (e > bound + 1e-9) break;
    if (!lattice.empty() && std::abs(e - lattice.back()) <= 1e-9) continue;
    lattice.push_back(e);
    for (double g : gens)
      if (e + g <= bound + 1e-9) heap.push(e + g);
  }
  return lattice;
}

inline BlowupExpansion run_expansion(const VectorField& f,
                                     const BalanceRoot& root,
                                     const SpectralData& sd,
                                     const GapData& gap,
                                     const ExpansionOptions& opt = {}) {
  if (sd.has_complex)
    throw ComplexSpectrumUnsupported(
        "the power matrix has complex eigenvalues at this root");
  if (!sd.hyperbolic)
    throw NonHyperbolicError(
        "an eigenvalue of the power matrix sits on the imaginary axis");
  if (gap.delta <= 0)
    throw BlowupError(
        "expansion step delta <= 0: the residual reaches as deep as the "
        "quasi-homogeneous part and no asymptotic ordering exists");

  const int n = f.n();
  const auto& alpha = f.type().alpha;
  const double k = f.type().k;

  BlowupExpansion ex;
  ex.Y0 = root.Y0;
  ex.spec = sd;
  ex.gap = gap;
  ex.order = opt.order;
  ex.delta = gap.delta;
  ex.final_below = double(opt.order) * gap.delta;

  double max_ak = 0.0;
  for (int i = 0; i < n; ++i) max_ak = std::max(max_ak, alpha[i] / k);
  double max_stable = 0.0;
  for (const auto& ev : sd.eigenvalues)
    max_stable = std::max(max_stable, -ev.real());
  ex.trunc = std::isfinite(gap.delta)
                 ? opt.order * gap.delta + max_ak + 1.0 + max_stable
                 : 4.0;

  for (int i = 0; i < n; ++i) ex.prefactor.push_back(-alpha[i] / k);

  auto scaled_args = [&](const std::vector<ThetaSeries>& S) {
    std::vector<ThetaSeries> args;
    for (int l = 0; l < n; ++l) args.push_back(S[l].shifted(-alpha[l] / k));
    return args;
  };

  std::vector<ThetaSeries> S0;
  for (int i = 0; i < n; ++i)
    S0.push_back(ThetaSeries::monomial(ParamPoly(root.Y0(i)), 0.0, 0,
                                       ex.trunc));
  ex.stages.push_back(S0);
  std::vector<ThetaSeries> S = S0, S_prev;

  // g_1 = theta^{Lambda/k} f_res(theta^{-Lambda/k} Y0); needed for the exact
  // flag even when order == 1.
  std::vector<ThetaSeries> g1(n);
  {
    auto args = scaled_args(S0);
    for (int i = 0; i < n; ++i) {
      if (f.residual()[i]->is_zero_const()) continue;
      g1[i] = f.residual()[i]
                  ->substitute(args, f.params())
                  .shifted(alpha[i] / k)
                  .cleaned();
    }
  }
  bool g1_zero = true;
  for (const auto& s : g1) g1_zero &= s.empty();
  ex.exact = g1_zero && sd.m_A == 0;

  Eigen::MatrixXd Dq = f.jacobian_quasi(root.Y0);
  int param_counter = 0;
  for (int j = 1; j < opt.order; ++j) {
    std::vector<ThetaSeries> g(n);
    if (j == 1) {
      g = g1;
    } else {
      const std::vector<ThetaSeries>& Yprev = ex.stages[j - 1];
      std::vector<ThetaSeries> lin = detail::mat_vec(Dq, Yprev);
      // The quasi part acts on the Y-frame series directly; only the residual
      // sees the theta^{-Lambda/k} scaling (and is pushed back by alpha_i/k).
      auto args_res_now = scaled_args(S);
      auto args_res_prev = scaled_args(S_prev);
      for (int i = 0; i < n; ++i) {
        ThetaSeries quasi_part =
            (f.quasi()[i]->substitute(S, f.params()) -
             f.quasi()[i]->substitute(S_prev, f.params()) - lin[i])
                .shifted(-1.0);
        ThetaSeries res_part;
        if (!f.residual()[i]->is_zero_const())
          res_part = (f.residual()[i]->substitute(args_res_now, f.params()) -
                      f.residual()[i]->substitute(args_res_prev, f.params()))
                         .shifted(alpha[i] / k);
        g[i] = (quasi_part + res_part).cleaned();
        g[i].set_trunc(std::min(g[i].trunc(), ex.trunc));
      }
    }

    std::vector<ThetaSeries> Yj = detail::solve_linear_step(
        sd, g, /*inject=*/j == 1, ex.trunc, param_counter, opt);
    for (auto& s : Yj) {
      s.set_trunc(std::min(s.trunc(), ex.trunc));
      s = s.cleaned();
    }

    bool all_empty = true;
    for (const auto& s : Yj) all_empty &= s.empty();
    if (all_empty) break;  // every later stage vanishes as well

    double degj = kInfExp;
    for (const auto& s : Yj) degj = std::min(degj, s.deg());
    if (degj < j * gap.delta - 1e-9)
      ex.warnings.push_back("stage " + std::to_string(j) +
                            " has degree " + std::to_string(degj) +
                            " below j*delta = " +
                            std::to_string(j * gap.delta));

    S_prev = S;
    for (int i = 0; i < n; ++i) S[i] = S[i] + Yj[i];
    ex.stages.push_back(std::move(Yj));
  }

  ex.n_free_params = param_counter;
  ex.sum = S;
  ex.lattice = predict_exponent_lattice(sd, gap, ex.trunc);
  return ex;
}

// Expansion of the original variables: y_i = theta^{-alpha_i/k} * Y_i.
inline std::vector<ThetaSeries> original_coordinates(
    const VectorField& f, const BlowupExpansion& ex) {
  std::vector<ThetaSeries> y;
  for (int i = 0; i < f.n(); ++i)
    y.push_back(ex.sum[i].shifted(ex.prefactor[i]));
  return y;
}

}  // namespace blowup
