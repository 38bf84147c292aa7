#pragma once

// Stage 2 of the pipeline: find the constant leading profiles Y0 (roots of
// the balance map), form the power matrix A = -(1/k) Lambda + Df_q(Y0), and
// decompose its spectrum into real Jordan structure.  The spectral gap data
// (residual depth gamma_i and the step delta) fixes how far each expansion
// order can reach.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "blowup/errors.hpp"
#include "blowup/theta_series.hpp"
#include "blowup/vector_field.hpp"

namespace blowup {

struct SpectralOptions {
  double tol_newton = 1e-12;
  int max_iter = 100;
  double tau_hyp = 1e-8;       // hyperbolicity threshold on |Re lambda|
  double dedup_tol = 1e-8;     // roots closer than this are the same
  double zero_tol = 1e-8;      // discard the trivial root Y = 0
  double grid_extent = 10.0;   // fallback seed grid [-L, L]^n
  int grid_points = 5;         // per axis
};

struct BalanceRoot {
  Eigen::VectorXd Y0;
  double residual = 0.0;  // ||f_q(Y0) - (1/k) Lambda Y0||_inf at convergence
};

// ---------------------------------------------------------------------------
// Balance roots:  f_q(Y) = (1/k) Lambda Y,  Y != 0, via damped-free Newton
// from user seeds (or a coarse grid when none are given).
// ---------------------------------------------------------------------------

inline std::vector<BalanceRoot> solve_balance(
    const VectorField& f, const std::vector<std::vector<double>>& seeds,
    const SpectralOptions& opt = {}) {
  const int n = f.n();
  Eigen::VectorXd lam(n);
  for (int i = 0; i < n; ++i) lam(i) = f.type().alpha[i] / f.type().k;

  auto G = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return f.evaluate_quasi(y) - lam.cwiseProduct(y);
  };
  auto DG = [&](const Eigen::VectorXd& y) -> Eigen::MatrixXd {
    Eigen::MatrixXd J = f.jacobian_quasi(y);
    for (int i = 0; i < n; ++i) J(i, i) -= lam(i);
    return J;
  };

  std::vector<Eigen::VectorXd> starts;
  for (const auto& s : seeds)
    starts.emplace_back(Eigen::Map<const Eigen::VectorXd>(s.data(), n));
  if (starts.empty()) {
    if (n > 3)
      throw NoRootFound(
          "no seeds given and the fallback grid is only available for n <= 3");
    std::vector<double> axis;
    for (int i = 0; i < opt.grid_points; ++i)
      axis.push_back(-opt.grid_extent +
                     2.0 * opt.grid_extent * i / (opt.grid_points - 1));
    int total = 1;
    for (int d = 0; d < n; ++d) total *= opt.grid_points;
    for (int idx = 0; idx < total; ++idx) {
      Eigen::VectorXd s(n);
      int rem = idx;
      for (int d = 0; d < n; ++d) {
        s(d) = axis[rem % opt.grid_points];
        rem /= opt.grid_points;
      }
      starts.push_back(s);
    }
  }

  std::vector<BalanceRoot> roots;
  for (const auto& s0 : starts) {
    Eigen::VectorXd y = s0;
    bool ok = false;
    try {
      for (int it = 0; it < opt.max_iter; ++it) {
        Eigen::VectorXd g = G(y);
        if (g.lpNorm<Eigen::Infinity>() <= opt.tol_newton) {
          ok = true;
          break;
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(DG(y));
        Eigen::VectorXd step = lu.solve(-g);
        if (!step.allFinite())
          throw JacobianSingularAtIterate("while iterating from a seed");
        y += step;
        if (!y.allFinite() || y.norm() > 1e8) break;  // diverged
      }
    } catch (const BlowupError&) {
      continue;  // domain error or singular Jacobian: drop this seed
    }
    if (!ok) continue;
    if (y.lpNorm<Eigen::Infinity>() < opt.zero_tol) continue;  // trivial root
    // Components within 1e-9 of an integer snap to it when the snapped point
    // still satisfies the balance equation; exact roots then print exactly.
    {
      Eigen::VectorXd snapped = y;
      bool moved = false;
      for (int i = 0; i < n; ++i) {
        double r = std::round(snapped(i)) + 0.0;  // +0.0 normalizes -0.0
        if (snapped(i) != r && std::abs(snapped(i) - r) <= 1e-9) {
          snapped(i) = r;
          moved = true;
        }
      }
      if (moved && G(snapped).lpNorm<Eigen::Infinity>() <= opt.tol_newton)
        y = snapped;
    }
    bool dup = false;
    for (const auto& r : roots)
      if ((r.Y0 - y).lpNorm<Eigen::Infinity>() <= opt.dedup_tol) {
        dup = true;
        break;
      }
    if (!dup) roots.push_back({y, G(y).lpNorm<Eigen::Infinity>()});
  }
  std::sort(roots.begin(), roots.end(),
            [](const BalanceRoot& a, const BalanceRoot& b) {
              for (int i = 0; i < a.Y0.size(); ++i) {
                if (a.Y0(i) < b.Y0(i) - 1e-12) return true;
                if (a.Y0(i) > b.Y0(i) + 1e-12) return false;
              }
              return false;
            });
  return roots;
}

inline Eigen::MatrixXd power_matrix(const VectorField& f,
                                    const Eigen::VectorXd& Y0) {
  Eigen::MatrixXd A = f.jacobian_quasi(Y0);
  for (int i = 0; i < f.n(); ++i)
    A(i, i) -= f.type().alpha[i] / f.type().k;
  return A;
}

// ---------------------------------------------------------------------------
// Spectral decomposition with real Jordan structure
// ---------------------------------------------------------------------------

struct JordanBlock {
  double lambda = 0.0;
  int size = 1;
  int col = 0;  // first column of this block's chain inside P
};

struct SpectralData {
  Eigen::MatrixXd A;
  std::vector<std::complex<double>> eigenvalues;  // sorted (re, im), w/ mult
  bool has_complex = false;
  bool hyperbolic = false;
  int m_A = 0;  // count of eigenvalues with Re < -tau_hyp (the stable ones)
  std::vector<JordanBlock> blocks;  // empty when has_complex
  Eigen::MatrixXd P, Pinv, J;
  double recon_error = 0.0;  // ||A - P J Pinv||_F / max(1, ||A||_F)
};

namespace detail {

inline Eigen::MatrixXd null_basis(const Eigen::MatrixXd& M, double tau) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tau) ++rank;
  return svd.matrixV().rightCols(M.cols() - rank);
}

// Orthonormal basis of the column span of M (rank-revealing).
inline Eigen::MatrixXd ortho_span(const Eigen::MatrixXd& M) {
  if (M.cols() == 0) return M;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
  qr.setThreshold(1e-10);
  int r = qr.rank();
  Eigen::MatrixXd Q =
      qr.householderQ() * Eigen::MatrixXd::Identity(M.rows(), r);
  return Q;
}

}  // namespace detail

inline SpectralData spectral_decompose(const Eigen::MatrixXd& A,
                                       double tau_hyp = 1e-8) {
  const int n = int(A.rows());
  SpectralData out;
  out.A = A;

  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success)
    throw IllConditionedJordan("eigenvalue iteration failed to converge");
  std::vector<std::complex<double>> evs(n);
  for (int i = 0; i < n; ++i) evs[i] = es.eigenvalues()(i);
  std::sort(evs.begin(), evs.end(), [](auto a, auto b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });

  const double tau_cluster = 1e-6 * std::max(1.0, A.norm());
  // group eigenvalues closer than tau_cluster (sweep over the sorted list)
  std::vector<std::vector<std::complex<double>>> clusters;
  for (const auto& ev : evs) {
    if (!clusters.empty() && std::abs(ev - clusters.back().back()) <= tau_cluster)
      clusters.back().push_back(ev);
    else
      clusters.push_back({ev});
  }

  double min_abs_re = kInfExp;
  for (const auto& ev : evs) {
    min_abs_re = std::min(min_abs_re, std::abs(ev.real()));
    if (ev.real() < -tau_hyp) ++out.m_A;
  }
  out.hyperbolic = min_abs_re > tau_hyp;

  struct RealCluster {
    double lambda;
    int mult;
  };
  std::vector<RealCluster> real_clusters;
  for (const auto& c : clusters) {
    std::complex<double> mean{0, 0};
    for (const auto& ev : c) mean += ev;
    mean /= double(c.size());
    if (std::abs(mean.imag()) > tau_cluster) {
      out.has_complex = true;
      for (const auto& ev : c) out.eigenvalues.push_back(ev);
    } else {
      real_clusters.push_back({mean.real(), int(c.size())});
      for (int i = 0; i < int(c.size()); ++i)
        out.eigenvalues.push_back({mean.real(), 0.0});
    }
  }
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end(), [](auto a, auto b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  if (out.has_complex) return out;  // no real Jordan data in this case

  // Jordan structure per real eigenvalue.  Rank tolerances follow the
  // cluster tolerance: sigma below tau_cluster^p counts as zero for B^p
  // (powers of a nearly-nilpotent factor shrink geometrically).
  out.P.resize(n, n);
  out.J = Eigen::MatrixXd::Zero(n, n);
  int col = 0;
  for (const auto& rc : real_clusters) {
    Eigen::MatrixXd B = A - rc.lambda * Eigen::MatrixXd::Identity(n, n);
    std::vector<int> defect{0};  // defect[p] = dim ker(B^p)
    std::vector<Eigen::MatrixXd> Bpow{Eigen::MatrixXd::Identity(n, n)};
    int pmax = 0;
    while (defect.back() < rc.mult) {
      ++pmax;
      if (pmax > rc.mult)
        throw IllConditionedJordan(
            "nullspace growth is inconsistent with the multiplicity of "
            "lambda = " +
            std::to_string(rc.lambda));
      Bpow.push_back(Bpow.back() * B);
      double tau_p = std::pow(tau_cluster, pmax);
      defect.push_back(int(detail::null_basis(Bpow.back(), tau_p).cols()));
    }
    // sizes: number of blocks of size >= p is defect[p] - defect[p-1]
    std::vector<int> ge(pmax + 2, 0);
    for (int p = 1; p <= pmax; ++p) ge[p] = defect[p] - defect[p - 1];
    std::vector<int> sizes;
    for (int p = pmax; p >= 1; --p)
      for (int c2 = 0; c2 < ge[p] - ge[p + 1]; ++c2) sizes.push_back(p);
    std::sort(sizes.rbegin(), sizes.rend());

    Eigen::MatrixXd chosen(n, 0);
    for (int m : sizes) {
      double tau_m = std::pow(tau_cluster, m);
      Eigen::MatrixXd Nm = detail::null_basis(Bpow[m], tau_m);
      Eigen::MatrixXd obstruction(n, 0);
      if (m >= 2) {
        Eigen::MatrixXd Nm1 =
            detail::null_basis(Bpow[m - 1], std::pow(tau_cluster, m - 1));
        obstruction = Nm1;
      }
      if (chosen.cols() > 0) {
        Eigen::MatrixXd both(n, obstruction.cols() + chosen.cols());
        both << obstruction, chosen;
        obstruction = both;
      }
      Eigen::MatrixXd O = detail::ortho_span(obstruction);
      Eigen::VectorXd best;
      double best_score = -1.0;
      for (int c2 = 0; c2 < Nm.cols(); ++c2) {
        Eigen::VectorXd cand = Nm.col(c2);
        if (O.cols() > 0) cand -= O * (O.transpose() * cand);
        if (cand.norm() < 1e-8) continue;
        double score = m >= 2 ? (Bpow[m - 1] * cand).norm() : cand.norm();
        if (score > best_score) {
          best_score = score;
          best = cand;
        }
      }
      if (best_score <= 1e-10)
        throw IllConditionedJordan(
            "could not pick a chain generator of height " +
            std::to_string(m) + " for lambda = " + std::to_string(rc.lambda));
      // chain u_p = B^{m-p} * top  (u_1 is the eigenvector)
      std::vector<Eigen::VectorXd> chain(m);
      for (int p = 1; p <= m; ++p) chain[p - 1] = Bpow[m - p] * best;
      // normalize so the eigenvector's first significant entry is 1
      const Eigen::VectorXd& u1 = chain[0];
      double mx = u1.lpNorm<Eigen::Infinity>();
      double scale = 1.0;
      for (int i = 0; i < n; ++i)
        if (std::abs(u1(i)) > 1e-8 * mx) {
          scale = u1(i);
          break;
        }
      JordanBlock blk{rc.lambda, m, col};
      for (int p = 0; p < m; ++p) {
        out.P.col(col + p) = chain[p] / scale;
        out.J(col + p, col + p) = rc.lambda;
        if (p + 1 < m) out.J(col + p, col + p + 1) = 1.0;
      }
      out.blocks.push_back(blk);
      Eigen::MatrixXd grown(n, chosen.cols() + m);
      if (chosen.cols() > 0) grown.leftCols(chosen.cols()) = chosen;
      for (int p = 0; p < m; ++p)
        grown.col(chosen.cols() + p) = out.P.col(col + p);
      chosen = grown;
      col += m;
    }
  }
  if (col != n)
    throw IllConditionedJordan("Jordan chains do not span the space");

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(out.P);
  out.Pinv = lu.inverse();
  out.recon_error = (A - out.P * out.J * out.Pinv).norm() /
                    std::max(1.0, A.norm());
  if (!out.Pinv.allFinite() || out.recon_error > 1e-9)
    throw IllConditionedJordan(
        "reconstruction error " + std::to_string(out.recon_error) +
        " exceeds 1e-9");
  return out;
}

// ---------------------------------------------------------------------------
// Residual depth and expansion step
// ---------------------------------------------------------------------------

struct GapData {
  std::vector<double> gamma_res;  // per component; +inf for zero residual
  double delta = kInfExp;         // exponent step between expansion orders
  std::vector<double> residual_gens;  // lattice generators from the residual
};

// gamma_i = series degree of f_res,i(theta^{-Lambda/k} x): exact per-monomial
// arithmetic when the residual is a sum of monomials, otherwise numeric
// sampling at random positive points.
inline GapData delta_gap(const VectorField& f, const SpectralData& sd) {
  const int n = f.n();
  const auto& alpha = f.type().alpha;
  const double k = f.type().k;
  GapData out;
  out.gamma_res.assign(n, kInfExp);

  auto push_gen = [&](double g) {
    for (double e : out.residual_gens)
      if (std::abs(e - g) <= 1e-9) return;
    out.residual_gens.push_back(g);
  };

  std::mt19937 rng(987654);
  std::uniform_real_distribution<double> unif(0.5, 2.0);
  const double sample_trunc = 10.0;

  for (int i = 0; i < n; ++i) {
    const ExprPtr& res = f.residual()[i];
    if (res->is_zero_const()) continue;
    if (is_monomial_sum(res, n, f.params())) {
      for (const auto& m : monomial_terms(res, n, f.params())) {
        if (m.coeff == 0.0) continue;
        double w = 0.0;
        for (int l = 0; l < n; ++l) w += alpha[l] * m.exps[l];
        double gamma = -w / k + 0.0;  // +0.0 normalizes -0.0
        out.gamma_res[i] = std::min(out.gamma_res[i], gamma);
        push_gen(1.0 + alpha[i] / k + gamma);
      }
    } else {
      for (int trial = 0; trial < 3; ++trial) {
        std::vector<ThetaSeries> args;
        for (int l = 0; l < n; ++l)
          args.push_back(ThetaSeries::monomial(ParamPoly(unif(rng)),
                                               -alpha[l] / k, 0,
                                               sample_trunc));
        ThetaSeries s = res->substitute(args, f.params()).cleaned();
        out.gamma_res[i] = std::min(out.gamma_res[i], s.deg());
        for (const auto& t : s.terms())
          push_gen(1.0 + alpha[i] / k + t.gamma);
      }
    }
  }

  double from_res = kInfExp;
  for (int i = 0; i < n; ++i)
    from_res = std::min(from_res, alpha[i] / k + out.gamma_res[i]);
  if (std::isfinite(from_res)) from_res += 1.0;

  double from_stable = kInfExp;
  for (const auto& ev : sd.eigenvalues)
    if (ev.real() < 0) from_stable = std::min(from_stable, -ev.real());

  out.delta = std::min(from_res, from_stable);
  std::sort(out.residual_gens.begin(), out.residual_gens.end());
  return out;
}

}  // namespace blowup
