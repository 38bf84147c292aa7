#pragma once

// Autonomous vector field split as f = f_q + f_res, where f_q is
// quasi-homogeneous of type (alpha, k):  f_q,i(s^Lambda x) = s^{k+alpha_i}
// f_q,i(x)  with Lambda = diag(alpha), and f_res collects every term of
// strictly lower scaling weight.  The split is either given explicitly or
// derived per-monomial; both variants are checked by sampled scaling
// certificates before any analysis runs.

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "blowup/errors.hpp"
#include "blowup/expr.hpp"

namespace blowup {

inline constexpr double kTolWeight = 1e-9;      // quasi-weight match window
inline constexpr double kTolCertificate = 1e-9; // scaling-identity tolerance

struct QhType {
  std::vector<double> alpha;
  double k = 1.0;
  int n() const { return int(alpha.size()); }
};

struct SplitField {
  std::vector<ExprPtr> quasi, residual;
};

// Splits each component (a sum of monomials) by scaling weight <alpha, beta>:
// weight == k + alpha_i joins the quasi part, smaller weights join the
// residual, larger weights are rejected with WeightTooHigh.
inline SplitField auto_split(const std::vector<ExprPtr>& field,
                             const QhType& type,
                             const std::vector<std::string>& vars,
                             const ParamMap& params,
                             double tol = kTolWeight) {
  SplitField out;
  for (int i = 0; i < type.n(); ++i) {
    double target = type.k + type.alpha[i];
    std::vector<ExprPtr> q, r;
    for (const auto& m : monomial_terms(field[i], type.n(), params)) {
      double w = 0.0;
      for (int l = 0; l < type.n(); ++l) w += type.alpha[l] * m.exps[l];
      if (w > target + tol)
        throw WeightTooHigh(i, w, target, m.term->render(vars));
      (std::abs(w - target) <= tol ? q : r).push_back(m.term);
    }
    out.quasi.push_back(Expr::sum(std::move(q)));
    out.residual.push_back(Expr::sum(std::move(r)));
  }
  return out;
}

struct CertificateOptions {
  int samples = 20;
  int max_draws = 200;
  std::vector<double> scales{10.0, 100.0, 1000.0};
  double tol = kTolCertificate;
  unsigned seed = 12345;
};

class VectorField {
 public:
  VectorField(QhType type, std::vector<std::string> vars,
              std::vector<ExprPtr> quasi, std::vector<ExprPtr> residual,
              ParamMap params)
      : type_(std::move(type)),
        vars_(std::move(vars)),
        quasi_(std::move(quasi)),
        residual_(std::move(residual)),
        params_(std::move(params)) {
    const int n = type_.n();
    dquasi_.resize(n);
    for (int i = 0; i < n; ++i) {
      dquasi_[i].resize(n);
      for (int j = 0; j < n; ++j) dquasi_[i][j] = quasi_[i]->differentiate(j);
    }
  }

  const QhType& type() const { return type_; }
  int n() const { return type_.n(); }
  const std::vector<std::string>& vars() const { return vars_; }
  const ParamMap& params() const { return params_; }
  const std::vector<ExprPtr>& quasi() const { return quasi_; }
  const std::vector<ExprPtr>& residual() const { return residual_; }

  bool residual_is_zero() const {
    for (const auto& r : residual_)
      if (!r->is_zero_const()) return false;
    return true;
  }

  Eigen::VectorXd evaluate_quasi(const Eigen::VectorXd& y) const {
    return eval_components(quasi_, y);
  }
  Eigen::VectorXd evaluate_residual(const Eigen::VectorXd& y) const {
    return eval_components(residual_, y);
  }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& y) const {
    return evaluate_quasi(y) + evaluate_residual(y);
  }

  Eigen::MatrixXd jacobian_quasi(const Eigen::VectorXd& y) const {
    const int n = type_.n();
    std::vector<double> pt(y.data(), y.data() + n);
    Eigen::MatrixXd J(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        J(i, j) = dquasi_[i][j]->evaluate(pt, params_);
    return J;
  }

  // Df_q(y)*Lambda*y - (k I + Lambda) f_q(y); identically zero iff f_q is
  // quasi-homogeneous of type (alpha, k) near y.
  Eigen::VectorXd euler_residual(const Eigen::VectorXd& y) const {
    const int n = type_.n();
    Eigen::VectorXd ly(n);
    for (int i = 0; i < n; ++i) ly(i) = type_.alpha[i] * y(i);
    Eigen::VectorXd fq = evaluate_quasi(y);
    Eigen::VectorXd out = jacobian_quasi(y) * ly;
    for (int i = 0; i < n; ++i)
      out(i) -= (type_.k + type_.alpha[i]) * fq(i);
    return out;
  }

  // Sampled scaling certificates.  Throws CertificateError with the worst
  // offending sample when either check fails; domain errors during sampling
  // trigger a redraw.
  void check_certificates(const CertificateOptions& opt = {}) const {
    std::mt19937 rng(opt.seed);
    std::normal_distribution<double> gauss;
    const int n = type_.n();
    int accepted = 0;
    for (int draw = 0; draw < opt.max_draws && accepted < opt.samples;
         ++draw) {
      Eigen::VectorXd x(n);
      for (int i = 0; i < n; ++i) x(i) = gauss(rng);
      if (x.norm() < 1e-8) continue;
      x /= x.norm();
      try {
        check_sample(x, opt);
        ++accepted;
      } catch (const DivisionNearZero&) {
      } catch (const NegativeBaseRealPower&) {
      }
    }
    if (accepted < opt.samples)
      throw CertificateError(
          "could not find " + std::to_string(opt.samples) +
          " domain-valid sample points (got " + std::to_string(accepted) +
          "); the field may be singular on most of the unit sphere");
  }

 private:
  Eigen::VectorXd eval_components(const std::vector<ExprPtr>& comps,
                                  const Eigen::VectorXd& y) const {
    const int n = type_.n();
    std::vector<double> pt(y.data(), y.data() + n);
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) out(i) = comps[i]->evaluate(pt, params_);
    return out;
  }

  Eigen::VectorXd scaled_point(const Eigen::VectorXd& x, double s) const {
    Eigen::VectorXd sx(type_.n());
    for (int i = 0; i < type_.n(); ++i)
      sx(i) = std::pow(s, type_.alpha[i]) * x(i);
    return sx;
  }

  void check_sample(const Eigen::VectorXd& x,
                    const CertificateOptions& opt) const {
    const int n = type_.n();
    Eigen::VectorXd fx = evaluate_quasi(x);
    for (double s : opt.scales) {
      Eigen::VectorXd fsx = evaluate_quasi(scaled_point(x, s));
      for (int i = 0; i < n; ++i) {
        double want = std::pow(s, type_.k + type_.alpha[i]) * fx(i);
        double err = std::abs(fsx(i) - want);
        if (err > opt.tol * (1.0 + std::abs(want)))
          throw CertificateError(
              "quasi part of component " + std::to_string(i) +
              " violates the scaling identity at s=" + std::to_string(s) +
              " (error " + std::to_string(err) + ")");
      }
    }
    if (residual_is_zero()) return;
    double s_lo = opt.scales.front(), s_hi = opt.scales.back();
    Eigen::VectorXd r_lo = evaluate_residual(scaled_point(x, s_lo));
    Eigen::VectorXd r_hi = evaluate_residual(scaled_point(x, s_hi));
    for (int i = 0; i < n; ++i) {
      double v_lo =
          std::abs(r_lo(i)) / std::pow(s_lo, type_.k + type_.alpha[i]);
      double v_hi =
          std::abs(r_hi(i)) / std::pow(s_hi, type_.k + type_.alpha[i]);
      if (v_hi > 0.5 * v_lo + 1e-12)
        throw CertificateError(
            "residual of component " + std::to_string(i) +
            " does not decay below the quasi-homogeneous weight (ratio " +
            std::to_string(v_hi / (v_lo + 1e-300)) + " over scales " +
            std::to_string(s_lo) + ".." + std::to_string(s_hi) + ")");
    }
  }

  QhType type_;
  std::vector<std::string> vars_;
  std::vector<ExprPtr> quasi_, residual_;
  ParamMap params_;
  std::vector<std::vector<ExprPtr>> dquasi_;
};

}  // namespace blowup
