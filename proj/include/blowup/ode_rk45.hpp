#pragma once

// Adaptive Dormand-Prince 5(4) integrator with a PI step-size controller.
// Small and local on purpose: the validator needs tight tolerances and a
// hook after every accepted step, nothing more.

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "blowup/errors.hpp"

namespace blowup {

struct Rk45Options {
  double rtol = 1e-12;
  double atol = 1e-14;
  int max_steps = 1000000;
  double h_init = 0.0;  // 0: choose from the interval length
};

// Integrates y' = deriv(t, y) from t0 to t1 (either direction).  `observer`,
// when given, is called after every accepted step with (t, y).
template <class F>
Eigen::VectorXd integrate_rk45(
    F&& deriv, double t0, Eigen::VectorXd y, double t1,
    const Rk45Options& opt = {},
    const std::function<void(double, const Eigen::VectorXd&)>& observer = {}) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                          c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113,
                          b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  // b - bhat (embedded 4th order error weights)
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                          e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double span = t1 - t0;
  if (span == 0.0) return y;
  const double dir = span > 0 ? 1.0 : -1.0;
  double h = opt.h_init != 0.0 ? opt.h_init : span * 1e-3;
  if (h * dir <= 0) h = -h;
  const double h_min = std::abs(span) * 1e-14;

  double t = t0;
  Eigen::VectorXd k1 = deriv(t, y);
  double err_prev = 1.0;
  for (int step = 0; step < opt.max_steps; ++step) {
    if (std::abs(t - t1) <= 1e-15 * std::abs(span)) return y;
    if ((t + h - t1) * dir > 0) h = t1 - t;

    Eigen::VectorXd k2 = deriv(t + c2 * h, y + h * (a21 * k1));
    Eigen::VectorXd k3 = deriv(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    Eigen::VectorXd k4 =
        deriv(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    Eigen::VectorXd k5 = deriv(
        t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    Eigen::VectorXd k6 = deriv(
        t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    Eigen::VectorXd ynew =
        y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    Eigen::VectorXd k7 = deriv(t + h, ynew);
    Eigen::VectorXd errv =
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err = 0.0;
    for (int i = 0; i < y.size(); ++i) {
      double sc =
          opt.atol + opt.rtol * std::max(std::abs(y(i)), std::abs(ynew(i)));
      err += (errv(i) / sc) * (errv(i) / sc);
    }
    err = std::sqrt(err / double(y.size()));

    if (!std::isfinite(err))
      throw IntegratorStepFailure("non-finite state during a step");

    if (err <= 1.0) {
      t += h;
      y = std::move(ynew);
      k1 = std::move(k7);  // FSAL
      if (observer) observer(t, y);
      double fac = 0.9 * std::pow(std::max(err, 1e-16), -0.14) *
                   std::pow(err_prev, 0.08);
      h *= std::min(5.0, std::max(0.2, fac));
      err_prev = std::max(err, 1e-16);
    } else {
      h *= std::max(0.1, 0.9 * std::pow(err, -0.2));
      if (std::abs(h) < h_min)
        throw IntegratorStepFailure("step size underflow at t = " +
                                    std::to_string(t));
    }
  }
  throw IntegratorStepFailure("step budget exhausted");
}

}  // namespace blowup
