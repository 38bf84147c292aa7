#pragma once

// Rendering of analysis results as JSON documents, plain text, and CSV.
// JSON uses ordered maps and fixed insertion order so identical inputs give
// byte-identical output.  Non-finite values (e.g. an infinite delta for
// exactly terminating expansions) serialize as null.

#include <string>
#include <vector>

#include "json.hpp"

#include "blowup/expansion.hpp"
#include "blowup/problem.hpp"
#include "blowup/spectral.hpp"
#include "blowup/validator.hpp"
#include "blowup/vector_field.hpp"

namespace blowup {

using ordered_json = nlohmann::ordered_json;

inline ordered_json json_number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline ordered_json param_poly_to_json(const ParamPoly& p) {
  ordered_json out = ordered_json::array();
  for (const auto& m : p.monomials()) {
    ordered_json mono;
    mono["params"] = m.exps;
    mono["c"] = m.c;
    out.push_back(mono);
  }
  return out;
}

inline ordered_json series_to_json(const ThetaSeries& s, double final_below) {
  ordered_json terms = ordered_json::array();
  for (const auto& t : s.terms()) {
    ordered_json tj;
    tj["gamma"] = std::abs(t.gamma) < 1e-10 ? 0.0 : t.gamma;
    tj["logpow"] = t.logpow;
    tj["coeff"] = param_poly_to_json(t.coeff);
    tj["coeff_str"] = t.coeff.render();
    tj["final"] = t.gamma < final_below - 1e-9;
    terms.push_back(tj);
  }
  ordered_json out;
  out["terms"] = terms;
  out["trunc"] = json_number_or_null(s.trunc());
  return out;
}

inline ordered_json problem_header_json(const ProblemSpec& spec) {
  ordered_json out;
  out["problem"] = spec.name;
  out["vars"] = spec.vars;
  out["alpha"] = spec.type.alpha;
  out["k"] = spec.type.k;
  return out;
}

inline ordered_json root_analysis_json(const VectorField& /*f*/,
                                       const BalanceRoot& root,
                                       const SpectralData& sd,
                                       const GapData& gap) {
  ordered_json out;
  out["Y0"] = std::vector<double>(root.Y0.data(),
                                  root.Y0.data() + root.Y0.size());
  out["newton_residual"] = root.residual;
  ordered_json A = ordered_json::array();
  for (int i = 0; i < sd.A.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (int j = 0; j < sd.A.cols(); ++j) row.push_back(sd.A(i, j));
    A.push_back(row);
  }
  out["power_matrix"] = A;
  ordered_json evs = ordered_json::array();
  for (const auto& ev : sd.eigenvalues) {
    ordered_json e;
    e["re"] = ev.real();
    e["im"] = ev.imag();
    evs.push_back(e);
  }
  out["eigenvalues"] = evs;
  ordered_json blocks = ordered_json::array();
  for (const auto& b : sd.blocks) {
    ordered_json bj;
    bj["lambda"] = b.lambda;
    bj["size"] = b.size;
    blocks.push_back(bj);
  }
  out["jordan_blocks"] = blocks;
  out["m_A"] = sd.m_A;
  out["hyperbolic"] = sd.hyperbolic;
  out["has_complex"] = sd.has_complex;
  out["jordan_recon_error"] = sd.recon_error;
  ordered_json gr = ordered_json::array();
  for (double g : gap.gamma_res) gr.push_back(json_number_or_null(g));
  out["gamma_res"] = gr;
  out["delta"] = json_number_or_null(gap.delta);
  return out;
}

inline ordered_json expansion_to_json(const VectorField& f,
                                      const BlowupExpansion& ex) {
  ordered_json out;
  out["order"] = ex.order;
  out["delta"] = json_number_or_null(ex.delta);
  out["final_below"] = json_number_or_null(ex.final_below);
  out["trunc"] = json_number_or_null(ex.trunc);
  out["exact"] = ex.exact;
  out["n_free_params"] = ex.n_free_params;
  ordered_json fp = ordered_json::array();
  for (int i = 0; i < ex.n_free_params; ++i)
    fp.push_back("C" + std::to_string(i + 1));
  out["free_params"] = fp;
  ordered_json comps = ordered_json::array();
  for (int i = 0; i < f.n(); ++i) {
    ordered_json c;
    c["var"] = f.vars()[i];
    c["prefactor"] = ex.prefactor[i];
    c["profile"] = series_to_json(ex.sum[i], ex.final_below);
    c["profile_str"] = ex.sum[i].render();
    c["orig_str"] = ex.sum[i].shifted(ex.prefactor[i]).render();
    comps.push_back(c);
  }
  out["components"] = comps;
  ordered_json stages = ordered_json::array();
  for (const auto& st : ex.stages) {
    ordered_json sj = ordered_json::array();
    for (const auto& s : st) sj.push_back(s.render());
    stages.push_back(sj);
  }
  out["stages"] = stages;
  out["lattice"] = ex.lattice;
  out["warnings"] = ex.warnings;
  return out;
}

inline ordered_json validation_to_json(const VectorField& f,
                                       const ValidationReport& rep) {
  ordered_json out;
  ordered_json res;
  ordered_json deg = ordered_json::array();
  for (double d : rep.residual.residual_deg)
    deg.push_back(json_number_or_null(d));
  res["residual_deg"] = deg;
  ordered_json thr = ordered_json::array();
  for (double d : rep.residual.threshold)
    thr.push_back(json_number_or_null(d));
  res["threshold"] = thr;
  res["worst_coeff"] = rep.residual.worst_coeff;
  res["pass"] = rep.residual.pass;
  out["symbolic_residual"] = res;

  ordered_json num;
  num["rho"] = json_number_or_null(rep.numeric.rho);
  ordered_json fits = ordered_json::array();
  for (const auto& fit : rep.numeric.fits) {
    ordered_json fj;
    fj["component"] =
        fit.component < 0 ? std::string("max") : f.vars()[fit.component];
    fj["predicted"] = json_number_or_null(fit.predicted);
    fj["predicted_orig"] = json_number_or_null(fit.predicted_orig);
    fj["predicted_window"] = json_number_or_null(fit.predicted_window);
    fj["measured"] = fit.measured;
    fj["points_used"] = fit.points_used;
    fj["max_error"] = fit.max_error;
    fj["floor_pass"] = fit.floor_pass;
    fj["pass"] = fit.pass;
    fits.push_back(fj);
  }
  num["fits"] = fits;
  num["pass"] = rep.numeric.pass;
  out["numeric"] = num;

  if (rep.s_time) {
    ordered_json st;
    st["lambda_target"] = rep.s_time->lambda_target;
    st["rate_measured"] = rep.s_time->rate_measured;
    st["s0"] = rep.s_time->s0;
    st["fit_window"] = rep.s_time->fit_window;
    st["within_10pct"] = rep.s_time->within_10pct;
    out["s_time"] = st;
  } else {
    out["s_time"] = nullptr;
  }
  out["pass"] = rep.pass;
  return out;
}

inline std::string numeric_csv(const VectorField& f,
                               const NumericReport& rep) {
  std::string out = "theta,component,y_expansion,y_numeric,abs_error\n";
  char buf[160];
  for (std::size_t j = 0; j < rep.grid.size(); ++j)
    for (int i = 0; i < f.n(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g,%.17g,%.17g\n",
                    rep.grid[j], f.vars()[i].c_str(), rep.y_exp[j][i],
                    rep.y_num[j][i], rep.abs_err[j][i]);
      out += buf;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Plain-text rendering
// ---------------------------------------------------------------------------

inline std::string text_root_summary(const VectorField& /*f*/,
                                     const BalanceRoot& root,
                                     const SpectralData& sd,
                                     const GapData& gap, int index) {
  std::string out = "root " + std::to_string(index) + ": Y0 = (";
  for (int i = 0; i < root.Y0.size(); ++i)
    out += (i ? ", " : "") + ParamPoly::format_double(root.Y0(i));
  out += ")\n  eigenvalues:";
  for (const auto& ev : sd.eigenvalues) {
    out += " " + ParamPoly::format_double(ev.real());
    if (ev.imag() != 0.0)
      out += (ev.imag() > 0 ? "+" : "") + ParamPoly::format_double(ev.imag()) +
             "i";
  }
  out += "\n  m_A = " + std::to_string(sd.m_A);
  out += sd.hyperbolic ? ", hyperbolic" : ", NOT hyperbolic";
  if (sd.has_complex) out += ", complex spectrum";
  out += "\n  gamma_res = (";
  for (std::size_t i = 0; i < gap.gamma_res.size(); ++i)
    out += (i ? ", " : "") + (std::isfinite(gap.gamma_res[i])
                                  ? ParamPoly::format_double(gap.gamma_res[i])
                                  : std::string("inf"));
  out += "), delta = " +
         (std::isfinite(gap.delta) ? ParamPoly::format_double(gap.delta)
                                   : std::string("inf")) +
         "\n";
  return out;
}

inline std::string text_expansion(const VectorField& f,
                                  const BlowupExpansion& ex) {
  std::string out;
  out += "order " + std::to_string(ex.order) + " expansion";
  if (ex.exact) out += " (exact: all later stages vanish)";
  out += "; exponents below " +
         (std::isfinite(ex.final_below)
              ? ParamPoly::format_double(ex.final_below)
              : std::string("inf")) +
         " are final\n";
  if (ex.n_free_params > 0) {
    out += "free parameters:";
    for (int i = 0; i < ex.n_free_params; ++i)
      out += " C" + std::to_string(i + 1);
    out += "\n";
  }
  for (int i = 0; i < f.n(); ++i) {
    out += "  " + f.vars()[i] + "(t) ~ " +
           ex.sum[i].shifted(ex.prefactor[i]).render() + "\n";
  }
  for (const auto& w : ex.warnings) out += "  warning: " + w + "\n";
  return out;
}

inline std::string text_validation(const ValidationReport& rep) {
  std::string out;
  out += std::string("symbolic residual: ") +
         (rep.residual.pass ? "PASS" : "FAIL");
  out += " (surviving coeff max";
  for (double w : rep.residual.worst_coeff)
    out += " " + ParamPoly::format_double(w);
  out += ")\n";
  const SlopeFit& fit = rep.numeric.fits[0];
  out += "numeric defect: " + std::string(rep.numeric.pass ? "PASS" : "FAIL");
  if (fit.floor_pass) {
    out += " (all defects below floor; max " +
           ParamPoly::format_double(fit.max_error) + ")";
  } else {
    out += " (slope " + ParamPoly::format_double(fit.measured) +
           " vs predicted " + ParamPoly::format_double(fit.predicted);
    if (std::abs(fit.predicted_window - fit.predicted) > 1e-9)
      out += " (window-blended " +
             ParamPoly::format_double(fit.predicted_window) + ")";
    out += ", " + std::to_string(fit.points_used) + " points)";
  }
  out += "\n";
  if (rep.s_time) {
    out += "s-time decay rate: " +
           ParamPoly::format_double(rep.s_time->rate_measured) +
           " vs eigenvalue " +
           ParamPoly::format_double(rep.s_time->lambda_target) +
           (rep.s_time->within_10pct ? " (within 10%)" : " (outside 10%)") +
           " [diagnostic]\n";
  }
  out += std::string("validation: ") + (rep.pass ? "PASS" : "FAIL") + "\n";
  return out;
}

}  // namespace blowup
