// blowup-asym: command line front end for the blow-up expansion library.
//
// Subcommands:
//   analyze    find balance roots and report their spectral data
//   expand     build the multi-order asymptotic expansion at each root
//   validate   run the symbolic and numeric checks on the expansion
//   examples   list (or print) the bundled problem files
//   report     analyze + expand + validate in one document
//
// Exit codes: 0 success, 2 input/parse/certificate error, 3 unsupported
// (complex) spectrum, 4 non-hyperbolic spectrum, 5 validation failure.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blowup/builtin_problems.hpp"
#include "blowup/errors.hpp"
#include "blowup/expansion.hpp"
#include "blowup/problem.hpp"
#include "blowup/report.hpp"
#include "blowup/spectral.hpp"
#include "blowup/validator.hpp"

namespace {

using namespace blowup;

// ---------------------------------------------------------------------------
// Logging (stderr only; stdout is reserved for reports)
// ---------------------------------------------------------------------------

enum LogLevel { kLogError = 0, kLogWarn = 1, kLogInfo = 2, kLogDebug = 3 };
int g_log_level = kLogWarn;

void log_at(int level, const std::string& msg) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= g_log_level)
    std::cerr << "blowup-asym [" << names[level] << "] " << msg << "\n";
}

void init_logging(int verbose, bool quiet) {
  if (const char* env = std::getenv("BLOWUP_ASYM_LOG")) {
    const std::string v{env};
    if (v == "error")
      g_log_level = kLogError;
    else if (v == "warn")
      g_log_level = kLogWarn;
    else if (v == "info")
      g_log_level = kLogInfo;
    else if (v == "debug")
      g_log_level = kLogDebug;
    else
      std::cerr << "blowup-asym [warn] ignoring unknown BLOWUP_ASYM_LOG value '"
                << v << "'\n";
  }
  if (quiet)
    g_log_level = kLogError;
  else
    g_log_level = std::min(int(kLogDebug), g_log_level + verbose);
}

// ---------------------------------------------------------------------------
// Common options
// ---------------------------------------------------------------------------

struct CommonOpts {
  std::string builtin;
  std::string file;
  int order = 0;  // 0 means: keep the problem file's (or default) order
  std::vector<std::string> seeds;   // each "x1,x2,..."
  std::vector<std::string> params;  // each "name=value[,name=value...]"
  std::vector<std::string> binds;   // each "C1=value[,C2=value...]"
  std::string json_path;            // "-" writes JSON to stdout instead of text
  std::string csv_path;
  double tol_newton = 0.0;  // 0 means: keep the problem file's value
  double tau_hyp = 0.0;
  int verbose = 0;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_csv) {
  cmd->add_option("--builtin", o.builtin,
                  "Name of a bundled problem (see `examples`)");
  cmd->add_option("--file", o.file, "Path to a problem file");
  cmd->add_option("--order", o.order, "Number of expansion orders to compute")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seeds,
                  "Newton seed \"x1,x2,...\" (repeatable; replaces the "
                  "problem file's seeds)");
  cmd->add_option("--param", o.params,
                  "Override a parameter, name=value (repeatable)");
  cmd->add_option("--bind", o.binds,
                  "Fix a free constant, e.g. C1=0.5 (repeatable)");
  cmd->add_option("--json", o.json_path,
                  "Write the JSON report to this path (\"-\" for stdout)");
  if (with_csv)
    cmd->add_option("--csv", o.csv_path,
                    "Write the numeric comparison grid to this CSV path");
  cmd->add_option("--tol-newton", o.tol_newton,
                  "Newton convergence tolerance for the balance roots")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tau-hyp", o.tau_hyp,
                  "Hyperbolicity threshold on |Re lambda|")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("-v,--verbose", o.verbose,
                "Increase stderr verbosity (repeatable)");
  cmd->add_flag("-q,--quiet", o.quiet, "Only print errors on stderr");
}

// ---------------------------------------------------------------------------
// Option parsing helpers
// ---------------------------------------------------------------------------

double parse_double(const std::string& text, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size())
    throw ProblemFormatError(what + ": malformed number '" + text + "'");
  return v;
}

// "a=1,b=2" or repeated flags; later assignments win.
std::map<std::string, double> parse_assignments(
    const std::vector<std::string>& items, const std::string& what) {
  std::map<std::string, double> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      const auto eq = part.find('=');
      if (eq == std::string::npos || eq == 0)
        throw ProblemFormatError(what + " expects name=value, got '" + part +
                                 "'");
      out[part.substr(0, eq)] = parse_double(part.substr(eq + 1), what);
    }
  }
  return out;
}

std::vector<double> parse_seed(const std::string& text, int n) {
  std::vector<double> seed;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ','))
    seed.push_back(parse_double(part, "--seed"));
  if (int(seed.size()) != n)
    throw ProblemFormatError("--seed '" + text + "' has " +
                             std::to_string(seed.size()) +
                             " components, expected " + std::to_string(n));
  return seed;
}

// Free constants are named C1..Cm (1-based, matching the report output).
std::vector<double> bind_vector(const std::map<std::string, double>& bind) {
  std::vector<double> out;
  for (const auto& [name, value] : bind) {
    if (name.size() < 2 || name[0] != 'C')
      throw ProblemFormatError("bind name '" + name +
                               "' is not of the form C1, C2, ...");
    char* end = nullptr;
    const long idx = std::strtol(name.c_str() + 1, &end, 10);
    if (end != name.c_str() + name.size() || idx < 1)
      throw ProblemFormatError("bind name '" + name +
                               "' is not of the form C1, C2, ...");
    if (int(out.size()) < idx) out.resize(idx, 0.0);
    out[idx - 1] = value;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Problem loading and the shared analysis pipeline
// ---------------------------------------------------------------------------

ProblemSpec load_spec(const CommonOpts& o) {
  if (!o.builtin.empty() && !o.file.empty())
    throw ProblemFormatError("--builtin and --file are mutually exclusive");
  if (o.builtin.empty() && o.file.empty())
    throw ProblemFormatError("one of --builtin or --file is required");
  if (!o.builtin.empty()) return load_builtin(o.builtin);

  std::ifstream in(o.file);
  if (!in) throw ProblemFormatError("cannot open '" + o.file + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string name = o.file;
  const auto slash = name.find_last_of('/');
  if (slash != std::string::npos) name = name.substr(slash + 1);
  if (name.size() > 5 && name.substr(name.size() - 5) == ".toml")
    name = name.substr(0, name.size() - 5);
  return parse_problem(buf.str(), name);
}

struct Pipeline {
  ProblemSpec spec;
  ParamMap overrides;
  std::optional<VectorField> field;
  std::vector<double> bind;

  const VectorField& f() const { return *field; }
};

Pipeline prepare(const CommonOpts& o) {
  Pipeline p;
  p.spec = load_spec(o);
  log_at(kLogInfo, "loaded problem '" + p.spec.name + "' (n = " +
                       std::to_string(p.spec.vars.size()) + ")");

  if (o.order > 0) p.spec.analysis.order = o.order;
  if (o.tol_newton > 0) p.spec.analysis.tol_newton = o.tol_newton;
  if (o.tau_hyp > 0) p.spec.analysis.tau_hyp = o.tau_hyp;
  if (!o.seeds.empty()) {
    p.spec.analysis.seeds.clear();
    for (const auto& s : o.seeds)
      p.spec.analysis.seeds.push_back(parse_seed(s, int(p.spec.vars.size())));
  }
  for (const auto& [name, value] : parse_assignments(o.binds, "--bind"))
    p.spec.analysis.bind[name] = value;
  p.bind = bind_vector(p.spec.analysis.bind);

  p.overrides = parse_assignments(o.params, "--param");
  p.field.emplace(build_field(p.spec, p.overrides));
  p.f().check_certificates();
  log_at(kLogDebug, "scaling certificates passed");
  return p;
}

struct RootItem {
  BalanceRoot root;
  SpectralData sd;
  GapData gap;
};

std::vector<RootItem> analyze_roots(const Pipeline& p) {
  SpectralOptions sopt;
  sopt.tol_newton = p.spec.analysis.tol_newton;
  sopt.tau_hyp = p.spec.analysis.tau_hyp;
  const auto roots = solve_balance(p.f(), p.spec.analysis.seeds, sopt);
  if (roots.empty())
    throw NoRootFound("no nontrivial balance root converged from the seeds");
  log_at(kLogInfo, "found " + std::to_string(roots.size()) +
                       " balance root(s)");
  std::vector<RootItem> items;
  for (const auto& r : roots) {
    RootItem it;
    it.root = r;
    it.sd = spectral_decompose(power_matrix(p.f(), r.Y0),
                               p.spec.analysis.tau_hyp);
    it.gap = delta_gap(p.f(), it.sd);
    items.push_back(std::move(it));
  }
  return items;
}

bool expandable(const RootItem& it) {
  return it.sd.hyperbolic && !it.sd.has_complex;
}

// Exit code when no root can be expanded: complex spectra dominate
// non-hyperbolic ones in the report, 3 before 4.
int no_usable_root_code(const std::vector<RootItem>& items) {
  for (const auto& it : items)
    if (it.sd.has_complex) return 3;
  return 4;
}

ordered_json doc_header(const Pipeline& p, const std::string& command) {
  ordered_json doc = problem_header_json(p.spec);
  doc["command"] = command;
  ordered_json params = ordered_json::object();
  for (const auto& [name, value] : p.f().params()) params[name] = value;
  doc["params"] = params;
  doc["order"] = p.spec.analysis.order;
  if (!p.spec.analysis.bind.empty()) {
    ordered_json b = ordered_json::object();
    for (const auto& [name, value] : p.spec.analysis.bind) b[name] = value;
    doc["bind"] = b;
  }
  return doc;
}

// Deterministic writer: 2-space indent, trailing newline, no timestamps.
void emit(const CommonOpts& o, const std::string& text,
          const ordered_json& doc) {
  const std::string rendered = doc.dump(2) + "\n";
  if (o.json_path == "-")
    std::cout << rendered;
  else
    std::cout << text;
  if (!o.json_path.empty() && o.json_path != "-") {
    std::ofstream out(o.json_path);
    if (!out)
      throw ProblemFormatError("cannot write '" + o.json_path + "'");
    out << rendered;
    log_at(kLogInfo, "wrote JSON report to " + o.json_path);
  }
}

void write_csv(const std::string& path, const std::string& body) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw ProblemFormatError("cannot write '" + path + "'");
  out << body;
  log_at(kLogInfo, "wrote numeric grid to " + path);
}

// Appends one root's grid to a shared CSV body (header only once).
void append_csv(std::string& body, const VectorField& f,
                const NumericReport& rep) {
  std::string block = numeric_csv(f, rep);
  if (body.empty()) {
    body = std::move(block);
  } else {
    const auto nl = block.find('\n');
    body += block.substr(nl + 1);
  }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_analyze(const CommonOpts& o) {
  Pipeline p = prepare(o);
  const auto items = analyze_roots(p);

  std::string text = "problem '" + p.spec.name + "'\n";
  ordered_json doc = doc_header(p, "analyze");
  ordered_json roots = ordered_json::array();
  bool any_usable = false;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    text += text_root_summary(p.f(), it.root, it.sd, it.gap, int(i));
    roots.push_back(root_analysis_json(p.f(), it.root, it.sd, it.gap));
    any_usable = any_usable || expandable(it);
  }
  doc["roots"] = roots;
  emit(o, text, doc);
  if (!any_usable) {
    log_at(kLogError, "no root has a real hyperbolic spectrum");
    return no_usable_root_code(items);
  }
  return 0;
}

int cmd_expand(const CommonOpts& o) {
  Pipeline p = prepare(o);
  const auto items = analyze_roots(p);

  ExpansionOptions eopt;
  eopt.order = p.spec.analysis.order;
  eopt.tau_hyp = p.spec.analysis.tau_hyp;

  std::string text = "problem '" + p.spec.name + "'\n";
  ordered_json doc = doc_header(p, "expand");
  ordered_json roots = ordered_json::array();
  int n_expanded = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    text += text_root_summary(p.f(), it.root, it.sd, it.gap, int(i));
    ordered_json entry = root_analysis_json(p.f(), it.root, it.sd, it.gap);
    if (!expandable(it)) {
      const char* why = it.sd.has_complex ? "complex eigenvalues"
                                          : "spectrum is not hyperbolic";
      text += "  expansion skipped: " + std::string(why) + "\n";
      entry["expansion"] = nullptr;
      entry["skipped"] = why;
    } else {
      const BlowupExpansion ex = run_expansion(p.f(), it.root, it.sd, it.gap,
                                               eopt);
      text += text_expansion(p.f(), ex);
      if (!p.bind.empty()) {
        std::vector<double> bindv = p.bind;
        bindv.resize(std::max<std::size_t>(bindv.size(), ex.n_free_params),
                     0.0);
        text += "  with bound constants:\n";
        for (int c = 0; c < p.f().n(); ++c)
          text += "    " + p.f().vars()[c] + "(t) ~ " +
                  ex.sum[c].bind(bindv).cleaned().shifted(ex.prefactor[c])
                      .render() + "\n";
      }
      entry["expansion"] = expansion_to_json(p.f(), ex);
      ++n_expanded;
    }
    roots.push_back(std::move(entry));
  }
  doc["roots"] = roots;
  emit(o, text, doc);
  if (n_expanded == 0) {
    log_at(kLogError, "no root admits a real hyperbolic expansion");
    return no_usable_root_code(items);
  }
  return 0;
}

// Shared by `validate` and `report`; `full` adds the expansion payloads.
int run_validation(const CommonOpts& o, bool full) {
  Pipeline p = prepare(o);
  const auto items = analyze_roots(p);

  ExpansionOptions eopt;
  eopt.order = p.spec.analysis.order;
  eopt.tau_hyp = p.spec.analysis.tau_hyp;

  std::string text = "problem '" + p.spec.name + "'\n";
  ordered_json doc = doc_header(p, full ? "report" : "validate");
  ordered_json roots = ordered_json::array();
  std::string csv_body;
  int n_checked = 0, n_passed = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    text += text_root_summary(p.f(), it.root, it.sd, it.gap, int(i));
    ordered_json entry = root_analysis_json(p.f(), it.root, it.sd, it.gap);
    if (!expandable(it)) {
      const char* why = it.sd.has_complex ? "complex eigenvalues"
                                          : "spectrum is not hyperbolic";
      text += "  validation skipped: " + std::string(why) + "\n";
      entry["validation"] = nullptr;
      entry["skipped"] = why;
      roots.push_back(std::move(entry));
      continue;
    }
    if (full) {
      const BlowupExpansion ex = run_expansion(p.f(), it.root, it.sd, it.gap,
                                               eopt);
      text += text_expansion(p.f(), ex);
      entry["expansion"] = expansion_to_json(p.f(), ex);
    }
    ++n_checked;
    try {
      const ValidationReport rep =
          validate(p.f(), it.root, it.sd, it.gap, eopt, p.bind);
      text += text_validation(rep);
      entry["validation"] = validation_to_json(p.f(), rep);
      append_csv(csv_body, p.f(), rep.numeric);
      if (rep.pass) ++n_passed;
    } catch (const IntegratorStepFailure& e) {
      log_at(kLogError, std::string("numeric integration failed: ") +
                            e.what());
      text += "  validation FAILED: " + std::string(e.what()) + "\n";
      entry["validation"] = ordered_json{{"error", e.what()}, {"pass", false}};
    }
    roots.push_back(std::move(entry));
  }
  doc["roots"] = roots;
  doc["pass"] = n_checked > 0 && n_passed == n_checked;
  emit(o, text, doc);
  write_csv(o.csv_path, csv_body);
  if (n_checked == 0) {
    log_at(kLogError, "no root admits a real hyperbolic expansion");
    return no_usable_root_code(items);
  }
  if (n_passed < n_checked) {
    log_at(kLogError, std::to_string(n_checked - n_passed) +
                          " of " + std::to_string(n_checked) +
                          " root validation(s) failed");
    return 5;
  }
  return 0;
}

int cmd_examples(const std::string& show) {
  if (show.empty()) {
    for (const auto& name : builtin_names())
      std::cout << name << "\n";
    return 0;
  }
  const auto text = builtin_text(show);
  if (!text) {
    log_at(kLogError, "unknown builtin problem '" + show + "'");
    return 2;
  }
  std::cout << *text;
  return 0;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ComplexSpectrumUnsupported& e) {
    log_at(kLogError, e.what());
    return 3;
  } catch (const NonHyperbolicError& e) {
    log_at(kLogError, e.what());
    return 4;
  } catch (const ValidationFailure& e) {
    log_at(kLogError, e.what());
    return 5;
  } catch (const BlowupError& e) {
    log_at(kLogError, e.what());
    return 2;
  } catch (const std::exception& e) {
    log_at(kLogError, std::string("internal error: ") + e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Multi-order asymptotic expansions of finite-time blow-up solutions "
      "of autonomous ODE systems"};
  app.require_subcommand(1);

  CommonOpts oa, oe, ov, orp;
  std::string show_name;

  CLI::App* analyze =
      app.add_subcommand("analyze", "Balance roots and spectral data");
  add_common(analyze, oa, /*with_csv=*/false);

  CLI::App* expand =
      app.add_subcommand("expand", "Multi-order blow-up expansion");
  add_common(expand, oe, /*with_csv=*/false);

  CLI::App* validate =
      app.add_subcommand("validate", "Symbolic and numeric validation");
  add_common(validate, ov, /*with_csv=*/true);

  CLI::App* examples =
      app.add_subcommand("examples", "List the bundled problems");
  examples->add_option("--show", show_name,
                       "Print the named problem file instead of the list");

  CLI::App* report =
      app.add_subcommand("report", "Analysis, expansion and validation");
  add_common(report, orp, /*with_csv=*/true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version exit 0 through CLI11's own path.
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (analyze->parsed()) {
    init_logging(oa.verbose, oa.quiet);
    return guarded([&] { return cmd_analyze(oa); });
  }
  if (expand->parsed()) {
    init_logging(oe.verbose, oe.quiet);
    return guarded([&] { return cmd_expand(oe); });
  }
  if (validate->parsed()) {
    init_logging(ov.verbose, ov.quiet);
    return guarded([&] { return run_validation(ov, /*full=*/false); });
  }
  if (examples->parsed()) {
    init_logging(0, false);
    return guarded([&] { return cmd_examples(show_name); });
  }
  if (report->parsed()) {
    init_logging(orp.verbose, orp.quiet);
    return guarded([&] { return run_validation(orp, /*full=*/true); });
  }
  return 2;
}
