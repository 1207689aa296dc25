#pragma once

/** @file
 * Commands behind the command-line tool.  Each returns a JSON document and
 * optionally writes CSV side files; the caller decides where JSON goes.
 */

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "rfl/config.hpp"
#include "rfl/filtering.hpp"
#include "rfl/minimax.hpp"
#include "rfl/montecarlo.hpp"
#include "rfl/oracle.hpp"

namespace rfl::cli {

/// Exit status for an error kind.
inline int exit_code(ErrorKind kind) {
  if (kind == ErrorKind::ConfigParse) return 2;
  if (is_numerical_failure(kind)) return 4;
  return 3;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

inline json meta(const Config& c, const std::string& command) {
  const json cfg = emit_config(c);
  return json{{"command", command},
              {"config_hash", config_hash(c)},
              {"seed", c.seed},
              {"r_gap_kernel", to_string(c.solver.kernel)},
              {"tolerances", cfg.at("tolerances")},
              {"solver", cfg.at("solver")},
              {"timestamp", utc_timestamp()}};
}

/// Removes every "timestamp" key, recursively.
inline json strip_timestamps(json j) {
  if (j.is_object()) {
    j.erase("timestamp");
    for (auto& [_, v] : j.items()) v = strip_timestamps(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_timestamps(v);
  }
  return j;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
  out << text;
}

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_real(const std::vector<double>& t, const Vector& v, const char* header) {
  std::string out = std::string(header) + "\n";
  for (std::size_t k = 0; k < t.size(); ++k) out += fmt(t[k]) + "," + fmt(v[static_cast<Eigen::Index>(k)]) + "\n";
  return out;
}

inline std::string csv_complex(const FrequencyGrid& grid, const CVector& h) {
  std::string out = "lambda,re,im\n";
  for (Eigen::Index m = 0; m < h.size(); ++m) {
    out += fmt(grid[m]) + "," + fmt(h[m].real()) + "," + fmt(h[m].imag()) + "\n";
  }
  return out;
}

inline std::string csv_matrix(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out += (j ? "," : "") + fmt(m(i, j));
    out += "\n";
  }
  return out;
}

inline json diagnostics_json(const FilterDiagnostics& d) {
  json out{{"orthogonality", d.orthogonality},
           {"orthogonality_scale", d.orthogonality_scale},
           {"leakage", d.leakage},
           {"dual_gap", d.dual_gap},
           {"energy_ratio", d.energy_ratio},
           {"solve_residual", d.solve_residual},
           {"condition", d.condition},
           {"regularized", d.regularized},
           {"ridge", d.ridge},
           {"nyquist_ratio", d.nyquist_ratio}};
  if (d.minimality) {
    out["minimality"] = json{{"value", d.minimality->value},
                             {"doubled_value", d.minimality->doubled_value},
                             {"diverged", d.minimality->diverged}};
  }
  return out;
}

inline json grids_json(const FilterProblem& p) {
  const auto& d = p.discretization();
  json gaps = json::array();
  for (const auto& g : p.pattern().gaps()) gaps.push_back({g.lo, g.hi});
  return json{{"cutoff", d.cutoff},
              {"n_freq", d.n_freq},
              {"dt", d.dt},
              {"horizon", d.horizon},
              {"obs_horizon", d.obs_horizon},
              {"n_target", p.target().size()},
              {"n_obs", p.observation().size()},
              {"gaps", gaps}};
}

inline std::optional<std::filesystem::path> out_dir(const Config& c) {
  if (!c.output_dir) return std::nullopt;
  return std::filesystem::path(*c.output_dir);
}

}  // namespace detail

struct FilterArtifacts {
  bool dump_operators = false;
};

inline json run_filter(const Config& c, FilterArtifacts artifacts = {}) {
  const FilterProblem p = build_problem(c);
  const SpectralDensity f = build_density(c.f);
  const SpectralDensity g = build_density(c.g);
  const FilterSolution s = solve_filter(p, f, g, filter_options(c));
  json out{{"meta", meta(c, "filter")},
           {"delta", s.delta},
           {"delta_spectral", s.delta_spectral},
           {"var_a_xi", s.var_a_xi},
           {"horizon_N", c.solver.horizon ? json(*c.solver.horizon) : json()},
           {"diagnostics", detail::diagnostics_json(s.diagnostics)},
           {"grids", detail::grids_json(p)}};
  if (const auto dir = detail::out_dir(c)) {
    detail::write_text(*dir / "filter.json", out.dump(2) + "\n");
    detail::write_text(*dir / "c.csv", detail::csv_real(p.target().points, s.c, "t,value"));
    detail::write_text(*dir / "h.csv", detail::csv_complex(p.frequencies(), s.h));
    detail::write_text(*dir / "v.csv", detail::csv_real(p.observation().points, s.v, "t,value"));
    if (artifacts.dump_operators) {
      const Vector fv = eval_density(f, p.frequencies());
      const Vector gv = eval_density(g, p.frequencies());
      detail::write_text(*dir / "B.csv", detail::csv_matrix(assemble_B(p, fv, gv)));
      detail::write_text(*dir / "R.csv", detail::csv_matrix(assemble_R(p, fv, gv, c.solver.kernel)));
      detail::write_text(*dir / "Q.csv", detail::csv_matrix(assemble_Q(p, fv, gv)));
    }
  }
  return out;
}

inline json run_mse(const Config& c) {
  const FilterProblem p = build_problem(c);
  const FilterSolution s = solve_filter(p, build_density(c.f), build_density(c.g), filter_options(c));
  return json{{"meta", meta(c, "mse")},
              {"delta", s.delta},
              {"delta_spectral", s.delta_spectral},
              {"var_a_xi", s.var_a_xi}};
}

inline json run_oracle(const Config& c) {
  const FilterProblem p = build_problem(c);
  const OracleSolution o = oracle_solve(p, build_density(c.f), build_density(c.g),
                                        {c.solver.cond_max, 1e-10});
  json out{{"meta", meta(c, "oracle")},
           {"mse", o.mse},
           {"var_a_xi", o.var_a_xi},
           {"n_obs", o.points.size()},
           {"cond", o.condition},
           {"regularized", o.regularized}};
  if (const auto dir = detail::out_dir(c)) {
    detail::write_text(*dir / "oracle.json", out.dump(2) + "\n");
    detail::write_text(*dir / "oracle_weights.csv", detail::csv_real(o.points, o.weights, "t,value"));
  }
  return out;
}

inline json run_simulate(const Config& c) {
  const FilterProblem p = build_problem(c);
  const SpectralDensity f = build_density(c.f);
  const SpectralDensity g = build_density(c.g);
  Vector weights;
  double reference = 0.0;
  if (c.estimator == "filter") {
    const FilterSolution s = solve_filter(p, f, g, filter_options(c));
    weights = s.v;
    reference = s.delta;
  } else {
    const OracleSolution o = oracle_solve(p, f, g, {c.solver.cond_max, 1e-10});
    weights = o.weights;
    reference = o.mse;
  }
  const SimulationReport r = empirical_mse(weights, p, f, g, c.trials, c.seed, reference);
  json out{{"meta", meta(c, "simulate")},
           {"estimator", c.estimator},
           {"trials", r.trials},
           {"empirical_mse", r.mse},
           {"standard_error", r.standard_error},
           {"reference", r.reference},
           {"z_score", r.z_score},
           {"seed", r.seed}};
  if (const auto dir = detail::out_dir(c)) detail::write_text(*dir / "simulate.json", out.dump(2) + "\n");
  return out;
}

inline json saddle_json(const SaddlePoint& s) {
  return json{{"converged", s.converged},
              {"iterations", s.iterations},
              {"delta", s.delta()},
              {"delta_nominal", s.delta_nominal},
              {"alpha1", s.alpha1},
              {"alpha2", s.alpha2},
              {"residuals",
               {{"fixed_point", s.fixed_point_residual},
                {"budget_f", s.budget_residual_f},
                {"budget_g", s.budget_residual_g},
                {"slackness_f", s.slackness_f},
                {"slackness_g", s.slackness_g}}},
              {"sensitivity_form", "|A g + C| for f, |A f - C| for g"}};
}

inline json saddle_report_json(const SaddleReport& r) {
  return json{{"samples", r.samples},
              {"perturbations", r.perturbations},
              {"delta", r.delta},
              {"left_violation", r.left_violation},
              {"right_violation", r.right_violation},
              {"tolerance", r.tolerance},
              {"left_pass", r.left_pass},
              {"right_pass", r.right_pass}};
}

/// Thrown after the artifacts of an unconverged solve are written.
struct Unconverged {
  json document;
};

inline json run_lfd(const Config& c) {
  if (!c.class_f || !c.class_g) {
    throw Error(ErrorKind::ConfigParse, "lfd needs class_f and class_g");
  }
  const FilterProblem p = build_problem(c);
  const DensityClass cf = build_class(*c.class_f, p.frequencies());
  const DensityClass cg = build_class(*c.class_g, p.frequencies());
  const SaddlePoint s = lfd_solve(p, cf, cg, lfd_options(c));
  SaddleOptions so;
  so.samples = c.saddle_samples;
  so.perturbations = c.saddle_perturbations;
  so.seed = c.seed;
  so.rel_tol = c.tol.saddle;
  const SaddleReport r = saddle_verify(p, s, cf, cg, so);
  json out{{"meta", meta(c, "lfd")},
           {"class_f", *c.class_f},
           {"class_g", *c.class_g},
           {"saddle", saddle_json(s)},
           {"saddle_report", saddle_report_json(r)},
           {"diagnostics", detail::diagnostics_json(s.solution.diagnostics)}};
  if (const auto dir = detail::out_dir(c)) {
    detail::write_text(*dir / "lfd.json", out.dump(2) + "\n");
    std::string csv = "lambda,f0,g0\n";
    for (Eigen::Index m = 0; m < s.f0.size(); ++m) {
      csv += detail::fmt(p.frequencies()[m]) + "," + detail::fmt(s.f0[m]) + "," + detail::fmt(s.g0[m]) + "\n";
    }
    detail::write_text(*dir / "lfd_densities.csv", csv);
    detail::write_text(*dir / "h0.csv", detail::csv_complex(p.frequencies(), s.solution.h));
  }
  if (!s.converged) throw Unconverged{out};
  return out;
}

inline json check(const std::string& name, double value, double threshold, bool pass) {
  return json{{"name", name}, {"value", value}, {"threshold", threshold}, {"pass", pass}};
}

/// Cross-check suite; "pass" is false if any check fails.
inline json run_verify(const Config& c) {
  const FilterProblem p = build_problem(c);
  const SpectralDensity f = build_density(c.f);
  const SpectralDensity g = build_density(c.g);
  const auto& t = c.tol.filter;
  const FilterSolution s = solve_filter(p, f, g, filter_options(c));
  const OracleSolution o = oracle_solve(p, f, g, {c.solver.cond_max, 1e-10});
  const SimulationReport mc = empirical_mse(o.weights, p, f, g, c.trials, c.seed, o.mse);

  json checks = json::array();
  const double dual = s.diagnostics.dual_gap;
  checks.push_back(check("dual_form", dual, t.dual * (1.0 + s.delta), dual <= t.dual * (1.0 + s.delta)));
  checks.push_back(check("orthogonality", s.diagnostics.orthogonality, t.orth, s.diagnostics.orthogonality <= t.orth));
  checks.push_back(check("leakage", s.diagnostics.leakage, t.leak, s.diagnostics.leakage <= t.leak));
  const double rel = o.mse > 0.0 ? std::abs(s.delta - o.mse) / o.mse : std::abs(s.delta - o.mse);
  checks.push_back(check("oracle_agreement", rel, t.oracle, rel <= t.oracle));
  checks.push_back(check("mse_nonnegative", s.delta, -t.mse, s.delta >= -t.mse));
  checks.push_back(check("monte_carlo_z", std::abs(mc.z_score), c.tol.z_max, std::abs(mc.z_score) <= c.tol.z_max));

  if (c.class_f && c.class_g) {
    const DensityClass cf = build_class(*c.class_f, p.frequencies());
    const DensityClass cg = build_class(*c.class_g, p.frequencies());
    const SaddlePoint sp = lfd_solve(p, cf, cg, lfd_options(c));
    SaddleOptions so;
    so.samples = c.saddle_samples;
    so.perturbations = c.saddle_perturbations;
    so.seed = c.seed;
    so.rel_tol = c.tol.saddle;
    const SaddleReport r = saddle_verify(p, sp, cf, cg, so);
    checks.push_back(check("lfd_converged", sp.fixed_point_residual, c.solver.tol_fp, sp.converged));
    const double budget = std::max(sp.budget_residual_f, sp.budget_residual_g);
    checks.push_back(check("lfd_budget", budget, c.solver.tol_budget, budget <= c.solver.tol_budget));
    checks.push_back(check("saddle_left", r.left_violation, r.tolerance, r.left_pass));
    checks.push_back(check("saddle_right", r.right_violation, r.tolerance, r.right_pass));
    checks.push_back(check("center_dominated", sp.delta_nominal - sp.delta(), t.mse,
                           sp.delta() >= sp.delta_nominal - t.mse));
  }
  bool pass = true;
  for (const auto& ch : checks) pass = pass && ch.at("pass").get<bool>();
  json out{{"meta", meta(c, "verify")},
           {"pass", pass},
           {"delta", s.delta},
           {"delta_spectral", s.delta_spectral},
           {"oracle_mse", o.mse},
           {"empirical_mse", mc.mse},
           {"standard_error", mc.standard_error},
           {"checks", checks}};
  if (const auto dir = detail::out_dir(c)) detail::write_text(*dir / "verify.json", out.dump(2) + "\n");
  return out;
}

/// Combines earlier JSON outputs into one document keyed by command.
inline json run_report(const Config& c, const std::vector<std::string>& inputs) {
  std::vector<std::string> files = inputs;
  if (files.empty()) {
    if (const auto dir = detail::out_dir(c); dir && std::filesystem::is_directory(*dir)) {
      for (const auto& e : std::filesystem::directory_iterator(*dir)) {
        if (e.path().extension() == ".json" && e.path().filename() != "report.json") files.push_back(e.path().string());
      }
    }
  }
  std::sort(files.begin(), files.end());
  json results = json::object();
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigParse, "cannot read " + path);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ConfigParse, path + ": " + e.what());
    }
    std::string key = std::filesystem::path(path).stem().string();
    if (doc.contains("meta") && doc["meta"].contains("command")) key = doc["meta"]["command"].get<std::string>();
    results[key] = doc;
  }
  json out{{"meta", meta(c, "report")}, {"config", emit_config(c)}, {"results", results}};
  if (const auto dir = detail::out_dir(c)) detail::write_text(*dir / "report.json", out.dump(2) + "\n");
  return out;
}

}  // namespace rfl::cli
