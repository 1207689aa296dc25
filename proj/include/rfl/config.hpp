#pragma once

/** @file
 * JSON configuration: parsing with defaults, normalized emission, and the
 * builders that turn config fragments into library objects.
 *
 * emit() always writes every field, so emit(parse(x)) is the normal form
 * and parse(emit(c)) reproduces c.
 */

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rfl/filtering.hpp"
#include "rfl/minimax.hpp"
#include "rfl/problem.hpp"
#include "rfl/spectra.hpp"

namespace rfl {

using json = nlohmann::ordered_json;

namespace detail {

[[noreturn]] inline void config_error(const std::string& what) { throw Error(ErrorKind::ConfigParse, what); }

inline const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) config_error(where + ": missing \"" + key + "\"");
  return j.at(key);
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) config_error(where + ": expected a number");
  return j.get<double>();
}

inline std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) config_error(where + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : j) out.push_back(number(x, where));
  return out;
}

inline void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) config_error(where + ": expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) config_error(where + ": unknown key \"" + k + "\"");
  }
}

template <class T>
T value_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  if constexpr (std::is_same_v<T, std::string>) {
    if (!j.at(key).is_string()) config_error(where + "." + key + ": expected a string");
    return j.at(key).get<std::string>();
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!j.at(key).is_boolean()) config_error(where + "." + key + ": expected a boolean");
    return j.at(key).get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!j.at(key).is_number_integer() && !j.at(key).is_number_unsigned()) {
      config_error(where + "." + key + ": expected an integer");
    }
    return j.at(key).get<T>();
  } else {
    return static_cast<T>(number(j.at(key), where + "." + key));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fragments.  Each normalize_* validates a fragment and returns its normal form.

inline json normalize_density(const json& j, const std::string& where = "density") {
  const std::string type = detail::value_or<std::string>(j, "type", "", where);
  if (type == "rational") {
    detail::allow_keys(j, {"type", "num", "den"}, where);
    return json{{"type", type},
                {"num", detail::numbers(detail::require(j, "num", where), where + ".num")},
                {"den", detail::numbers(detail::require(j, "den", where), where + ".den")}};
  }
  if (type == "tabulated") {
    detail::allow_keys(j, {"type", "lambda", "values"}, where);
    return json{{"type", type},
                {"lambda", detail::numbers(detail::require(j, "lambda", where), where + ".lambda")},
                {"values", detail::numbers(detail::require(j, "values", where), where + ".values")}};
  }
  if (type == "scaled") {
    detail::allow_keys(j, {"type", "base", "factor"}, where);
    return json{{"type", type},
                {"base", normalize_density(detail::require(j, "base", where), where + ".base")},
                {"factor", detail::number(detail::require(j, "factor", where), where + ".factor")}};
  }
  if (type == "sum") {
    detail::allow_keys(j, {"type", "terms"}, where);
    json terms = json::array();
    for (const auto& t : detail::require(j, "terms", where)) terms.push_back(normalize_density(t, where + ".terms"));
    return json{{"type", type}, {"terms", terms}};
  }
  detail::config_error(where + ": unknown density type \"" + type + "\"");
}

inline SpectralDensity build_density(const json& j) {
  const json n = normalize_density(j);
  const std::string type = n.at("type");
  if (type == "rational") return SpectralDensity::rational(n.at("num"), n.at("den"));
  if (type == "tabulated") return SpectralDensity::tabulated(n.at("lambda"), n.at("values"));
  if (type == "scaled") return SpectralDensity::scaled(build_density(n.at("base")), n.at("factor"));
  std::vector<SpectralDensity> terms;
  for (const auto& t : n.at("terms")) terms.push_back(build_density(t));
  return SpectralDensity::sum(std::move(terms));
}

inline json normalize_pattern(const json& j, const std::string& where = "pattern") {
  if (j.is_null()) return json{{"gaps", json::array()}};
  detail::allow_keys(j, {"gaps", "segments"}, where);
  if (j.contains("gaps") == j.contains("segments")) {
    detail::config_error(where + ": give exactly one of \"gaps\" or \"segments\"");
  }
  if (j.contains("gaps")) {
    json gaps = json::array();
    for (const auto& g : j.at("gaps")) {
      const auto pair = detail::numbers(g, where + ".gaps");
      if (pair.size() != 2) detail::config_error(where + ".gaps: each gap is [lo, hi]");
      gaps.push_back(pair);
    }
    return json{{"gaps", gaps}};
  }
  json segments = json::array();
  for (const auto& s : j.at("segments")) {
    detail::allow_keys(s, {"K", "N"}, where + ".segments");
    segments.push_back(json{{"K", detail::number(detail::require(s, "K", where), where + ".K")},
                            {"N", detail::number(detail::require(s, "N", where), where + ".N")}});
  }
  return json{{"segments", segments}};
}

inline MissingPattern build_pattern(const json& j) {
  const json n = normalize_pattern(j);
  if (n.contains("gaps")) {
    std::vector<Interval> gaps;
    for (const auto& g : n.at("gaps")) gaps.push_back({g.at(0).get<double>(), g.at(1).get<double>()});
    return MissingPattern::from_gaps(std::move(gaps));
  }
  std::vector<Segment> segments;
  for (const auto& s : n.at("segments")) segments.push_back({s.at("K").get<double>(), s.at("N").get<double>()});
  return MissingPattern::from_segments(segments);
}

inline json normalize_weight(const json& j, const std::string& where = "weight") {
  const std::string type = detail::value_or<std::string>(j, "type", "", where);
  if (type == "exp_window") {
    detail::allow_keys(j, {"type", "rate", "t_max"}, where);
    return json{{"type", type},
                {"rate", detail::value_or(j, "rate", 1.0, where)},
                {"t_max", detail::number(detail::require(j, "t_max", where), where + ".t_max")}};
  }
  if (type == "tabulated") {
    detail::allow_keys(j, {"type", "t", "values"}, where);
    return json{{"type", type},
                {"t", detail::numbers(detail::require(j, "t", where), where + ".t")},
                {"values", detail::numbers(detail::require(j, "values", where), where + ".values")}};
  }
  if (type == "zero") {
    detail::allow_keys(j, {"type"}, where);
    return json{{"type", type}};
  }
  detail::config_error(where + ": unknown weight type \"" + type + "\"");
}

inline WeightFunction build_weight(const json& j) {
  const json n = normalize_weight(j);
  const std::string type = n.at("type");
  if (type == "exp_window") return WeightFunction::exp_window(n.at("rate"), n.at("t_max"));
  if (type == "tabulated") return WeightFunction::tabulated(n.at("t"), n.at("values"));
  return WeightFunction::zero();
}

/// `power` is absolute; `power_factor` multiplies the grid power of the center.
inline json normalize_class(const json& j, const std::string& where = "class") {
  const std::string type = detail::value_or<std::string>(j, "type", "", where);
  static const std::set<std::string> kinds{"l1_ball", "l2_ball", "contamination", "known"};
  if (!kinds.count(type)) detail::config_error(where + ": unknown class type \"" + type + "\"");
  detail::allow_keys(j, {"type", "center", "eps", "power", "power_factor"}, where);
  json out{{"type", type}, {"center", normalize_density(detail::require(j, "center", where), where + ".center")}};
  if (type != "known") out["eps"] = detail::number(detail::require(j, "eps", where), where + ".eps");
  if (type == "contamination") {
    if (j.contains("power") == j.contains("power_factor")) {
      detail::config_error(where + ": contamination needs exactly one of \"power\" or \"power_factor\"");
    }
    if (j.contains("power")) out["power"] = detail::number(j.at("power"), where + ".power");
    else out["power_factor"] = detail::number(j.at("power_factor"), where + ".power_factor");
  }
  return out;
}

inline DensityClass build_class(const json& j, const FrequencyGrid& grid) {
  const json n = normalize_class(j);
  const std::string type = n.at("type");
  SpectralDensity center = build_density(n.at("center"));
  if (type == "known") return DensityClass::known(std::move(center));
  const double eps = n.at("eps");
  if (type == "l1_ball") return DensityClass::l1_ball(std::move(center), eps);
  if (type == "l2_ball") return DensityClass::l2_ball(std::move(center), eps);
  const double p = n.contains("power") ? n.at("power").get<double>()
                                       : n.at("power_factor").get<double>() * power(eval_density(center, grid), grid);
  return DensityClass::contamination(std::move(center), eps, p);
}

// ---------------------------------------------------------------------------

struct SolverConfig {
  RGapKernel kernel = RGapKernel::mirrored;
  std::optional<double> horizon;
  std::size_t max_iter = 200;
  double tol_fp = 1e-6;
  double damping = 0.5;
  double tol_budget = 1e-4;
  double cond_max = 1e12;
  double tol_solve = 1e-8;
};

struct VerifyTolerances {
  Tolerances filter;
  double z_max = 3.0;
  double saddle = 1e-6;
};

struct Config {
  json f;
  json g;
  json pattern;
  json weight;
  Discretization disc;
  bool auto_obs_horizon = false;
  std::optional<json> class_f;
  std::optional<json> class_g;
  SolverConfig solver;
  VerifyTolerances tol;
  std::size_t trials = 10000;
  std::string estimator = "oracle";
  std::size_t saddle_samples = 100;
  std::size_t saddle_perturbations = 20;
  std::uint64_t seed = 1;
  std::optional<std::string> output_dir;
};

inline Config parse_config(const json& j) {
  detail::allow_keys(j, {"f", "g", "pattern", "weight", "discretization", "class_f", "class_g", "solver",
                         "tolerances", "simulation", "saddle", "seed", "output"},
                     "config");
  Config c;
  c.f = normalize_density(detail::require(j, "f", "config"), "f");
  c.g = normalize_density(detail::require(j, "g", "config"), "g");
  c.pattern = normalize_pattern(j.value("pattern", json()), "pattern");
  c.weight = normalize_weight(detail::require(j, "weight", "config"), "weight");

  if (j.contains("discretization")) {
    const json& d = j.at("discretization");
    detail::allow_keys(d, {"cutoff", "n_freq", "dt", "horizon", "obs_horizon"}, "discretization");
    c.disc.cutoff = detail::value_or(d, "cutoff", c.disc.cutoff, "discretization");
    c.disc.n_freq = detail::value_or(d, "n_freq", c.disc.n_freq, "discretization");
    c.disc.dt = detail::value_or(d, "dt", c.disc.dt, "discretization");
    c.disc.horizon = detail::value_or(d, "horizon", c.disc.horizon, "discretization");
    if (d.contains("obs_horizon") && d.at("obs_horizon").is_null()) {
      c.auto_obs_horizon = true;
    } else {
      c.disc.obs_horizon = detail::value_or(d, "obs_horizon", c.disc.obs_horizon, "discretization");
    }
  }
  if (j.contains("class_f") && !j.at("class_f").is_null()) c.class_f = normalize_class(j.at("class_f"), "class_f");
  if (j.contains("class_g") && !j.at("class_g").is_null()) c.class_g = normalize_class(j.at("class_g"), "class_g");

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    detail::allow_keys(s, {"r_gap_kernel", "horizon", "max_iter", "tol_fp", "damping", "tol_budget", "cond_max",
                           "tol_solve"},
                       "solver");
    const std::string kernel = detail::value_or<std::string>(s, "r_gap_kernel", "mirrored", "solver");
    if (kernel != "mirrored" && kernel != "as_printed") {
      detail::config_error("solver.r_gap_kernel: expected \"mirrored\" or \"as_printed\"");
    }
    c.solver.kernel = parse_kernel(kernel);
    if (s.contains("horizon") && !s.at("horizon").is_null()) {
      c.solver.horizon = detail::number(s.at("horizon"), "solver.horizon");
    }
    c.solver.max_iter = detail::value_or(s, "max_iter", c.solver.max_iter, "solver");
    c.solver.tol_fp = detail::value_or(s, "tol_fp", c.solver.tol_fp, "solver");
    c.solver.damping = detail::value_or(s, "damping", c.solver.damping, "solver");
    c.solver.tol_budget = detail::value_or(s, "tol_budget", c.solver.tol_budget, "solver");
    c.solver.cond_max = detail::value_or(s, "cond_max", c.solver.cond_max, "solver");
    c.solver.tol_solve = detail::value_or(s, "tol_solve", c.solver.tol_solve, "solver");
  }
  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    detail::allow_keys(t, {"orth", "leak", "mse", "dual", "oracle", "refine", "z_max", "saddle"}, "tolerances");
    auto& f = c.tol.filter;
    f.orth = detail::value_or(t, "orth", f.orth, "tolerances");
    f.leak = detail::value_or(t, "leak", f.leak, "tolerances");
    f.mse = detail::value_or(t, "mse", f.mse, "tolerances");
    f.dual = detail::value_or(t, "dual", f.dual, "tolerances");
    f.oracle = detail::value_or(t, "oracle", f.oracle, "tolerances");
    f.refine = detail::value_or(t, "refine", f.refine, "tolerances");
    c.tol.z_max = detail::value_or(t, "z_max", c.tol.z_max, "tolerances");
    c.tol.saddle = detail::value_or(t, "saddle", c.tol.saddle, "tolerances");
  }
  if (j.contains("simulation")) {
    const json& s = j.at("simulation");
    detail::allow_keys(s, {"trials", "estimator"}, "simulation");
    c.trials = detail::value_or(s, "trials", c.trials, "simulation");
    c.estimator = detail::value_or<std::string>(s, "estimator", c.estimator, "simulation");
    if (c.estimator != "oracle" && c.estimator != "filter") {
      detail::config_error("simulation.estimator: expected \"oracle\" or \"filter\"");
    }
  }
  if (j.contains("saddle")) {
    const json& s = j.at("saddle");
    detail::allow_keys(s, {"samples", "perturbations"}, "saddle");
    c.saddle_samples = detail::value_or(s, "samples", c.saddle_samples, "saddle");
    c.saddle_perturbations = detail::value_or(s, "perturbations", c.saddle_perturbations, "saddle");
  }
  c.seed = detail::value_or<std::uint64_t>(j, "seed", c.seed, "config");
  if (j.contains("output") && !j.at("output").is_null()) {
    detail::allow_keys(j.at("output"), {"dir"}, "output");
    const json& dir = j.at("output").value("dir", json());
    if (!dir.is_null()) c.output_dir = detail::value_or<std::string>(j.at("output"), "dir", "", "output");
  }
  return c;
}

inline json emit_config(const Config& c) {
  json out;
  out["f"] = c.f;
  out["g"] = c.g;
  out["pattern"] = c.pattern;
  out["weight"] = c.weight;
  out["discretization"] = json{{"cutoff", c.disc.cutoff},
                               {"n_freq", c.disc.n_freq},
                               {"dt", c.disc.dt},
                               {"horizon", c.disc.horizon},
                               {"obs_horizon", c.auto_obs_horizon ? json() : json(c.disc.obs_horizon)}};
  out["class_f"] = c.class_f ? *c.class_f : json();
  out["class_g"] = c.class_g ? *c.class_g : json();
  out["solver"] = json{{"r_gap_kernel", to_string(c.solver.kernel)},
                       {"horizon", c.solver.horizon ? json(*c.solver.horizon) : json()},
                       {"max_iter", c.solver.max_iter},
                       {"tol_fp", c.solver.tol_fp},
                       {"damping", c.solver.damping},
                       {"tol_budget", c.solver.tol_budget},
                       {"cond_max", c.solver.cond_max},
                       {"tol_solve", c.solver.tol_solve}};
  const auto& t = c.tol.filter;
  out["tolerances"] = json{{"orth", t.orth},     {"leak", t.leak},     {"mse", t.mse},
                           {"dual", t.dual},     {"oracle", t.oracle}, {"refine", t.refine},
                           {"z_max", c.tol.z_max}, {"saddle", c.tol.saddle}};
  out["simulation"] = json{{"trials", c.trials}, {"estimator", c.estimator}};
  out["saddle"] = json{{"samples", c.saddle_samples}, {"perturbations", c.saddle_perturbations}};
  out["seed"] = c.seed;
  out["output"] = json{{"dir", c.output_dir ? json(*c.output_dir) : json()}};
  return out;
}

inline Config parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    detail::config_error(std::string("malformed JSON: ") + e.what());
  }
  try {
    return parse_config(j);
  } catch (const json::exception& e) {
    detail::config_error(std::string("bad value: ") + e.what());
  }
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) detail::config_error("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

/// FNV-1a 64 of the normalized config, as 16 hex digits.
inline std::string config_hash(const Config& c) {
  const std::string text = emit_config(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return out;
}

inline FilterProblem build_problem(const Config& c) {
  const MissingPattern pattern = build_pattern(c.pattern);
  Discretization disc = c.disc;
  if (c.auto_obs_horizon) {
    const FrequencyGrid grid(disc.cutoff, disc.n_freq);
    disc.obs_horizon =
        default_observation_horizon(pattern, build_density(c.f), build_density(c.g), grid, disc.dt);
  }
  return FilterProblem(pattern, build_weight(c.weight), disc);
}

inline FilterOptions filter_options(const Config& c) {
  FilterOptions o;
  o.kernel = c.solver.kernel;
  o.horizon = c.solver.horizon;
  o.solve.cond_max = c.solver.cond_max;
  o.solve.tol_solve = c.solver.tol_solve;
  return o;
}

inline LfdOptions lfd_options(const Config& c) {
  LfdOptions o;
  o.max_iter = c.solver.max_iter;
  o.tol_fp = c.solver.tol_fp;
  o.damping = c.solver.damping;
  o.tol_budget = c.solver.tol_budget;
  o.filter = filter_options(c);
  return o;
}

}  // namespace rfl
