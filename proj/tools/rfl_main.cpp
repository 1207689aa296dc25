// Command-line front end: rfl <command> --config FILE [overrides].

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "rfl/cli.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::string> kernel;
  std::optional<double> cutoff;
  std::optional<std::size_t> n_freq;
  std::optional<double> dt;
  std::optional<double> horizon;
  std::optional<double> obs_horizon;
  std::optional<double> horizon_n;
  std::optional<std::string> class_f;
  std::optional<std::string> class_g;
  bool dump_operators = false;
  std::vector<std::string> inputs;
};

/// Inline JSON if it starts with '{', otherwise a file path.
rfl::json read_fragment(const std::string& text) {
  std::string body = text;
  if (text.find('{') != 0) {
    std::ifstream in(text);
    if (!in) throw rfl::Error(rfl::ErrorKind::ConfigParse, "cannot open " + text);
    std::stringstream ss;
    ss << in.rdbuf();
    body = ss.str();
  }
  try {
    return rfl::json::parse(body);
  } catch (const rfl::json::exception& e) {
    throw rfl::Error(rfl::ErrorKind::ConfigParse, std::string("malformed class JSON: ") + e.what());
  }
}

rfl::Config load(const Overrides& o) {
  rfl::Config c = rfl::load_config(o.config_path);
  if (o.out) c.output_dir = *o.out;
  if (o.seed) c.seed = *o.seed;
  if (o.trials) c.trials = *o.trials;
  if (o.kernel) {
    if (*o.kernel != "mirrored" && *o.kernel != "as_printed") {
      throw rfl::Error(rfl::ErrorKind::ConfigParse, "--kernel must be mirrored or as_printed");
    }
    c.solver.kernel = rfl::parse_kernel(*o.kernel);
  }
  if (o.cutoff) c.disc.cutoff = *o.cutoff;
  if (o.n_freq) c.disc.n_freq = *o.n_freq;
  if (o.dt) c.disc.dt = *o.dt;
  if (o.horizon) c.disc.horizon = *o.horizon;
  if (o.obs_horizon) {
    c.disc.obs_horizon = *o.obs_horizon;
    c.auto_obs_horizon = false;
  }
  if (o.horizon_n) c.solver.horizon = *o.horizon_n;
  if (o.class_f) c.class_f = rfl::normalize_class(read_fragment(*o.class_f), "class_f");
  if (o.class_g) c.class_g = rfl::normalize_class(read_fragment(*o.class_g), "class_g");
  return c;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "Config JSON file")->required();
  cmd->add_option("-o,--out", o.out, "Output directory for JSON/CSV artifacts");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--kernel", o.kernel, "r_gap_kernel: mirrored | as_printed");
  cmd->add_option("--cutoff", o.cutoff, "Frequency cutoff");
  cmd->add_option("--n-freq", o.n_freq, "Frequency grid points (even)");
  cmd->add_option("--dt", o.dt, "Time step");
  cmd->add_option("--horizon", o.horizon, "Target horizon T_h");
  cmd->add_option("--obs-horizon", o.obs_horizon, "Observation horizon T_obs");
  cmd->add_option("--weight-horizon", o.horizon_n, "Truncate the weight at N");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal and minimax-robust linear filtering with missing observations"};
  app.require_subcommand(1);
  Overrides o;

  auto* filter = app.add_subcommand("filter", "Solve the filter; writes solution JSON and CSVs");
  add_common(filter, o);
  filter->add_flag("--dump-operators", o.dump_operators, "Also write B, R, Q as CSV");
  auto* mse = app.add_subcommand("mse", "Mean-square error in both forms");
  add_common(mse, o);
  auto* lfd = app.add_subcommand("lfd", "Least favorable densities and saddle checks");
  add_common(lfd, o);
  lfd->add_option("--class-f", o.class_f, "Class of f: inline JSON or file");
  lfd->add_option("--class-g", o.class_g, "Class of g: inline JSON or file");
  auto* oracle = app.add_subcommand("oracle", "Covariance-projection oracle");
  add_common(oracle, o);
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo mean-square error");
  add_common(simulate, o);
  simulate->add_option("--trials", o.trials, "Number of trials");
  auto* verify = app.add_subcommand("verify", "Run the cross-check suite");
  add_common(verify, o);
  verify->add_option("--trials", o.trials, "Monte Carlo trials");
  verify->add_option("--class-f", o.class_f, "Class of f: inline JSON or file");
  verify->add_option("--class-g", o.class_g, "Class of g: inline JSON or file");
  auto* report = app.add_subcommand("report", "Aggregate earlier outputs into one JSON");
  add_common(report, o);
  report->add_option("inputs", o.inputs, "JSON files (default: *.json in --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const rfl::Config c = load(o);
    rfl::json out;
    int status = 0;
    if (*filter) {
      out = rfl::cli::run_filter(c, {o.dump_operators});
    } else if (*mse) {
      out = rfl::cli::run_mse(c);
    } else if (*lfd) {
      try {
        out = rfl::cli::run_lfd(c);
      } catch (const rfl::cli::Unconverged& u) {
        std::cout << u.document.dump(2) << "\n";
        std::cerr << "error: NoConvergence: fixed point not reached\n";
        return rfl::cli::exit_code(rfl::ErrorKind::NoConvergence);
      }
    } else if (*oracle) {
      out = rfl::cli::run_oracle(c);
    } else if (*simulate) {
      out = rfl::cli::run_simulate(c);
    } else if (*verify) {
      out = rfl::cli::run_verify(c);
      status = out.at("pass").get<bool>() ? 0 : 1;
    } else if (*report) {
      out = rfl::cli::run_report(c, o.inputs);
    }
    std::cout << out.dump(2) << "\n";
    return status;
  } catch (const rfl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rfl::cli::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
