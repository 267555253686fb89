#pragma once

// `nhms` command line: run | sweep | optimize | validate | presets.
// Exit codes: 0 success, 1 validation or runtime failure, 2 usage or config error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nhms/config.hpp"
#include "nhms/error.hpp"
#include "nhms/experiments.hpp"
#include "nhms/io.hpp"
#include "nhms/validation.hpp"
#include "nhms/version.hpp"

namespace nhms::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kOutputEnv = "NHMS_OUTPUT_DIR";

inline std::string default_output_dir() {
  const char* env = std::getenv(kOutputEnv);
  return env && *env ? env : "nhms-out";
}

/// Parses "a:b:step" or a comma-separated list.
inline std::vector<double> parse_range(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::stringstream ss(text);
    std::string part;
    std::vector<double> v;
    while (std::getline(ss, part, ':')) v.push_back(std::stod(part));
    if (v.size() != 3 || !(v[2] > 0.0) || v[1] < v[0]) throw InvalidArgument("range must be start:stop:step");
    const auto n = static_cast<long>(std::floor((v[1] - v[0]) / v[2] + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(v[0] + i * v[2]);
    return out;
  }
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) out.push_back(std::stod(part));
  }
  if (out.empty()) throw InvalidArgument("empty value list");
  return out;
}

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

inline int cmd_run(const std::string& preset_name, const std::string& config_path, const std::string& out_dir,
                   int stride, bool no_decay, Streams io) {
  config::RunConfig cfg;
  if (!config_path.empty()) {
    cfg = config::parse_config(config_path);
  } else {
    nlohmann::json j = {{"scenario", preset_name}};
    cfg = config::from_json(j);
  }
  if (stride > 0) cfg.scenario.output_stride = stride;
  if (no_decay) cfg.scenario.decay = false;
  cfg.scenario.validate();
  const std::filesystem::path base =
      !out_dir.empty() ? out_dir : (!cfg.output_directory.empty() ? cfg.output_directory : default_output_dir());
  const auto result = experiments::run_scenario(cfg.scenario);
  const auto written = io::write_run(base / cfg.scenario.name, result, cfg);
  io.out << cfg.scenario.name << " (" << experiments::to_string(cfg.scenario.model) << ", "
         << result.series.size() << " samples) -> " << written.directory.string() << '\n';
  for (const auto& e : result.echoes) {
    io.out << "  window " << e.index << ": peak " << io::fmt(e.peak_amplitude) << " at "
           << io::fmt(e.peak_time) << " ns, efficiency " << io::fmt(e.efficiency);
    if (result.series.vector_valued()) io.out << ", sigma fraction " << io::fmt(e.sigma_fraction());
    io.out << '\n';
  }
  return kExitOk;
}

inline int cmd_sweep(const std::string& xi_text, const std::string& t_text, unsigned jobs, bool no_decay,
                     int n_z, double dt, const std::string& out_dir, Streams io) {
  experiments::MapOptions o;
  o.decay = !no_decay;
  o.jobs = jobs;
  o.n_z = n_z;
  o.dt = dt;
  const auto xi = parse_range(xi_text);
  const auto ts = parse_range(t_text);
  for (double x : xi) {
    if (!(x >= 0.0)) throw ConfigError(std::vector<FieldIssue>{{"xi", "values must be >= 0"}});
  }
  for (double t : ts) {
    if (!(t > 0.0)) throw ConfigError(std::vector<FieldIssue>{{"storage-times", "values must be positive"}});
  }
  const auto map = experiments::scenario_efficiency_map(xi, ts, o);
  const std::filesystem::path base = out_dir.empty() ? default_output_dir() : out_dir;
  io::write_efficiency_map(base / "sweep" / "efficiency_map.csv", map);
  for (std::size_t j = 0; j < ts.size(); ++j) {
    const auto k = map.argmax_xi(j);
    io.out << "T = " << io::fmt(ts[j]) << " ns: best xi " << io::fmt(xi[k]) << ", efficiency "
           << io::fmt(map.at(k, j)) << '\n';
  }
  io.out << "map -> " << (base / "sweep" / "efficiency_map.csv").string() << '\n';
  return kExitOk;
}

inline int cmd_optimize(double lo, double hi, double tol, double storage_time, bool decay,
                        const std::string& out_dir, Streams io) {
  experiments::OptimizeOptions o;
  o.tolerance = tol;
  o.storage_time = storage_time;
  o.decay = decay;
  const auto r = experiments::optimize_thickness(lo, hi, o);
  const std::filesystem::path base = out_dir.empty() ? default_output_dir() : out_dir;
  nlohmann::json j = {{"xi", r.xi},       {"efficiency", r.eta},     {"evaluations", r.evaluations},
                      {"lower", lo},      {"upper", hi},             {"tolerance", tol},
                      {"storage_time_ns", storage_time}, {"decay", decay}};
  {
    auto f = io::open_for_write(base / "optimize" / "result.json");
    f << j.dump(2) << '\n';
  }
  io.out << "optimal xi " << io::fmt(r.xi) << ", efficiency " << io::fmt(r.eta) << " (" << r.evaluations
         << " evaluations)\n";
  return kExitOk;
}

inline int cmd_validate(bool quick, Streams io) {
  const auto checks = validation::run(quick);
  bool ok = true;
  for (const auto& c : checks) {
    io.out << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << io::fmt(c.value) << " (limit "
           << io::fmt(c.limit) << ")";
    if (!c.detail.empty()) io.out << " [" << c.detail << "]";
    io.out << '\n';
    ok = ok && c.pass;
  }
  return ok ? kExitOk : kExitFailure;
}

inline int cmd_presets(Streams io) {
  for (const auto& name : experiments::preset_names()) {
    const auto s = experiments::preset(name);
    io.out << name << "  [" << experiments::to_string(s.model) << "]  " << s.description << '\n';
  }
  return kExitOk;
}

inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  CLI::App app{"Pulsed hyperfine-splitting x-ray memory simulator", "nhms"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string preset_name, config_path, out_dir;
  int stride = 0;
  bool no_decay = false;
  auto* run = app.add_subcommand("run", "Simulate one scenario and write its output files");
  auto* p_opt = run->add_option("--preset", preset_name, "Built-in scenario name");
  auto* c_opt = run->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  p_opt->excludes(c_opt);
  run->add_option("--output", out_dir, "Output directory (default $NHMS_OUTPUT_DIR or nhms-out)");
  run->add_option("--stride", stride, "Write every n-th time step")->check(CLI::PositiveNumber);
  run->add_flag("--no-decay", no_decay, "Switch off Gamma damping of the coherences");

  std::string xi_text = "2:40:2", t_text = "25";
  unsigned jobs = 0;
  int n_z = 200;
  double dt = 0.01;
  bool sweep_no_decay = false;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "Efficiency map over thickness and storage time");
  sweep->add_option("--xi", xi_text, "Thickness values: start:stop:step or a,b,c");
  sweep->add_option("--storage-times", t_text, "Storage times in ns: start:stop:step or a,b,c");
  sweep->add_option("--jobs", jobs, "Worker threads (0 = all cores)");
  sweep->add_option("--n-z", n_z, "Slab count")->check(CLI::Range(2, 100000));
  sweep->add_option("--dt", dt, "Time step in ns")->check(CLI::PositiveNumber);
  sweep->add_flag("--no-decay", sweep_no_decay, "Switch off Gamma damping");
  sweep->add_option("--output", sweep_out, "Output directory");

  double lo = 4.0, hi = 40.0, tol = 0.1, storage = 25.0;
  bool opt_decay = false;
  std::string opt_out;
  auto* optimize = app.add_subcommand("optimize", "Golden-section search for the best thickness");
  optimize->add_option("--lower", lo, "Lower thickness bound");
  optimize->add_option("--upper", hi, "Upper thickness bound");
  optimize->add_option("--tolerance", tol, "Bracket width at which to stop")->check(CLI::PositiveNumber);
  optimize->add_option("--storage-time", storage, "Write-read separation in ns")->check(CLI::PositiveNumber);
  optimize->add_flag("--decay", opt_decay, "Keep Gamma damping on (default off)");
  optimize->add_option("--output", opt_out, "Output directory");

  bool quick = false;
  auto* validate = app.add_subcommand("validate", "Run the oracle comparison suite");
  validate->add_flag("--quick", quick, "Use a coarse grid");

  auto* presets = app.add_subcommand("presets", "List built-in scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // --help / --version
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  const Streams io{out, err};
  try {
    if (*run) {
      if (preset_name.empty() && config_path.empty()) {
        err << "error: run needs --preset or --config\n\n" << run->help();
        return kExitUsage;
      }
      if (!preset_name.empty() && !experiments::has_preset(preset_name)) {
        err << "error: unknown preset '" << preset_name << "'; see `nhms presets`\n";
        return kExitUsage;
      }
      return cmd_run(preset_name, config_path, out_dir, stride, no_decay, io);
    }
    if (*sweep) return cmd_sweep(xi_text, t_text, jobs, sweep_no_decay, n_z, dt, sweep_out, io);
    if (*optimize) return cmd_optimize(lo, hi, tol, storage, opt_decay, opt_out, io);
    if (*validate) return cmd_validate(quick, io);
    if (*presets) return cmd_presets(io);
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

inline int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  std::vector<const char*> argv;
  argv.push_back("nhms");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_command(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace nhms::cli
