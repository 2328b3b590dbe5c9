#pragma once

// Command-line front end. Settings are layered: subcommand preset, then the
// --config file, then QUADLOCO_* environment overrides, then flags.
// Exit codes: 0 success, 1 solver or runtime failure, 2 configuration error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "quadloco/config.hpp"
#include "quadloco/csv_io.hpp"
#include "quadloco/jump_sim.hpp"
#include "quadloco/scenarios.hpp"

namespace quadloco::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<double> duration;
  std::string input;  // estimate: recorded log to replay
};

namespace detail {

inline config::Json load_document(const Flags& f, const std::vector<std::string>& env) {
  config::Json doc = f.config.empty() ? config::Json::object() : config::load_file(f.config);
  if (!doc.is_object()) throw Error(ErrorCode::Config, "config root must be an object");
  config::apply_env_overrides(doc, env);
  return doc;
}

inline std::filesystem::path output_dir(const Flags& f, const config::OutputConfig& o) {
  std::filesystem::path dir = f.out_dir.empty() ? o.dir : f.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Config, "cannot create output directory '" + dir.string() + "'");
  return dir;
}

inline std::string prefix(const std::string& command, const config::OutputConfig& o) {
  return o.prefix.empty() ? command : o.prefix;
}

inline int run_locomotion_command(const std::string& command, const Flags& f, const std::vector<std::string>& env,
                                  std::ostream& out) {
  config::LocomotionConfig c = config::parse_locomotion(load_document(f, env), command);
  if (f.seed) c.options.seed = *f.seed;
  if (f.duration) {
    if (!(*f.duration > 0.0)) throw Error(ErrorCode::Config, "--duration must be positive");
    c.options.duration = *f.duration;
  }
  const auto dir = output_dir(f, c.output);
  const std::string name = prefix(command, c.output);
  ScenarioResult r;
  if (command == "estimate") {
    if (f.input.empty()) throw Error(ErrorCode::Config, "estimate needs --input <log.csv>");
    std::vector<LogRow> log = io::read_log(f.input);
    if (f.duration) {
      const double t_end = log.front().t + *f.duration;
      std::erase_if(log, [&](const LogRow& row) { return row.t > t_end + 1e-12; });
    }
    r = replay_estimation(log, c.options);
  } else {
    r = run_locomotion(c.options);
  }
  io::write_log((dir / (name + ".csv")).string(), r.log);
  config::Json s = io::summary_json(command, r.metrics);
  s["seed"] = c.options.seed;
  s["duration_s"] = r.log.back().t - r.log.front().t;
  s["log"] = name + ".csv";
  io::write_json((dir / (name + "_summary.json")).string(), s);
  out << s.dump() << "\n";
  return kExitOk;
}

inline int run_jump_command(const std::string& command, const Flags& f, const std::vector<std::string>& env,
                            std::ostream& out) {
  config::JumpConfig c = config::parse_jump(load_document(f, env));
  if (f.seed) c.sim.seed = *f.seed;
  const auto dir = output_dir(f, c.output);
  const std::string name = prefix(command, c.output);
  const trajopt::Problem pb = trajopt::build_problem(c.sim.spec);
  const trajopt::TimingSolution sol = trajopt::solve_timing(pb, c.sim.solve);
  const auto ref = trajopt::export_reference(pb, sol, c.export_dt);
  io::write_csv((dir / (name + "_reference.csv")).string(), io::reference_table(ref));

  config::Json s = io::summary_json(command, {});
  s["spec"] = c.sim.spec.name;
  s["timing"] = io::timing_json(sol);
  s["reference"] = name + "_reference.csv";
  if (command == "jump-sim") {
    const ScenarioResult r = run_jump_tracking(c.sim, pb, sol);
    io::write_log((dir / (name + ".csv")).string(), r.log);
    s["metrics"] = io::metrics_json(r.metrics);
    s["seed"] = c.sim.seed;
    s["log"] = name + ".csv";
  } else {
    s.erase("metrics");
  }
  io::write_json((dir / (name + "_summary.json")).string(), s);
  out << s.dump() << "\n";
  return kExitOk;
}

}  // namespace detail

/// Runs the CLI on argv-style arguments (args[0] is the program name).
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr,
               const std::vector<std::string>& env = config::process_environment()) {
  CLI::App app{"Quadruped locomotion scenarios and jump optimization"};
  app.require_subcommand(1);
  Flags f;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"stand", "balance in place with the estimator in the loop"},
      {"trot", "1 m/s trot under the balance QP"},
      {"slope", "uphill trot with posture adjustment"},
      {"mpc-trot", "1 m/s trot under the convex MPC"},
      {"estimate", "replay a recorded log through the state estimator"},
      {"jump-opt", "optimize contact timings for a jump spec"},
      {"jump-sim", "optimize a jump and track it in simulation"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out-dir", f.out_dir, "output directory");
    if (name != "jump-opt") sub->add_option("--seed", f.seed, "noise seed");
    if (name != "jump-opt" && name != "jump-sim") sub->add_option("--duration", f.duration, "simulated time [s]");
    if (name == "estimate") sub->add_option("--input", f.input, "scenario log CSV to replay")->required();
  }

  std::string command;
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rev);
    command = app.get_subcommands().front()->get_name();
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << io::error_json(command, "Config", e.what()).dump() << "\n";
    return kExitConfig;
  }

  try {
    if (command == "jump-opt" || command == "jump-sim") return detail::run_jump_command(command, f, env, out);
    return detail::run_locomotion_command(command, f, env, out);
  } catch (const Error& e) {
    err << io::error_json(command, to_string(e.code()), e.what()).dump() << "\n";
    const bool config_error = e.code() == ErrorCode::Config || e.code() == ErrorCode::SpecError;
    return config_error ? kExitConfig : kExitFailure;
  } catch (const std::exception& e) {
    err << io::error_json(command, "Internal", e.what()).dump() << "\n";
    return kExitFailure;
  }
}

}  // namespace quadloco::cli
