#pragma once

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "hfr/commands.hpp"
#include "hfr/run_config.hpp"
#include "hfr/version.hpp"

namespace hfr {

// Exit codes: 0 success, 2 configuration errors, 3 data errors, 4 runtime
// failures.
inline constexpr int exit_ok = 0;
inline constexpr int exit_config_error = 2;
inline constexpr int exit_data_error = 3;
inline constexpr int exit_runtime_error = 4;

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"hierarchical forecast reconciliation"};
  app.require_subcommand(0, 1);

  bool show_version = false;
  app.add_flag("--version", show_version, "print version and config schema hash");

  std::string config_path;
  std::vector<std::string> method_flags;
  long seed_flag = -1;
  int workers_flag = 0;
  std::string out_flag;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run configuration file")->required();
    cmd->add_option("--seed", seed_flag, "override run.seed");
    cmd->add_option("--workers", workers_flag, "override run.workers");
    cmd->add_option("--out", out_flag, "override run.out");
    cmd->add_option("--method", method_flags, "override run.methods (repeatable)");
  };

  CLI::App* forecast = app.add_subcommand("forecast", "write base forecasts");
  CLI::App* reconcile = app.add_subcommand("reconcile", "reconcile base forecasts per method");
  CLI::App* evaluate = app.add_subcommand("evaluate", "rolling-origin evaluation report");
  add_common(forecast);
  add_common(reconcile);
  add_common(evaluate);

  std::vector<const char*> argv;
  argv.push_back("hfr");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return exit_config_error;
  }

  if (show_version) {
    out << "hfr " << version_string << " (config schema " << config_schema_hash() << ")\n";
    return exit_ok;
  }
  if (app.get_subcommands().empty()) {
    err << "expected a subcommand: forecast | reconcile | evaluate\n";
    return exit_config_error;
  }

  try {
    RunConfig cfg = load_run_config(config_path);
    if (seed_flag >= 0) cfg.seed = static_cast<std::uint64_t>(seed_flag);
    if (workers_flag > 0) cfg.workers = workers_flag;
    if (!out_flag.empty()) cfg.out_dir = out_flag;
    if (!method_flags.empty()) cfg.methods = method_flags;
    if (cfg.workers < 1) throw ConfigError(errc::bad_config, "run.workers must be >= 1");

    if (forecast->parsed()) {
      cmd_forecast(cfg);
    } else if (reconcile->parsed()) {
      const auto failed = cmd_reconcile(cfg, err);
      if (!failed.empty()) return exit_runtime_error;
    } else {
      cmd_evaluate(cfg);
    }
    return exit_ok;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_config_error;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return exit_data_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_runtime_error;
  }
}

}  // namespace hfr
