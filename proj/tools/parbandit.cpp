// Command-line front end: run experiments, validate configurations, or print
// the a-priori bounds a configuration implies.
//
// Exit codes: 0 success, 2 configuration problem (unreadable file, parse
// error, unknown key, invalid value), 3 runtime failure (dataset I/O, output
// I/O, numerical failure).

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "parbandit/config.hpp"
#include "parbandit/runner.hpp"

namespace {

int do_run(parbandit::ExperimentConfig cfg) {
  try {
    const parbandit::RunSummary summary = parbandit::run_experiment(cfg);
    for (const auto& dir : summary.cell_dirs) std::cout << "wrote " << dir << "\n";
    std::cout << "runs: " << summary.runs << "\n";
    std::cout << "manifest: " << summary.manifest_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

int do_bounds(const parbandit::ExperimentConfig& cfg) {
  try {
    std::cout << parbandit::bounds_report(cfg);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel contextual linear bandit simulator"};
  app.require_subcommand(1);

  std::string run_config, validate_config, bounds_config;
  std::uint64_t seed_override = 0;
  std::string out_dir_override;
  int workers_override = 0;

  CLI::App* run = app.add_subcommand("run", "Execute the experiment described by a configuration");
  run->add_option("config", run_config, "JSON configuration file")->required();
  CLI::Option* seed_opt = run->add_option("--seed", seed_override, "Override base_seed");
  CLI::Option* out_opt = run->add_option("--out-dir", out_dir_override, "Override output_dir");
  CLI::Option* workers_opt = run->add_option("--workers", workers_override, "Override worker count");

  CLI::App* validate =
      app.add_subcommand("validate", "Parse and validate a configuration, writing nothing");
  validate->add_option("config", validate_config, "JSON configuration file")->required();

  CLI::App* bounds =
      app.add_subcommand("bounds", "Print doubling-round budgets and burn-in estimates");
  bounds->add_option("config", bounds_config, "JSON configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string& path =
      run->parsed() ? run_config : (validate->parsed() ? validate_config : bounds_config);
  parbandit::ExperimentConfig cfg;
  try {
    cfg = parbandit::load_config(path);
  } catch (const parbandit::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  }

  if (validate->parsed()) {
    std::cout << "ok: " << path << "\n";
    return 0;
  }
  if (bounds->parsed()) return do_bounds(cfg);

  if (seed_opt->count() > 0) cfg.base_seed = seed_override;
  if (out_opt->count() > 0) cfg.output_dir = out_dir_override;
  if (workers_opt->count() > 0) {
    if (workers_override < 1) {
      std::cerr << "configuration error: --workers must be >= 1\n";
      return 2;
    }
    cfg.workers = workers_override;
  }
  return do_run(std::move(cfg));
}
