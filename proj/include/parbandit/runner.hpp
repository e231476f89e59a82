#pragma once

// Experiment driver.  A run is a grid of scale cells; each cell executes
// every (algorithm, parallelism, trial) combination, then writes records.csv
// and aggregate.csv into its own directory.  The manifest is written last,
// after every CSV, so its presence certifies a complete run.
//
// Determinism contract: each run's randomness comes only from
// seed_stream(base_seed, label, P, trial), and output rows are emitted in
// configuration order, so the CSV bytes do not depend on the worker count.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "parbandit/config.hpp"
#include "parbandit/environments.hpp"
#include "parbandit/metrics.hpp"
#include "parbandit/simulation.hpp"

namespace parbandit {

inline constexpr const char* kVersion = "1.0.0";

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

template <typename Int>
std::string format_int(Int v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_int: conversion failed");
  return std::string(buf, ptr);
}

inline std::string hex_key(std::uint64_t key) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), key, 16);
  (void)ec;
  return "0x" + std::string(buf, ptr);
}

}  // namespace detail

/// Instantiates the environment a single run observes.  The key drives every
/// stochastic ingredient: parameters, arm draws, and (via the same key in
/// run_trial) policy and reward streams.
inline Environment build_environment(const EnvironmentConfig& env, std::uint64_t env_key) {
  FeatureScheme scheme = env.scheme;
  if (scheme.kind == FeatureKind::RandomRelu)
    scheme.relu_key = seed_stream(env_key, "relu_features");
  if (env.oracle == "linear")
    return Environment::synthetic_linear(env.dimension, env.arms, env.mode, env.noise_std,
                                         env.normalize, env_key);
  if (env.oracle == "neural")
    return Environment::fixed_network(scheme, env.arms, env.noise_std, env_key);
  TabularOracle oracle =
      load_tabular_csv(env.dataset, env.value_column, env.noise_std, env.columns, false);
  if (env.standardize) oracle.standardize_features();
  return Environment::tabular(std::move(oracle), scheme);
}

struct ScaleCell {
  double lambda;
  double noise_scale;
  double param_bound;
  std::string dir_name;  // empty for the single implicit cell
};

inline std::vector<ScaleCell> grid_cells(const ExperimentConfig& cfg) {
  if (cfg.grid.empty())
    return {{cfg.scales.ridge_lambda, cfg.scales.noise_scale, cfg.scales.param_bound, ""}};
  const auto pick = [](const std::vector<double>& axis, double fallback) {
    return axis.empty() ? std::vector<double>{fallback} : axis;
  };
  std::vector<ScaleCell> cells;
  for (double lam : pick(cfg.grid.lambda, cfg.scales.ridge_lambda))
    for (double r : pick(cfg.grid.noise_scale, cfg.scales.noise_scale))
      for (double s : pick(cfg.grid.param_bound, cfg.scales.param_bound))
        cells.push_back({lam, r, s,
                         "lambda=" + detail::format_double(lam) + "_R=" + detail::format_double(r) +
                             "_S=" + detail::format_double(s)});
  return cells;
}

struct RunSummary {
  std::vector<std::string> cell_dirs;
  std::string manifest_path;
  std::int64_t runs = 0;
};

namespace detail {

struct RunTask {
  std::size_t cell;
  std::size_t algorithm;
  int processors;
  int trial;
  std::uint64_t key;
};

inline void write_records_csv(const std::filesystem::path& path, const ExperimentConfig& cfg,
                              const std::vector<RunTask>& tasks,
                              const std::vector<std::optional<RegretLedger>>& ledgers,
                              std::size_t cell_index) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  std::string buf;
  buf.reserve(1 << 20);
  buf += "trial,algorithm,P,t,p,arm_index,reward,inst_regret,cum_parallel_regret,is_doubling,"
         "alpha_min\n";
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].cell != cell_index) continue;
    const auto& label = cfg.algorithms[tasks[i].algorithm].label;
    const std::string prefix =
        format_int(tasks[i].trial) + "," + label + "," + format_int(tasks[i].processors) + ",";
    double cum = 0.0;
    for (const auto& r : ledgers[i]->records()) {
      cum += r.inst_regret;
      buf += prefix;
      buf += format_int(r.t);
      buf += ',';
      buf += format_int(r.p);
      buf += ',';
      buf += format_int(r.arm_index);
      buf += ',';
      buf += format_double(r.reward);
      buf += ',';
      buf += format_double(r.inst_regret);
      buf += ',';
      buf += format_double(cum);
      buf += ',';
      buf += r.is_doubling ? '1' : '0';
      buf += ',';
      buf += format_double(r.alpha_min);
      buf += '\n';
      if (buf.size() > (1 << 20)) {
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        buf.clear();
      }
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

inline void write_aggregate_csv(const std::filesystem::path& path, const ExperimentConfig& cfg,
                                const std::vector<RunTask>& tasks,
                                const std::vector<std::optional<RegretLedger>>& ledgers,
                                std::size_t cell_index) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  std::string buf;
  buf.reserve(1 << 20);
  buf += "algorithm,P,total_queries_index,mean_cum_regret,std_cum_regret,mean_best_value,"
         "mean_alpha_min\n";
  for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
    for (int P : cfg.parallelism) {
      std::vector<RegretLedger> trials;
      for (std::size_t i = 0; i < tasks.size(); ++i)
        if (tasks[i].cell == cell_index && tasks[i].algorithm == a && tasks[i].processors == P)
          trials.push_back(*ledgers[i]);
      const AggregateCurves curves = aggregate_trials(trials, cfg.ma_window);
      const std::string prefix = cfg.algorithms[a].label + "," + format_int(P) + ",";
      for (Eigen::Index k = 0; k < curves.mean_cum_regret.size(); ++k) {
        buf += prefix;
        buf += format_int(static_cast<std::int64_t>(k) + 1);
        buf += ',';
        buf += format_double(curves.mean_cum_regret[k]);
        buf += ',';
        buf += format_double(curves.std_cum_regret[k]);
        buf += ',';
        buf += format_double(curves.mean_best_value[k]);
        buf += ',';
        buf += format_double(curves.mean_alpha_min[k]);
        buf += '\n';
        if (buf.size() > (1 << 20)) {
          out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
          buf.clear();
        }
      }
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace detail

inline RunSummary run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const auto t_start = std::chrono::steady_clock::now();
  const std::vector<ScaleCell> cells = grid_cells(cfg);

  // Flatten every run into one task list; workers pull tasks by index so the
  // schedule cannot influence what any single run computes.
  std::vector<detail::RunTask> tasks;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (std::size_t a = 0; a < cfg.algorithms.size(); ++a)
      for (int P : cfg.parallelism)
        for (int trial = 0; trial < cfg.trials; ++trial)
          tasks.push_back({c, a, P, trial,
                           seed_stream(cfg.base_seed, std::string_view(cfg.algorithms[a].label),
                                       static_cast<std::uint64_t>(P),
                                       static_cast<std::uint64_t>(trial))});

  std::vector<std::optional<RegretLedger>> ledgers(tasks.size());
  std::vector<double> wall_ms(tasks.size(), 0.0);
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || failed.load()) break;
      const detail::RunTask& task = tasks[i];
      try {
        const auto t0 = std::chrono::steady_clock::now();
        const Environment env = build_environment(cfg.environment, task.key);
        PolicyConfig pc;
        pc.kind = cfg.algorithms[task.algorithm].kind;
        pc.scales = cfg.scales;
        pc.scales.ridge_lambda = cells[task.cell].lambda;
        pc.scales.noise_scale = cells[task.cell].noise_scale;
        pc.scales.param_bound = cells[task.cell].param_bound;
        pc.scales.delta = cfg.delta_for(task.processors);
        pc.routine = cfg.routine;
        pc.cci_constant = cfg.cci_constant;
        pc.explore_rate = cfg.algorithms[task.algorithm].explore_rate;
        ledgers[i] = run_trial(env, pc, task.processors, cfg.rounds_for(task.processors), task.key);
        wall_ms[i] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                         .count();
      } catch (...) {
        errors[i] = std::current_exception();
        failed.store(true);
        break;
      }
    }
  };

  const int n_workers =
      std::max(1, std::min<int>(cfg.workers, static_cast<int>(tasks.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);  // abort before any file is written

  RunSummary summary;
  summary.runs = static_cast<std::int64_t>(tasks.size());
  const fs::path root(cfg.output_dir);
  nlohmann::json manifest_cells = nlohmann::json::array();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const fs::path dir = cells[c].dir_name.empty() ? root : root / cells[c].dir_name;
    fs::create_directories(dir);
    detail::write_records_csv(dir / "records.csv", cfg, tasks, ledgers, c);
    detail::write_aggregate_csv(dir / "aggregate.csv", cfg, tasks, ledgers, c);
    summary.cell_dirs.push_back(dir.string());

    nlohmann::json runs = nlohmann::json::array();
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].cell != c) continue;
      runs.push_back({{"algorithm", cfg.algorithms[tasks[i].algorithm].label},
                      {"P", tasks[i].processors},
                      {"trial", tasks[i].trial},
                      {"seed_key", detail::hex_key(tasks[i].key)},
                      {"wall_ms", wall_ms[i]}});
    }
    manifest_cells.push_back({{"dir", dir.string()},
                              {"scales",
                               {{"lambda", cells[c].lambda},
                                {"noise_scale", cells[c].noise_scale},
                                {"param_bound", cells[c].param_bound}}},
                              {"runs", runs}});
  }

  // The manifest is the completion marker: it must be the last byte written.
  nlohmann::json manifest{
      {"version", kVersion},
      {"config", resolved_config_json(cfg)},
      {"cells", manifest_cells},
      {"total_wall_ms",
       std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
           .count()}};
  const fs::path manifest_path = root / "manifest.json";
  fs::create_directories(root);
  std::ofstream mf(manifest_path, std::ios::binary);
  if (!mf) throw std::runtime_error(manifest_path.string() + ": cannot open for writing");
  const std::string text = manifest.dump(2) + "\n";
  mf.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!mf) throw std::runtime_error(manifest_path.string() + ": write failed");
  summary.manifest_path = manifest_path.string();
  return summary;
}

/// Text report of the a-priori guarantees implied by a configuration:
/// doubling-round budgets per parallelism level and, when the constants are
/// supplied, the rich-context burn-in time.
inline std::string bounds_report(const ExperimentConfig& cfg) {
  const Environment env =
      build_environment(cfg.environment, seed_stream(cfg.base_seed, "bounds-probe"));
  const Eigen::Index d = env.dim();
  std::string out;
  out += "feature dimension: " + detail::format_int(d) + "\n";
  out += "arms: " + detail::format_int(env.arm_count()) +
         (env.fixed_global() ? " (fixed set)" : " (fresh draw per step)") + "\n";
  out += "total queries: " + detail::format_int(cfg.total_queries) + "\n";
  if (env.fixed_global())
    out += "max arm norm: " + detail::format_double(env.max_arm_norm()) + "\n";

  BoundInputs in;
  in.dim = d;
  in.total_queries = cfg.total_queries;
  in.action_bound = cfg.scales.action_bound;
  in.ridge_lambda = cfg.scales.ridge_lambda;
  in.chi_square = cfg.burn_in.chi_square;
  in.pi_min_sq = cfg.burn_in.pi_min_sq;
  in.pi_max_sq = cfg.burn_in.pi_max_sq;
  if (env.fixed_global()) in.arm_count = env.arm_count();

  in.processors = 1;
  out += "doubling rounds, arbitrary contexts: <= " +
         detail::format_int(bound_doubling_arbitrary(in)) + "\n";
  for (int P : cfg.parallelism) {
    in.processors = P;
    out += "P=" + detail::format_int(P) + ": T=" + detail::format_int(cfg.rounds_for(P)) +
           ", delta=" + detail::format_double(cfg.delta_for(P)) + "\n";
    if (env.fixed_global())
      out += "  doubling rounds, fixed arm set: <= " +
             detail::format_int(bound_doubling_finite(env.arm_count(), P)) + "\n";
    if (cfg.scales.ridge_lambda >=
        static_cast<double>(P) * cfg.scales.action_bound * cfg.scales.action_bound)
      out += "  lambda >= P * L^2: no doubling rounds\n";
    if (const auto burn = rich_context_burn_in(in))
      out += "  rich-context burn-in: t0 ~ " + detail::format_double(*burn) + "\n";
  }
  return out;
}

}  // namespace parbandit
