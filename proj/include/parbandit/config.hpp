#pragma once

// Experiment configuration: strict JSON parsing (unknown keys are errors,
// every diagnostic names the offending key path) plus the defaulting rules.
// Scale defaults are lambda = noise_scale = param_bound = 1 with zero
// misspecification; delta defaults to the 1/T rule resolved per parallelism
// level.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "parbandit/confidence.hpp"
#include "parbandit/environments.hpp"
#include "parbandit/features.hpp"
#include "parbandit/policies.hpp"

namespace parbandit {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AlgorithmSpec {
  PolicyKind kind = PolicyKind::LinUcb;
  double explore_rate = 0.05;  // EpsilonGreedy only
  std::string label;           // unique name used in output files
};

struct EnvironmentConfig {
  std::string oracle = "linear";  // linear | neural | tabular
  ContextMode mode = ContextMode::FixedGlobal;
  Eigen::Index dimension = 20;  // linear input dimension
  Eigen::Index arms = 1000;     // linear arm count / neural subset (0 = all)
  double noise_std = 1.0;
  bool normalize = true;
  FeatureScheme scheme;
  std::string dataset;
  std::string value_column = "target";
  ColumnSelection columns = ColumnSelection::all();
  bool standardize = false;
};

struct GridSpec {
  std::vector<double> lambda;
  std::vector<double> noise_scale;
  std::vector<double> param_bound;

  bool empty() const { return lambda.empty() && noise_scale.empty() && param_bound.empty(); }
};

struct BurnInConstants {
  std::optional<double> chi_square;
  std::optional<double> pi_min_sq;
  std::optional<double> pi_max_sq;
};

struct ExperimentConfig {
  EnvironmentConfig environment;
  std::int64_t total_queries = 1000;
  std::vector<int> parallelism = {1};
  std::vector<AlgorithmSpec> algorithms;
  int trials = 1;
  std::uint64_t base_seed = 0;
  std::string output_dir = "out";
  ProblemScales scales;               // delta here is a placeholder when delta_rule is unset
  std::optional<double> fixed_delta;  // nullopt -> delta = 1 / T per level
  double cci_constant = 2.0;
  DoublingRoutine routine = DoublingRoutine::Identity;
  GridSpec grid;
  BurnInConstants burn_in;
  int ma_window = 30;
  int workers = 1;

  std::int64_t rounds_for(int processors) const { return total_queries / processors; }
  double delta_for(int processors) const {
    return fixed_delta ? *fixed_delta : 1.0 / static_cast<double>(rounds_for(processors));
  }
};

namespace detail {

using json = nlohmann::json;

inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw ConfigError("unknown key '" + (path.empty() ? key : path + "." + key) + "'");
  }
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError("'" + path + "' must be a number");
  return v.get<double>();
}

inline std::int64_t as_integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError("'" + path + "' must be an integer");
  return v.get<std::int64_t>();
}

inline std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError("'" + path + "' must be a string");
  return v.get<std::string>();
}

inline bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError("'" + path + "' must be a boolean");
  return v.get<bool>();
}

inline PolicyKind parse_kind(const std::string& name, const std::string& path) {
  if (name == "LinUCB") return PolicyKind::LinUcb;
  if (name == "LazyLinUCB") return PolicyKind::LazyLinUcb;
  if (name == "LinTS") return PolicyKind::LinTs;
  if (name == "LazyLinTS") return PolicyKind::LazyLinTs;
  if (name == "EpsilonGreedy") return PolicyKind::EpsilonGreedy;
  throw ConfigError("'" + path + "': unknown algorithm '" + name + "'");
}

inline const char* kind_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::LinUcb: return "LinUCB";
    case PolicyKind::LazyLinUcb: return "LazyLinUCB";
    case PolicyKind::LinTs: return "LinTS";
    case PolicyKind::LazyLinTs: return "LazyLinTS";
    case PolicyKind::EpsilonGreedy: return "EpsilonGreedy";
  }
  return "?";
}

inline FeatureKind parse_feature_kind(const std::string& name, const std::string& path) {
  if (name == "identity") return FeatureKind::Identity;
  if (name == "quadratic") return FeatureKind::Quadratic;
  if (name == "one_hot") return FeatureKind::OneHot;
  if (name == "one_hot_quadratic") return FeatureKind::OneHotQuadratic;
  if (name == "random_relu") return FeatureKind::RandomRelu;
  throw ConfigError("'" + path + "': unknown feature map '" + name + "'");
}

inline EnvironmentConfig parse_environment(const json& obj) {
  if (!obj.is_object()) throw ConfigError("'environment' must be an object");
  check_keys(obj, "environment",
             {"oracle", "context", "dimension", "arms", "noise_std", "normalize", "features",
              "alphabet_size", "relu_features", "dataset", "value_column", "feature_columns",
              "standardize"});
  EnvironmentConfig env;
  if (obj.contains("oracle")) env.oracle = as_string(obj["oracle"], "environment.oracle");
  if (env.oracle != "linear" && env.oracle != "neural" && env.oracle != "tabular")
    throw ConfigError("'environment.oracle' must be linear, neural, or tabular");
  if (obj.contains("context")) {
    const std::string mode = as_string(obj["context"], "environment.context");
    if (mode == "fixed")
      env.mode = ContextMode::FixedGlobal;
    else if (mode == "changing")
      env.mode = ContextMode::ChangingPerStep;
    else
      throw ConfigError("'environment.context' must be fixed or changing");
    if (env.oracle != "linear" && env.mode == ContextMode::ChangingPerStep)
      throw ConfigError("'environment.context': changing contexts need the linear oracle");
  }
  if (obj.contains("dimension"))
    env.dimension = as_integer(obj["dimension"], "environment.dimension");
  if (env.dimension <= 0) throw ConfigError("'environment.dimension' must be positive");
  if (obj.contains("arms")) env.arms = as_integer(obj["arms"], "environment.arms");
  if (env.arms < 0 || (env.oracle == "linear" && env.arms == 0))
    throw ConfigError("'environment.arms' must be positive");
  if (obj.contains("noise_std")) env.noise_std = as_number(obj["noise_std"], "environment.noise_std");
  if (env.noise_std < 0) throw ConfigError("'environment.noise_std' must be >= 0");
  if (obj.contains("normalize")) env.normalize = as_bool(obj["normalize"], "environment.normalize");
  if (obj.contains("features"))
    env.scheme.kind = parse_feature_kind(as_string(obj["features"], "environment.features"),
                                         "environment.features");
  if (obj.contains("alphabet_size"))
    env.scheme.alphabet_size =
        static_cast<int>(as_integer(obj["alphabet_size"], "environment.alphabet_size"));
  if (env.scheme.alphabet_size <= 0) throw ConfigError("'environment.alphabet_size' must be positive");
  if (obj.contains("relu_features"))
    env.scheme.relu_features =
        static_cast<int>(as_integer(obj["relu_features"], "environment.relu_features"));
  if (env.scheme.relu_features <= 0) throw ConfigError("'environment.relu_features' must be positive");
  if (obj.contains("dataset")) env.dataset = as_string(obj["dataset"], "environment.dataset");
  if (env.oracle == "tabular" && env.dataset.empty())
    throw ConfigError("'environment.dataset' is required for the tabular oracle");
  if (obj.contains("value_column"))
    env.value_column = as_string(obj["value_column"], "environment.value_column");
  if (obj.contains("feature_columns")) {
    const json& fc = obj["feature_columns"];
    if (fc.is_array()) {
      std::vector<std::string> names;
      for (const auto& v : fc) names.push_back(as_string(v, "environment.feature_columns[]"));
      env.columns = ColumnSelection::by_names(std::move(names));
    } else if (fc.is_string()) {
      const std::string range = fc.get<std::string>();
      const auto colon = range.find(':');
      if (colon == std::string::npos)
        throw ConfigError("'environment.feature_columns' string must look like \"first:last\"");
      try {
        env.columns = ColumnSelection::by_range(std::stoi(range.substr(0, colon)),
                                                std::stoi(range.substr(colon + 1)));
      } catch (const std::exception&) {
        throw ConfigError("'environment.feature_columns' range bounds must be integers");
      }
    } else {
      throw ConfigError("'environment.feature_columns' must be a name array or \"first:last\"");
    }
  }
  if (obj.contains("standardize"))
    env.standardize = as_bool(obj["standardize"], "environment.standardize");
  if (env.oracle == "linear" && env.scheme.kind != FeatureKind::Identity)
    throw ConfigError("'environment.features': the linear oracle serves raw arms directly");
  return env;
}

inline ProblemScales parse_scales(const json& obj) {
  check_keys(obj, "scales",
             {"lambda", "noise_scale", "param_bound", "action_bound", "misspecification"});
  ProblemScales s;
  if (obj.contains("lambda")) s.ridge_lambda = as_number(obj["lambda"], "scales.lambda");
  if (obj.contains("noise_scale")) s.noise_scale = as_number(obj["noise_scale"], "scales.noise_scale");
  if (obj.contains("param_bound")) s.param_bound = as_number(obj["param_bound"], "scales.param_bound");
  if (obj.contains("action_bound"))
    s.action_bound = as_number(obj["action_bound"], "scales.action_bound");
  if (obj.contains("misspecification"))
    s.misspecification = as_number(obj["misspecification"], "scales.misspecification");
  return s;
}

inline std::vector<double> parse_number_list(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError("'" + path + "' must be a nonempty array");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(as_number(x, path + "[]"));
  return out;
}

}  // namespace detail

inline std::string algorithm_name(PolicyKind kind) { return detail::kind_name(kind); }

inline ExperimentConfig parse_config(const nlohmann::json& root) {
  using detail::as_bool;
  using detail::as_integer;
  using detail::as_number;
  using detail::as_string;

  if (!root.is_object()) throw ConfigError("configuration root must be an object");
  detail::check_keys(root, "",
                     {"environment", "total_queries", "parallelism", "algorithms", "trials",
                      "base_seed", "output_dir", "scales", "delta", "cci_constant",
                      "doubling_routine", "grid", "burn_in", "ma_window", "workers"});

  ExperimentConfig cfg;
  if (root.contains("environment")) cfg.environment = detail::parse_environment(root["environment"]);
  if (root.contains("total_queries"))
    cfg.total_queries = as_integer(root["total_queries"], "total_queries");
  if (cfg.total_queries <= 0) throw ConfigError("'total_queries' must be positive");

  if (root.contains("parallelism")) {
    const auto& arr = root["parallelism"];
    if (!arr.is_array() || arr.empty()) throw ConfigError("'parallelism' must be a nonempty array");
    cfg.parallelism.clear();
    for (const auto& v : arr) {
      const std::int64_t p = as_integer(v, "parallelism[]");
      if (p < 1) throw ConfigError("'parallelism[]' entries must be >= 1");
      cfg.parallelism.push_back(static_cast<int>(p));
    }
  }
  for (int p : cfg.parallelism)
    if (cfg.total_queries % p != 0)
      throw ConfigError("'total_queries' (" + std::to_string(cfg.total_queries) +
                        ") must be divisible by every parallelism level (got " + std::to_string(p) +
                        ")");

  if (root.contains("algorithms")) {
    const auto& arr = root["algorithms"];
    if (!arr.is_array() || arr.empty()) throw ConfigError("'algorithms' must be a nonempty array");
    for (const auto& v : arr) {
      AlgorithmSpec spec;
      if (v.is_string()) {
        spec.kind = detail::parse_kind(v.get<std::string>(), "algorithms[]");
      } else if (v.is_object()) {
        detail::check_keys(v, "algorithms[]", {"name", "explore_rate", "label"});
        if (!v.contains("name")) throw ConfigError("'algorithms[]' object needs a 'name'");
        spec.kind = detail::parse_kind(as_string(v["name"], "algorithms[].name"), "algorithms[]");
        if (v.contains("explore_rate"))
          spec.explore_rate = as_number(v["explore_rate"], "algorithms[].explore_rate");
        if (v.contains("label")) spec.label = as_string(v["label"], "algorithms[].label");
      } else {
        throw ConfigError("'algorithms[]' entries must be names or objects");
      }
      if (spec.label.empty()) {
        spec.label = detail::kind_name(spec.kind);
        if (spec.kind == PolicyKind::EpsilonGreedy) {
          char buf[32];
          const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), spec.explore_rate);
          (void)ec;
          spec.label += std::string("_") + std::string(buf, ptr);
        }
      }
      cfg.algorithms.push_back(std::move(spec));
    }
    for (std::size_t i = 0; i < cfg.algorithms.size(); ++i)
      for (std::size_t j = i + 1; j < cfg.algorithms.size(); ++j)
        if (cfg.algorithms[i].label == cfg.algorithms[j].label)
          throw ConfigError("duplicate algorithm label '" + cfg.algorithms[i].label + "'");
    for (const auto& a : cfg.algorithms)
      if (a.kind == PolicyKind::EpsilonGreedy && cfg.environment.mode == ContextMode::ChangingPerStep)
        throw ConfigError("'algorithms[]': EpsilonGreedy needs a fixed arm set, not changing contexts");
  } else {
    cfg.algorithms.push_back({PolicyKind::LinUcb, 0.05, "LinUCB"});
  }

  if (root.contains("trials")) cfg.trials = static_cast<int>(as_integer(root["trials"], "trials"));
  if (cfg.trials < 1) throw ConfigError("'trials' must be >= 1");
  if (root.contains("base_seed")) {
    const std::int64_t s = as_integer(root["base_seed"], "base_seed");
    cfg.base_seed = static_cast<std::uint64_t>(s);
  }
  if (root.contains("output_dir")) cfg.output_dir = as_string(root["output_dir"], "output_dir");
  if (root.contains("scales")) cfg.scales = detail::parse_scales(root["scales"]);
  if (root.contains("delta")) {
    const auto& d = root["delta"];
    if (d.is_string()) {
      if (d.get<std::string>() != "1/T")
        throw ConfigError("'delta' must be a number in (0,1) or the string \"1/T\"");
    } else {
      const double v = as_number(d, "delta");
      if (!(v > 0.0 && v < 1.0)) throw ConfigError("'delta' must lie in (0,1)");
      cfg.fixed_delta = v;
    }
  }
  if (root.contains("cci_constant"))
    cfg.cci_constant = as_number(root["cci_constant"], "cci_constant");
  if (!(cfg.cci_constant > 1.0)) throw ConfigError("'cci_constant' must exceed 1");
  if (root.contains("doubling_routine")) {
    const std::string r = as_string(root["doubling_routine"], "doubling_routine");
    if (r == "identity")
      cfg.routine = DoublingRoutine::Identity;
    else if (r == "random_explore")
      cfg.routine = DoublingRoutine::RandomExplore;
    else
      throw ConfigError("'doubling_routine' must be identity or random_explore");
  }
  if (root.contains("grid")) {
    const auto& g = root["grid"];
    if (!g.is_object()) throw ConfigError("'grid' must be an object");
    detail::check_keys(g, "grid", {"lambda", "noise_scale", "param_bound"});
    if (g.contains("lambda")) cfg.grid.lambda = detail::parse_number_list(g["lambda"], "grid.lambda");
    if (g.contains("noise_scale"))
      cfg.grid.noise_scale = detail::parse_number_list(g["noise_scale"], "grid.noise_scale");
    if (g.contains("param_bound"))
      cfg.grid.param_bound = detail::parse_number_list(g["param_bound"], "grid.param_bound");
  }
  if (root.contains("burn_in")) {
    const auto& b = root["burn_in"];
    if (!b.is_object()) throw ConfigError("'burn_in' must be an object");
    detail::check_keys(b, "burn_in", {"chi_square", "pi_min_sq", "pi_max_sq"});
    if (b.contains("chi_square")) cfg.burn_in.chi_square = as_number(b["chi_square"], "burn_in.chi_square");
    if (b.contains("pi_min_sq")) cfg.burn_in.pi_min_sq = as_number(b["pi_min_sq"], "burn_in.pi_min_sq");
    if (b.contains("pi_max_sq")) cfg.burn_in.pi_max_sq = as_number(b["pi_max_sq"], "burn_in.pi_max_sq");
  }
  if (root.contains("ma_window"))
    cfg.ma_window = static_cast<int>(as_integer(root["ma_window"], "ma_window"));
  if (cfg.ma_window < 1) throw ConfigError("'ma_window' must be >= 1");
  if (root.contains("workers")) cfg.workers = static_cast<int>(as_integer(root["workers"], "workers"));
  if (cfg.workers < 1) throw ConfigError("'workers' must be >= 1");

  // Scale sanity; delta is validated per parallelism level at run time.
  ProblemScales probe = cfg.scales;
  probe.delta = 0.5;
  try {
    probe.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(root);
}

/// Round-trips the resolved configuration (all defaults made explicit) for
/// the run manifest.
inline nlohmann::json resolved_config_json(const ExperimentConfig& cfg) {
  nlohmann::json env{{"oracle", cfg.environment.oracle},
                     {"context", cfg.environment.mode == ContextMode::ChangingPerStep ? "changing"
                                                                                      : "fixed"},
                     {"dimension", cfg.environment.dimension},
                     {"arms", cfg.environment.arms},
                     {"noise_std", cfg.environment.noise_std},
                     {"normalize", cfg.environment.normalize},
                     {"standardize", cfg.environment.standardize}};
  switch (cfg.environment.scheme.kind) {
    case FeatureKind::Identity: env["features"] = "identity"; break;
    case FeatureKind::Quadratic: env["features"] = "quadratic"; break;
    case FeatureKind::OneHot: env["features"] = "one_hot"; break;
    case FeatureKind::OneHotQuadratic: env["features"] = "one_hot_quadratic"; break;
    case FeatureKind::RandomRelu: env["features"] = "random_relu"; break;
  }
  env["alphabet_size"] = cfg.environment.scheme.alphabet_size;
  env["relu_features"] = cfg.environment.scheme.relu_features;
  if (!cfg.environment.dataset.empty()) {
    env["dataset"] = cfg.environment.dataset;
    env["value_column"] = cfg.environment.value_column;
  }
  nlohmann::json algs = nlohmann::json::array();
  for (const auto& a : cfg.algorithms) {
    nlohmann::json entry{{"name", detail::kind_name(a.kind)}, {"label", a.label}};
    if (a.kind == PolicyKind::EpsilonGreedy) entry["explore_rate"] = a.explore_rate;
    algs.push_back(entry);
  }
  nlohmann::json out{
      {"environment", env},
      {"total_queries", cfg.total_queries},
      {"parallelism", cfg.parallelism},
      {"algorithms", algs},
      {"trials", cfg.trials},
      {"base_seed", cfg.base_seed},
      {"output_dir", cfg.output_dir},
      {"scales",
       {{"lambda", cfg.scales.ridge_lambda},
        {"noise_scale", cfg.scales.noise_scale},
        {"param_bound", cfg.scales.param_bound},
        {"action_bound", cfg.scales.action_bound},
        {"misspecification", cfg.scales.misspecification}}},
      {"cci_constant", cfg.cci_constant},
      {"doubling_routine",
       cfg.routine == DoublingRoutine::RandomExplore ? "random_explore" : "identity"},
      {"ma_window", cfg.ma_window},
      {"workers", cfg.workers}};
  if (cfg.fixed_delta)
    out["delta"] = *cfg.fixed_delta;
  else
    out["delta"] = "1/T";
  if (!cfg.grid.empty()) {
    nlohmann::json g = nlohmann::json::object();
    if (!cfg.grid.lambda.empty()) g["lambda"] = cfg.grid.lambda;
    if (!cfg.grid.noise_scale.empty()) g["noise_scale"] = cfg.grid.noise_scale;
    if (!cfg.grid.param_bound.empty()) g["param_bound"] = cfg.grid.param_bound;
    out["grid"] = g;
  }
  return out;
}

}  // namespace parbandit
