#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <string>

#include "parbandit/config.hpp"

using namespace parbandit;
using nlohmann::json;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::MessageMatches;

namespace {
ExperimentConfig parse(const char* text) { return parse_config(json::parse(text)); }
}  // namespace

TEST_CASE("an empty object yields the documented defaults") {
  const ExperimentConfig cfg = parse("{}");
  REQUIRE(cfg.total_queries == 1000);
  REQUIRE(cfg.parallelism == std::vector<int>{1});
  REQUIRE(cfg.algorithms.size() == 1);
  REQUIRE(cfg.algorithms[0].kind == PolicyKind::LinUcb);
  REQUIRE(cfg.algorithms[0].label == "LinUCB");
  REQUIRE(cfg.trials == 1);
  REQUIRE(cfg.base_seed == 0);
  REQUIRE(cfg.output_dir == "out");
  REQUIRE(cfg.scales.ridge_lambda == 1.0);
  REQUIRE(cfg.scales.noise_scale == 1.0);
  REQUIRE(cfg.scales.param_bound == 1.0);
  REQUIRE(cfg.scales.misspecification == 0.0);
  REQUIRE(!cfg.fixed_delta.has_value());
  REQUIRE(cfg.cci_constant == 2.0);
  REQUIRE(cfg.routine == DoublingRoutine::Identity);
  REQUIRE(cfg.grid.empty());
  REQUIRE(cfg.ma_window == 30);
  REQUIRE(cfg.workers == 1);

  REQUIRE(cfg.environment.oracle == "linear");
  REQUIRE(cfg.environment.mode == ContextMode::FixedGlobal);
  REQUIRE(cfg.environment.dimension == 20);
  REQUIRE(cfg.environment.arms == 1000);
  REQUIRE(cfg.environment.noise_std == 1.0);
  REQUIRE(cfg.environment.normalize);
  REQUIRE(cfg.environment.scheme.kind == FeatureKind::Identity);

  // Unset delta resolves to 1 / rounds at each parallelism level.
  REQUIRE(cfg.rounds_for(4) == 250);
  REQUIRE(cfg.delta_for(4) == Catch::Approx(1.0 / 250.0));
  REQUIRE(cfg.delta_for(1) == Catch::Approx(1.0 / 1000.0));
}

TEST_CASE("unknown keys are rejected with their full path") {
  REQUIRE_THROWS_MATCHES(parse(R"({"totl_queries": 10})"), ConfigError,
                         MessageMatches(ContainsSubstring("unknown key 'totl_queries'")));
  REQUIRE_THROWS_MATCHES(parse(R"({"environment": {"oracel": "linear"}})"), ConfigError,
                         MessageMatches(ContainsSubstring("'environment.oracel'")));
  REQUIRE_THROWS_MATCHES(parse(R"({"scales": {"lamda": 2}})"), ConfigError,
                         MessageMatches(ContainsSubstring("'scales.lamda'")));
  REQUIRE_THROWS_MATCHES(parse(R"({"grid": {"sigma": [1]}})"), ConfigError,
                         MessageMatches(ContainsSubstring("'grid.sigma'")));
  REQUIRE_THROWS_MATCHES(parse(R"({"algorithms": [{"name": "LinUCB", "rate": 1}]})"), ConfigError,
                         MessageMatches(ContainsSubstring("'algorithms[].rate'")));
  REQUIRE_THROWS_MATCHES(parse(R"({"burn_in": {"chi": 1}})"), ConfigError,
                         MessageMatches(ContainsSubstring("'burn_in.chi'")));
}

TEST_CASE("the query budget must split evenly across every parallelism level") {
  REQUIRE_NOTHROW(parse(R"({"total_queries": 1200, "parallelism": [1, 4, 12]})"));
  REQUIRE_THROWS_MATCHES(parse(R"({"total_queries": 1000, "parallelism": [1, 3]})"), ConfigError,
                         MessageMatches(ContainsSubstring("divisible")));
  REQUIRE_THROWS_AS(parse(R"({"parallelism": []})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"parallelism": [0]})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"total_queries": 0})"), ConfigError);
}

TEST_CASE("delta accepts a number in (0,1) or the 1/T rule") {
  REQUIRE(parse(R"({"delta": 0.05})").fixed_delta.value() == 0.05);
  REQUIRE(parse(R"({"delta": 0.05})").delta_for(10) == 0.05);
  REQUIRE(!parse(R"({"delta": "1/T"})").fixed_delta.has_value());
  REQUIRE_THROWS_AS(parse(R"({"delta": 1.5})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"delta": 0})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"delta": "half"})"), ConfigError);
}

TEST_CASE("algorithm lists: strings, objects, labels, and clashes") {
  const ExperimentConfig cfg = parse(R"({
    "algorithms": ["LinUCB", "LazyLinTS",
                   {"name": "EpsilonGreedy", "explore_rate": 0.1},
                   {"name": "EpsilonGreedy", "explore_rate": 0.25, "label": "eg-wide"}]
  })");
  REQUIRE(cfg.algorithms.size() == 4);
  REQUIRE(cfg.algorithms[1].kind == PolicyKind::LazyLinTs);
  REQUIRE(cfg.algorithms[2].label == "EpsilonGreedy_0.1");
  REQUIRE(cfg.algorithms[3].label == "eg-wide");
  REQUIRE(cfg.algorithms[3].explore_rate == 0.25);

  REQUIRE_THROWS_MATCHES(parse(R"({"algorithms": ["LinUCB", "LinUCB"]})"), ConfigError,
                         MessageMatches(ContainsSubstring("duplicate algorithm label 'LinUCB'")));
  REQUIRE_THROWS_AS(parse(R"({"algorithms": ["LinSCB"]})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"algorithms": [{"explore_rate": 0.1}]})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"algorithms": []})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"algorithms": [3]})"), ConfigError);

  // Two epsilon entries at the same rate collide on the generated label.
  REQUIRE_THROWS_MATCHES(
      parse(R"({"algorithms": [{"name": "EpsilonGreedy"}, {"name": "EpsilonGreedy"}]})"),
      ConfigError, MessageMatches(ContainsSubstring("duplicate")));
}

TEST_CASE("environment compatibility rules") {
  // Changing contexts exist only for the linear oracle.
  REQUIRE_THROWS_MATCHES(
      parse(R"({"environment": {"oracle": "neural", "context": "changing"}})"), ConfigError,
      MessageMatches(ContainsSubstring("changing contexts need the linear oracle")));
  // The linear oracle consumes raw arms; feature maps belong to the others.
  REQUIRE_THROWS_MATCHES(parse(R"({"environment": {"features": "quadratic"}})"), ConfigError,
                         MessageMatches(ContainsSubstring("raw arms")));
  REQUIRE_NOTHROW(parse(R"({"environment": {"oracle": "neural", "features": "quadratic"}})"));
  // Tabular runs need a dataset path.
  REQUIRE_THROWS_MATCHES(parse(R"({"environment": {"oracle": "tabular"}})"), ConfigError,
                         MessageMatches(ContainsSubstring("dataset")));
  // Epsilon-greedy needs a fixed arm set.
  REQUIRE_THROWS_MATCHES(
      parse(R"({"environment": {"context": "changing"},
                "algorithms": ["EpsilonGreedy"]})"),
      ConfigError, MessageMatches(ContainsSubstring("fixed arm set")));

  REQUIRE_THROWS_AS(parse(R"({"environment": {"oracle": "forest"}})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"environment": {"dimension": 0}})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"environment": {"arms": 0}})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"environment": {"noise_std": -1}})"), ConfigError);

  const ExperimentConfig neural = parse(
      R"({"environment": {"oracle": "neural", "arms": 0, "features": "random_relu",
                          "relu_features": 64}})");
  REQUIRE(neural.environment.arms == 0);  // zero = the full binary arm set
  REQUIRE(neural.environment.scheme.kind == FeatureKind::RandomRelu);
  REQUIRE(neural.environment.scheme.relu_features == 64);
}

TEST_CASE("feature column selection forms") {
  const ExperimentConfig names = parse(
      R"({"environment": {"oracle": "tabular", "dataset": "x.csv",
                          "feature_columns": ["a", "b"]}})");
  REQUIRE(names.environment.columns.mode == ColumnSelection::Mode::Names);
  REQUIRE(names.environment.columns.names == std::vector<std::string>{"a", "b"});

  const ExperimentConfig range = parse(
      R"({"environment": {"oracle": "tabular", "dataset": "x.csv",
                          "feature_columns": "2:5"}})");
  REQUIRE(range.environment.columns.mode == ColumnSelection::Mode::IndexRange);
  REQUIRE(range.environment.columns.range_first == 2);
  REQUIRE(range.environment.columns.range_last == 5);

  REQUIRE_THROWS_AS(parse(R"({"environment": {"oracle": "tabular", "dataset": "x.csv",
                                              "feature_columns": "2-5"}})"),
                    ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"environment": {"oracle": "tabular", "dataset": "x.csv",
                                              "feature_columns": 7}})"),
                    ConfigError);
}

TEST_CASE("grid, burn-in, and scale validation") {
  const ExperimentConfig cfg = parse(R"({
    "grid": {"lambda": [0.1, 1.0], "param_bound": [0.5]},
    "burn_in": {"chi_square": 2.0, "pi_min_sq": 0.2}
  })");
  REQUIRE(cfg.grid.lambda == std::vector<double>{0.1, 1.0});
  REQUIRE(cfg.grid.noise_scale.empty());
  REQUIRE(cfg.grid.param_bound == std::vector<double>{0.5});
  REQUIRE(!cfg.grid.empty());
  REQUIRE(cfg.burn_in.chi_square.value() == 2.0);
  REQUIRE(!cfg.burn_in.pi_max_sq.has_value());

  REQUIRE_THROWS_AS(parse(R"({"grid": {"lambda": []}})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"scales": {"lambda": -1}})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"scales": {"noise_scale": 0}})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"cci_constant": 1.0})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"doubling_routine": "retry"})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"ma_window": 0})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"workers": 0})"), ConfigError);
  REQUIRE_THROWS_AS(parse(R"({"trials": 0})"), ConfigError);
}

TEST_CASE("resolving a config and reparsing it is a fixed point") {
  const ExperimentConfig cfg = parse(R"({
    "environment": {"oracle": "neural", "arms": 500, "features": "quadratic",
                    "noise_std": 0.5},
    "total_queries": 3000,
    "parallelism": [1, 10],
    "algorithms": ["LinUCB", "LazyLinTS", {"name": "EpsilonGreedy", "explore_rate": 0.05}],
    "trials": 4,
    "base_seed": 99,
    "delta": 0.01,
    "scales": {"lambda": 0.5, "param_bound": 0.2},
    "doubling_routine": "random_explore",
    "grid": {"lambda": [0.1, 1.0]}
  })");
  const json resolved = resolved_config_json(cfg);
  const ExperimentConfig again = parse_config(resolved);
  REQUIRE(resolved_config_json(again) == resolved);
  REQUIRE(again.environment.noise_std == 0.5);
  REQUIRE(again.algorithms[2].label == "EpsilonGreedy_0.05");
  REQUIRE(again.routine == DoublingRoutine::RandomExplore);
  REQUIRE(again.fixed_delta.value() == 0.01);
}

TEST_CASE("loading from disk: missing files and broken JSON become config errors") {
  REQUIRE_THROWS_MATCHES(load_config("/nonexistent/path.json"), ConfigError,
                         MessageMatches(ContainsSubstring("cannot open")));

  const std::string path = "bad_config_fixture.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  REQUIRE_THROWS_MATCHES(load_config(path), ConfigError,
                         MessageMatches(ContainsSubstring(path)));
  std::remove(path.c_str());

  const std::string good = "good_config_fixture.json";
  {
    std::ofstream out(good);
    out << R"({"total_queries": 60, "parallelism": [3]})";
  }
  REQUIRE(load_config(good).rounds_for(3) == 20);
  std::remove(good.c_str());
}
