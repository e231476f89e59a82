#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "parbandit/metrics.hpp"

using namespace parbandit;

TEST_CASE("instantaneous regret is the gap to the best shown arm") {
  Eigen::VectorXd values(4);
  values << 0.2, 0.9, -0.3, 0.9;
  REQUIRE(instantaneous_regret(values, 0) == Catch::Approx(0.7));
  REQUIRE(instantaneous_regret(values, 1) == 0.0);
  REQUIRE(instantaneous_regret(values, 3) == 0.0);
  REQUIRE_THROWS_AS(instantaneous_regret(values, 4), std::invalid_argument);
  REQUIRE_THROWS_AS(instantaneous_regret(values, -1), std::invalid_argument);
}

TEST_CASE("ledger enforces arrival order and rejects real negative regret") {
  RegretLedger ledger(2);
  REQUIRE_THROWS_AS(RegretLedger(0), std::invalid_argument);

  ledger.add(1, 1, 0, 0.1, 0.5, 0.0, false, 1.0);
  // p must cycle 1..P within a round, t must advance by one.
  REQUIRE_THROWS_AS(ledger.add(1, 1, 0, 0.1, 0.5, 0.0, false, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(ledger.add(2, 2, 0, 0.1, 0.5, 0.0, false, 1.0), std::invalid_argument);
  ledger.add(1, 2, 0, 0.1, 0.5, 0.0, false, 1.0);
  REQUIRE_THROWS_AS(ledger.add(3, 1, 0, 0.1, 0.5, 0.0, false, 1.0), std::invalid_argument);

  // Roundoff-scale negativity passes; anything larger is a caller bug.
  ledger.add(2, 1, 0, 0.0, -1e-12, 0.0, false, 1.0);
  REQUIRE_THROWS_AS(ledger.add(2, 2, 0, 0.0, -1e-6, 0.0, false, 1.0), std::invalid_argument);
}

namespace {

// Two processors, three rounds, hand-picked numbers.
RegretLedger hand_ledger() {
  RegretLedger ledger(2);
  //          t  p  arm  reward  regret  value  doubling  alpha
  ledger.add(1, 1, 3, 0.10, 0.50, 0.20, true, 3.0);
  ledger.add(1, 2, 1, 0.40, 0.10, 0.60, true, 3.0);
  ledger.add(2, 1, 0, 0.55, 0.20, 0.50, false, 1.5);
  ledger.add(2, 2, 2, 0.70, 0.00, 0.70, false, 1.5);
  ledger.add(3, 1, 2, 0.65, 0.05, 0.65, true, 2.5);
  ledger.add(3, 2, 0, 0.30, 0.40, 0.30, true, 2.5);
  return ledger;
}

}  // namespace

TEST_CASE("ledger summaries match hand arithmetic") {
  const RegretLedger ledger = hand_ledger();
  REQUIRE(ledger.total_queries() == 6);
  REQUIRE(ledger.rounds() == 3);

  Eigen::VectorXd cum(6);
  cum << 0.5, 0.6, 0.8, 0.8, 0.85, 1.25;
  REQUIRE((ledger.cumulative_parallel() - cum).cwiseAbs().maxCoeff() < 1e-15);
  REQUIRE(ledger.parallel_regret() == Catch::Approx(1.25));

  // Processor 1 accumulates 0.75, processor 2 accumulates 0.50.
  REQUIRE(ledger.best_regret() == Catch::Approx(0.50));

  Eigen::VectorXd best(6);
  best << 0.20, 0.60, 0.60, 0.70, 0.70, 0.70;
  REQUIRE((ledger.best_value_so_far() - best).cwiseAbs().maxCoeff() == 0.0);

  REQUIRE(ledger.doubling_round_count() == 2);  // rounds 1 and 3, counted once each
  REQUIRE(ledger.alpha_series()[2] == 1.5);
  REQUIRE(ledger.inst_regret_series().sum() == Catch::Approx(1.25));
}

TEST_CASE("simple-regret draws average out to parallel regret per query") {
  const RegretLedger ledger = hand_ledger();
  Stream stream(17);
  double sum = 0.0;
  const int n = 60000;
  for (int i = 0; i < n; ++i) sum += simple_regret_policy(ledger, stream);
  const double exact = ledger.parallel_regret() / static_cast<double>(ledger.total_queries());
  // Bernoulli-style bound: regrets live in [0, 0.5], so 5 sigma < 0.011.
  REQUIRE(sum / n == Catch::Approx(exact).margin(0.011));

  RegretLedger changing(1, false);
  changing.add(1, 1, 0, 0.0, 0.1, 0.0, false, 1.0);
  REQUIRE_THROWS_AS(simple_regret_policy(changing, stream), std::invalid_argument);
  RegretLedger empty(1);
  REQUIRE_THROWS_AS(simple_regret_policy(empty, stream), std::invalid_argument);
}

TEST_CASE("arbitrary-context doubling bound: pinned values and shape") {
  BoundInputs in;
  in.dim = 8;
  in.total_queries = 2000;
  in.ridge_lambda = 1.0;
  in.action_bound = 1.0;
  // ceil(8 / ln 2 * ln(1 + 2000 / 8)) = ceil(63.78) = 64.
  REQUIRE(bound_doubling_arbitrary(in) == 64);

  in.dim = 1;
  in.total_queries = 1;
  REQUIRE(bound_doubling_arbitrary(in) == 1);  // ln 2 / ln 2

  in.total_queries = 0;
  REQUIRE(bound_doubling_arbitrary(in) == 0);

  // Monotone in the query budget.
  BoundInputs lo, hi;
  lo.dim = hi.dim = 5;
  lo.total_queries = 100;
  hi.total_queries = 10000;
  REQUIRE(bound_doubling_arbitrary(lo) <= bound_doubling_arbitrary(hi));

  BoundInputs bad;
  bad.dim = 0;
  REQUIRE_THROWS_AS(bound_doubling_arbitrary(bad), std::invalid_argument);
  bad.dim = 3;
  bad.ridge_lambda = 0.0;
  REQUIRE_THROWS_AS(bound_doubling_arbitrary(bad), std::invalid_argument);
  bad.ridge_lambda = 1.0;
  bad.total_queries = -1;
  REQUIRE_THROWS_AS(bound_doubling_arbitrary(bad), std::invalid_argument);
}

TEST_CASE("finite-set doubling bound is m * ceil(log2 P)") {
  REQUIRE(bound_doubling_finite(30, 16) == 120);
  REQUIRE(bound_doubling_finite(30, 17) == 150);  // ceil(log2 17) = 5
  REQUIRE(bound_doubling_finite(7, 1) == 0);
  REQUIRE(bound_doubling_finite(7, 2) == 7);
  REQUIRE(bound_doubling_finite(7, 3) == 14);
  REQUIRE_THROWS_AS(bound_doubling_finite(0, 4), std::invalid_argument);
  REQUIRE_THROWS_AS(bound_doubling_finite(5, 0), std::invalid_argument);
}

TEST_CASE("rich-context burn-in needs all three distribution constants") {
  BoundInputs in;
  in.processors = 4;
  REQUIRE(!rich_context_burn_in(in).has_value());
  in.chi_square = 2.0;
  in.pi_min_sq = 0.2;
  REQUIRE(!rich_context_burn_in(in).has_value());
  in.pi_max_sq = 0.5;
  // 1 * 0.5 / 0.04 + 4 * 2 / 0.2 = 12.5 + 40.
  REQUIRE(rich_context_burn_in(in).value() == Catch::Approx(52.5));

  in.pi_min_sq = 0.0;
  REQUIRE_THROWS_AS(rich_context_burn_in(in), std::invalid_argument);
}

TEST_CASE("trailing moving average") {
  Eigen::VectorXd v(4);
  v << 1, 2, 3, 4;
  const Eigen::VectorXd ma2 = moving_average(v, 2);
  Eigen::VectorXd expected(4);
  expected << 1.0, 1.5, 2.5, 3.5;
  REQUIRE((ma2 - expected).cwiseAbs().maxCoeff() < 1e-15);

  REQUIRE((moving_average(v, 1) - v).cwiseAbs().maxCoeff() == 0.0);

  // Window longer than the series degrades to prefix means.
  const Eigen::VectorXd ma9 = moving_average(v, 9);
  Eigen::VectorXd prefixes(4);
  prefixes << 1.0, 1.5, 2.0, 2.5;
  REQUIRE((ma9 - prefixes).cwiseAbs().maxCoeff() < 1e-15);

  REQUIRE_THROWS_AS(moving_average(v, 0), std::invalid_argument);
}

TEST_CASE("cross-trial aggregation: exact two-trial arithmetic") {
  RegretLedger a(1), b(1);
  a.add(1, 1, 0, 0.0, 0.4, 0.1, false, 1.0);
  a.add(2, 1, 0, 0.0, 0.2, 0.5, false, 2.0);
  a.add(3, 1, 0, 0.0, 0.0, 0.3, false, 3.0);
  b.add(1, 1, 0, 0.0, 0.8, 0.2, false, 2.0);
  b.add(2, 1, 0, 0.0, 0.0, 0.1, false, 2.0);
  b.add(3, 1, 0, 0.0, 0.6, 0.9, false, 2.0);

  const AggregateCurves agg = aggregate_trials({a, b}, 1);

  // Cumulative curves: a -> (0.4, 0.6, 0.6), b -> (0.8, 0.8, 1.4).
  Eigen::VectorXd mean(3), dev(3);
  mean << 0.6, 0.7, 1.0;
  dev << 0.2, 0.1, 0.4;  // population deviation of two points = half the gap
  REQUIRE((agg.mean_cum_regret - mean).cwiseAbs().maxCoeff() < 1e-15);
  REQUIRE((agg.std_cum_regret - dev).cwiseAbs().maxCoeff() < 1e-15);

  // Window 1 keeps best-value means raw: bests are (0.1, 0.5, 0.5) and
  // (0.2, 0.2, 0.9).
  Eigen::VectorXd best(3);
  best << 0.15, 0.35, 0.7;
  REQUIRE((agg.mean_best_value - best).cwiseAbs().maxCoeff() < 1e-15);

  Eigen::VectorXd alpha(3);
  alpha << 1.5, 2.0, 2.5;
  REQUIRE((agg.mean_alpha_min - alpha).cwiseAbs().maxCoeff() < 1e-15);

  // A wider window smooths the best-value track and nothing else.
  const AggregateCurves agg2 = aggregate_trials({a, b}, 2);
  REQUIRE((agg2.mean_cum_regret - mean).cwiseAbs().maxCoeff() < 1e-15);
  REQUIRE((agg2.mean_best_value - moving_average(best, 2)).cwiseAbs().maxCoeff() < 1e-15);

  RegretLedger shape(2);
  shape.add(1, 1, 0, 0.0, 0.0, 0.0, false, 1.0);
  shape.add(1, 2, 0, 0.0, 0.0, 0.0, false, 1.0);
  REQUIRE_THROWS_AS(aggregate_trials({a, shape}), std::invalid_argument);
  REQUIRE_THROWS_AS(aggregate_trials({}), std::invalid_argument);
}
