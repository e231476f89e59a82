#pragma once

// Regret bookkeeping and the closed-form counting bounds used to sanity-check
// runs.  All regret is measured against noiseless arm values: policies only
// ever see noisy rewards, the ledger only ever sees the clean signal.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "parbandit/rng.hpp"

namespace parbandit {

/// Gap to the best arm of the decision set actually shown.
inline double instantaneous_regret(const Eigen::Ref<const Eigen::VectorXd>& values, int chosen) {
  if (chosen < 0 || chosen >= values.size())
    throw std::invalid_argument("instantaneous_regret: chosen arm not in the decision set");
  return values.maxCoeff() - values[chosen];
}

/// One row per (round, processor) query, appended in lexicographic order.
struct QueryRecord {
  std::int64_t t = 0;
  int p = 0;
  int arm_index = 0;
  double reward = 0.0;
  double inst_regret = 0.0;
  double chosen_value = 0.0;  // noiseless value of the played arm
  bool is_doubling = false;
  double alpha_min = 1.0;
};

class RegretLedger {
 public:
  explicit RegretLedger(int processors, bool fixed_global = true)
      : processors_(processors), fixed_global_(fixed_global) {
    if (processors_ < 1) throw std::invalid_argument("RegretLedger: processors must be >= 1");
  }

  int processors() const { return processors_; }
  bool fixed_global() const { return fixed_global_; }
  const std::vector<QueryRecord>& records() const { return records_; }
  std::int64_t total_queries() const { return static_cast<std::int64_t>(records_.size()); }
  std::int64_t rounds() const { return total_queries() / processors_; }

  /// Appends one query.  Records must arrive in (t, p) order with p cycling
  /// 1..P; regrets may only be negative by roundoff.
  void add(std::int64_t t, int p, int arm_index, double reward, double inst_regret,
           double chosen_value, bool is_doubling, double alpha_min) {
    if (inst_regret < -1e-9)
      throw std::invalid_argument("RegretLedger: negative instantaneous regret");
    const std::int64_t k = total_queries();
    const std::int64_t expected_t = k / processors_ + 1;
    const int expected_p = static_cast<int>(k % processors_) + 1;
    if (t != expected_t || p != expected_p)
      throw std::invalid_argument("RegretLedger: records must arrive in (t, p) order");
    records_.push_back({t, p, arm_index, reward, inst_regret, chosen_value, is_doubling, alpha_min});
  }

  /// Running sum of instantaneous regrets over all queries.
  Eigen::VectorXd cumulative_parallel() const {
    Eigen::VectorXd out(total_queries());
    double sum = 0.0;
    for (std::int64_t i = 0; i < total_queries(); ++i) {
      sum += records_[static_cast<std::size_t>(i)].inst_regret;
      out[i] = sum;
    }
    return out;
  }

  double parallel_regret() const {
    double sum = 0.0;
    for (const auto& r : records_) sum += r.inst_regret;
    return sum;
  }

  /// Cumulative regret of the best single processor.
  double best_regret() const {
    Eigen::VectorXd per_p = Eigen::VectorXd::Zero(processors_);
    for (const auto& r : records_) per_p[r.p - 1] += r.inst_regret;
    return per_p.minCoeff();
  }

  /// Best noiseless value seen so far, per query index.
  Eigen::VectorXd best_value_so_far() const {
    Eigen::VectorXd out(total_queries());
    double best = -std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < total_queries(); ++i) {
      best = std::max(best, records_[static_cast<std::size_t>(i)].chosen_value);
      out[i] = best;
    }
    return out;
  }

  Eigen::VectorXd alpha_series() const {
    Eigen::VectorXd out(total_queries());
    for (std::int64_t i = 0; i < total_queries(); ++i)
      out[i] = records_[static_cast<std::size_t>(i)].alpha_min;
    return out;
  }

  Eigen::VectorXd inst_regret_series() const {
    Eigen::VectorXd out(total_queries());
    for (std::int64_t i = 0; i < total_queries(); ++i)
      out[i] = records_[static_cast<std::size_t>(i)].inst_regret;
    return out;
  }

  /// Number of rounds (not queries) flagged as doubling rounds.
  std::int64_t doubling_round_count() const {
    std::int64_t n = 0;
    for (const auto& r : records_)
      if (r.p == 1 && r.is_doubling) ++n;
    return n;
  }

 private:
  int processors_;
  bool fixed_global_;
  std::vector<QueryRecord> records_;
};

/// Simple-regret estimate: the regret of one action drawn uniformly from all
/// recorded plays.  Its expectation equals parallel regret / total queries.
/// Meaningful only when every query faced the same global decision set.
inline double simple_regret_policy(const RegretLedger& ledger, Stream& stream) {
  if (!ledger.fixed_global())
    throw std::invalid_argument("simple_regret_policy: needs a fixed global decision set");
  if (ledger.total_queries() == 0)
    throw std::invalid_argument("simple_regret_policy: empty ledger");
  const auto i = static_cast<std::size_t>(
      stream.uniform_below(static_cast<std::uint64_t>(ledger.total_queries())));
  return ledger.records()[i].inst_regret;
}

// ---------------------------------------------------------------------------
// Counting bounds

struct BoundInputs {
  Eigen::Index dim = 1;
  std::int64_t total_queries = 0;  // T * P
  int processors = 1;
  double action_bound = 1.0;
  double ridge_lambda = 1.0;
  std::optional<std::int64_t> arm_count;  // finite global sets only
  // Optional distribution-dependent constants for the burn-in bound.
  std::optional<double> chi_square;
  std::optional<double> pi_min_sq;
  std::optional<double> pi_max_sq;
};

/// Worst-case number of doubling rounds over arbitrary bounded-norm contexts:
/// ceil((d / ln 2) * ln(1 + TP * L^2 / (d * lambda))).
inline std::int64_t bound_doubling_arbitrary(const BoundInputs& in) {
  if (in.dim <= 0) throw std::invalid_argument("bound_doubling_arbitrary: dim must be positive");
  if (!(in.ridge_lambda > 0.0))
    throw std::invalid_argument("bound_doubling_arbitrary: lambda must be positive");
  if (in.total_queries < 0)
    throw std::invalid_argument("bound_doubling_arbitrary: total_queries must be >= 0");
  const double d = static_cast<double>(in.dim);
  const double load = static_cast<double>(in.total_queries) * in.action_bound * in.action_bound /
                      (d * in.ridge_lambda);
  return static_cast<std::int64_t>(std::ceil(d / std::log(2.0) * std::log1p(load)));
}

/// Doubling rounds under a finite global set of m arms: m * ceil(log2 P).
inline std::int64_t bound_doubling_finite(std::int64_t arm_count, int processors) {
  if (arm_count <= 0) throw std::invalid_argument("bound_doubling_finite: arm count must be positive");
  if (processors < 1) throw std::invalid_argument("bound_doubling_finite: processors must be >= 1");
  std::int64_t ceil_log2 = 0;
  while ((std::int64_t(1) << ceil_log2) < processors) ++ceil_log2;
  return arm_count * ceil_log2;
}

/// Burn-in round count after which rich stochastic contexts keep the
/// covariance stable without explicit doubling handling; requires the
/// caller-supplied distribution constants.
inline std::optional<double> rich_context_burn_in(const BoundInputs& in) {
  if (!in.chi_square || !in.pi_min_sq || !in.pi_max_sq) return std::nullopt;
  if (!(*in.pi_min_sq > 0.0))
    throw std::invalid_argument("rich_context_burn_in: pi_min_sq must be positive");
  const double l2 = in.action_bound * in.action_bound;
  return l2 * (*in.pi_max_sq) / ((*in.pi_min_sq) * (*in.pi_min_sq)) +
         static_cast<double>(in.processors) * (*in.chi_square) / (*in.pi_min_sq);
}

// ---------------------------------------------------------------------------
// Cross-trial aggregation

/// Trailing (causal) moving average: out[i] = mean(v[max(0, i-w+1) .. i]).
inline Eigen::VectorXd moving_average(const Eigen::Ref<const Eigen::VectorXd>& v, int window) {
  if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
  Eigen::VectorXd out(v.size());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    sum += v[i];
    if (i >= window) sum -= v[i - window];
    out[i] = sum / static_cast<double>(std::min<Eigen::Index>(i + 1, window));
  }
  return out;
}

struct AggregateCurves {
  Eigen::VectorXd mean_cum_regret;
  Eigen::VectorXd std_cum_regret;  // population deviation across trials
  Eigen::VectorXd mean_best_value; // smoothed with the trailing window
  Eigen::VectorXd mean_alpha_min;
};

/// Pointwise mean/deviation across trials of the cumulative-regret curves,
/// plus smoothed best-value and alpha tracks.  All trials must share shape.
inline AggregateCurves aggregate_trials(const std::vector<RegretLedger>& trials,
                                        int ma_window = 30) {
  if (trials.empty()) throw std::invalid_argument("aggregate_trials: no trials");
  const std::int64_t n = trials.front().total_queries();
  const int P = trials.front().processors();
  for (const auto& t : trials)
    if (t.total_queries() != n || t.processors() != P)
      throw std::invalid_argument("aggregate_trials: trials differ in shape");

  const auto k = static_cast<double>(trials.size());
  AggregateCurves out;
  out.mean_cum_regret = Eigen::VectorXd::Zero(n);
  out.std_cum_regret = Eigen::VectorXd::Zero(n);
  out.mean_best_value = Eigen::VectorXd::Zero(n);
  out.mean_alpha_min = Eigen::VectorXd::Zero(n);

  std::vector<Eigen::VectorXd> cums;
  cums.reserve(trials.size());
  for (const auto& t : trials) {
    cums.push_back(t.cumulative_parallel());
    out.mean_cum_regret += cums.back();
    out.mean_best_value += t.best_value_so_far();
    out.mean_alpha_min += t.alpha_series();
  }
  out.mean_cum_regret /= k;
  out.mean_best_value /= k;
  out.mean_alpha_min /= k;
  for (const auto& c : cums) {
    const Eigen::VectorXd diff = c - out.mean_cum_regret;
    out.std_cum_regret += diff.cwiseProduct(diff);
  }
  out.std_cum_regret = (out.std_cum_regret / k).cwiseSqrt();
  out.mean_best_value = moving_average(out.mean_best_value, ma_window);
  return out;
}

}  // namespace parbandit
