#pragma once

// Batched arm selection.  Each round a policy proposes P candidate arms, the
// aggregate candidate covariance is tested against the stability threshold
// (a round whose candidates would more-than-c-fold the covariance in some
// direction is a doubling round), and on doubling rounds a replacement
// routine chooses what is actually played.  Rewards arrive only at the end
// of a round; nothing intra-round depends on them.
//
// Variant summary, all sharing one ridge estimate per round:
//   LinUcb       - optimistic scores under the round-start covariance.
//   LazyLinUcb   - optimistic scores under the running intra-round
//                  covariance, radius widened by sqrt(2).
//   LinTs        - one perturbed parameter per processor from the
//                  round-start covariance.
//   LazyLinTs    - perturbations whitened by the intra-round covariance,
//                  radius widened by sqrt(2).
//   EpsilonGreedy- empirical-mean baseline, no covariance logic.
//
// With a single processor the intra-round covariance never moves, so the
// lazy variants drop the sqrt(2) widening and coincide with their non-lazy
// counterparts action for action.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "parbandit/confidence.hpp"
#include "parbandit/contexts.hpp"
#include "parbandit/covariance.hpp"
#include "parbandit/rng.hpp"

namespace parbandit {

class UnsupportedConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PolicyKind { LinUcb, LazyLinUcb, LinTs, LazyLinTs, EpsilonGreedy };

enum class DoublingRoutine { Identity, RandomExplore };

struct PolicyConfig {
  PolicyKind kind = PolicyKind::LinUcb;
  ProblemScales scales;
  DoublingRoutine routine = DoublingRoutine::Identity;
  double cci_constant = 2.0;   // covariance growth threshold c
  double explore_rate = 0.05;  // EpsilonGreedy only
};

/// Everything carried from one round to the next.  history.cov is the
/// round-start covariance V_{t,1}; theta_hat and radius are derived from it.
struct RoundState {
  std::int64_t t = 1;
  Eigen::VectorXd theta_hat;
  double radius = 0.0;
  RegressionSums history;

  const CovarianceState& cov_start() const { return history.cov; }

  static RoundState initial(const ProblemScales& scales, Eigen::Index dim, int processors) {
    RoundState s{1, Eigen::VectorXd::Zero(dim), 0.0, RegressionSums(dim, scales.ridge_lambda)};
    s.radius = beta_radius(scales, s.history.cov, 1, processors);
    return s;
  }
};

/// Outcome of one round of selection.  candidates are the policy's picks;
/// actions are what gets played (identical except on doubling rounds with a
/// replacement routine).
struct BatchDecision {
  Eigen::MatrixXd candidates;  // P x d
  Eigen::MatrixXd actions;     // P x d
  std::vector<int> candidate_indices;
  std::vector<int> action_indices;
  bool is_doubling_round = false;
  double alpha_min = 1.0;  // smallest a with candidate aggregate <= a * V_{t,1}
};

/// Doubling-round replacement that keeps the candidates as played actions.
inline Eigen::MatrixXd dr_identity(const Eigen::MatrixXd& candidates) { return candidates; }

/// Doubling-round replacement that plays one uniformly random arm per
/// processor from its own decision set.
inline std::pair<Eigen::MatrixXd, std::vector<int>> dr_random_explore(const RoundContexts& rc,
                                                                      Stream& stream) {
  const int P = rc.processors();
  if (P < 1) throw std::invalid_argument("dr_random_explore: empty batch");
  Eigen::MatrixXd actions(P, rc.at(0).cols());
  std::vector<int> indices(static_cast<std::size_t>(P));
  for (int p = 0; p < P; ++p) {
    const Eigen::MatrixXd& arms = rc.at(p);
    if (arms.rows() == 0) throw std::invalid_argument("dr_random_explore: empty context");
    const int i = static_cast<int>(stream.uniform_below(static_cast<std::uint64_t>(arms.rows())));
    actions.row(p) = arms.row(i);
    indices[static_cast<std::size_t>(p)] = i;
  }
  return {std::move(actions), std::move(indices)};
}

namespace detail {

/// First index attaining the maximum (strict-improvement scan).
inline int argmax_first(const Eigen::Ref<const Eigen::VectorXd>& v) {
  int best = 0;
  double best_value = v[0];
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > best_value) {
      best_value = v[i];
      best = static_cast<int>(i);
    }
  return best;
}

}  // namespace detail

class Policy {
 public:
  explicit Policy(PolicyConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.scales.validate();
    if (!(cfg_.cci_constant > 1.0))
      throw std::invalid_argument("Policy: cci_constant must exceed 1");
    if (cfg_.kind == PolicyKind::EpsilonGreedy &&
        (cfg_.explore_rate < 0.0 || cfg_.explore_rate > 1.0))
      throw std::invalid_argument("Policy: explore_rate must be in [0, 1]");
  }

  const PolicyConfig& config() const { return cfg_; }

  /// Chooses the round's P arms.  Consumes the stream only where the variant
  /// samples (perturbations, exploration picks, replacement routine).
  BatchDecision select_batch(const RoundState& state, const RoundContexts& rc,
                             Stream& stream) const {
    const int P = rc.processors();
    const Eigen::Index d = state.history.cov.dim();
    for (int p = 0; p < P; ++p) {
      if (rc.at(p).rows() == 0) throw std::invalid_argument("select_batch: empty context");
      if (rc.at(p).cols() != d) throw std::invalid_argument("select_batch: context dimension mismatch");
    }

    BatchDecision dec;
    dec.candidates.resize(P, d);
    dec.candidate_indices.resize(static_cast<std::size_t>(P));

    switch (cfg_.kind) {
      case PolicyKind::LinUcb:
        select_linucb(state, rc, dec);
        break;
      case PolicyKind::LazyLinUcb:
        select_lazy_linucb(state, rc, dec);
        break;
      case PolicyKind::LinTs:
        select_lints(state, rc, stream, dec);
        break;
      case PolicyKind::LazyLinTs:
        select_lazy_lints(state, rc, stream, dec);
        break;
      case PolicyKind::EpsilonGreedy:
        select_epsilon_greedy(state, rc, stream, dec);
        break;
    }

    // Stability analysis of the candidate aggregate; one check per round.
    CovarianceState aggregate = state.cov_start();
    for (int p = 0; p < P; ++p) aggregate.rank1_update(dec.candidates.row(p).transpose());
    const PsdComparison cmp = psd_dominates(aggregate, state.cov_start(), cfg_.cci_constant);
    dec.alpha_min = std::max(1.0, cmp.witness_value);
    dec.is_doubling_round = cfg_.kind != PolicyKind::EpsilonGreedy && !cmp.dominated;

    if (dec.is_doubling_round && cfg_.routine == DoublingRoutine::RandomExplore) {
      auto [actions, indices] = dr_random_explore(rc, stream);
      dec.actions = std::move(actions);
      dec.action_indices = std::move(indices);
    } else {
      dec.actions = dr_identity(dec.candidates);
      dec.action_indices = dec.candidate_indices;
    }
    return dec;
  }

  /// Folds the round's rewards into the regression sums and rolls the state
  /// forward; this is the only place rewards enter.
  RoundState observe_batch(RoundState state, const BatchDecision& decision,
                           const std::vector<double>& rewards) {
    const auto P = static_cast<Eigen::Index>(rewards.size());
    if (P != decision.actions.rows())
      throw std::invalid_argument("observe_batch: one reward per action required");
    for (Eigen::Index p = 0; p < P; ++p)
      state.history.add(decision.actions.row(p).transpose(), rewards[static_cast<std::size_t>(p)]);
    if (cfg_.kind == PolicyKind::EpsilonGreedy)
      for (Eigen::Index p = 0; p < P; ++p) {
        const auto arm = static_cast<std::size_t>(decision.action_indices[static_cast<std::size_t>(p)]);
        pulls_.at(arm) += 1;
        reward_sums_.at(arm) += rewards[static_cast<std::size_t>(p)];
      }
    state.t += 1;
    state.theta_hat = ridge_estimate(state.history);
    state.radius = beta_radius(cfg_.scales, state.history.cov, state.t, static_cast<int>(P));
    return state;
  }

 private:
  static bool all_shared(const RoundContexts& rc) { return rc.shared_across_processors(); }

  void select_linucb(const RoundState& state, const RoundContexts& rc, BatchDecision& dec) const {
    const ConfidenceSet set{state.theta_hat, &state.cov_start(), state.radius, 1.0};
    const int P = rc.processors();
    if (all_shared(rc)) {
      const Eigen::VectorXd scores = ucb_scores(rc.at(0), set);
      const int i = detail::argmax_first(scores);
      for (int p = 0; p < P; ++p) {
        dec.candidates.row(p) = rc.at(0).row(i);
        dec.candidate_indices[static_cast<std::size_t>(p)] = i;
      }
      return;
    }
    for (int p = 0; p < P; ++p) {
      const Eigen::VectorXd scores = ucb_scores(rc.at(p), set);
      const int i = detail::argmax_first(scores);
      dec.candidates.row(p) = rc.at(p).row(i);
      dec.candidate_indices[static_cast<std::size_t>(p)] = i;
    }
  }

  void select_lazy_linucb(const RoundState& state, const RoundContexts& rc,
                          BatchDecision& dec) const {
    const int P = rc.processors();
    const double inflation = P > 1 ? std::sqrt(2.0) : 1.0;
    CovarianceState running = state.cov_start();
    if (all_shared(rc)) {
      // Shared decision set: track every arm's quadratic form under the
      // running covariance and downdate it in O(m d) per pick
      // (Sherman-Morrison) instead of re-whitening the whole set.
      const Eigen::MatrixXd& X = rc.at(0);
      const Eigen::VectorXd base = X * state.theta_hat;
      Eigen::VectorXd quad = running.quadratic_inv_rows(X);
      const double width = inflation * state.radius;
      for (int p = 0; p < P; ++p) {
        const Eigen::VectorXd scores = base + width * quad.cwiseSqrt().matrix();
        const int i = detail::argmax_first(scores);
        dec.candidates.row(p) = X.row(i);
        dec.candidate_indices[static_cast<std::size_t>(p)] = i;
        if (p + 1 < P) {
          const Eigen::VectorXd u = running.solve(X.row(i).transpose());
          const Eigen::VectorXd xu = X * u;
          quad -= xu.cwiseProduct(xu) / (1.0 + quad[i]);
          quad = quad.cwiseMax(0.0);
          running.rank1_update(X.row(i).transpose());
        }
      }
      return;
    }
    for (int p = 0; p < P; ++p) {
      const ConfidenceSet set{state.theta_hat, &running, state.radius, inflation};
      const Eigen::VectorXd scores = ucb_scores(rc.at(p), set);
      const int i = detail::argmax_first(scores);
      dec.candidates.row(p) = rc.at(p).row(i);
      dec.candidate_indices[static_cast<std::size_t>(p)] = i;
      if (p + 1 < P) running.rank1_update(rc.at(p).row(i).transpose());
    }
  }

  void select_lints(const RoundState& state, const RoundContexts& rc, Stream& stream,
                    BatchDecision& dec) const {
    const ConfidenceSet set{state.theta_hat, &state.cov_start(), state.radius, 1.0};
    const int P = rc.processors();
    const Eigen::Index d = state.history.cov.dim();
    for (int p = 0; p < P; ++p) {
      const Eigen::VectorXd theta = ts_sample(set, stream.normal_vector(d));
      const Eigen::VectorXd scores = rc.at(p) * theta;
      const int i = detail::argmax_first(scores);
      dec.candidates.row(p) = rc.at(p).row(i);
      dec.candidate_indices[static_cast<std::size_t>(p)] = i;
    }
  }

  void select_lazy_lints(const RoundState& state, const RoundContexts& rc, Stream& stream,
                         BatchDecision& dec) const {
    const int P = rc.processors();
    const double inflation = P > 1 ? std::sqrt(2.0) : 1.0;
    const Eigen::Index d = state.history.cov.dim();
    CovarianceState running = state.cov_start();
    for (int p = 0; p < P; ++p) {
      const ConfidenceSet set{state.theta_hat, &running, state.radius, inflation};
      const Eigen::VectorXd theta = ts_sample(set, stream.normal_vector(d));
      const Eigen::VectorXd scores = rc.at(p) * theta;
      const int i = detail::argmax_first(scores);
      dec.candidates.row(p) = rc.at(p).row(i);
      dec.candidate_indices[static_cast<std::size_t>(p)] = i;
      if (p + 1 < P) running.rank1_update(rc.at(p).row(i).transpose());
    }
  }

  void select_epsilon_greedy(const RoundState& state, const RoundContexts& rc, Stream& stream,
                             BatchDecision& dec) const {
    (void)state;
    if (!rc.fixed_global())
      throw UnsupportedConfiguration(
          "EpsilonGreedy needs a fixed global arm list (empirical means are per-arm)");
    const Eigen::MatrixXd& X = rc.at(0);
    const auto m = static_cast<std::size_t>(X.rows());
    if (pulls_.empty()) {
      pulls_.assign(m, 0);
      reward_sums_.assign(m, 0.0);
    } else if (pulls_.size() != m) {
      throw UnsupportedConfiguration("EpsilonGreedy: arm list changed size between rounds");
    }
    // Unpulled arms carry an empirical mean of zero.
    Eigen::VectorXd means(X.rows());
    for (std::size_t i = 0; i < m; ++i)
      means[static_cast<Eigen::Index>(i)] = pulls_[i] > 0 ? reward_sums_[i] / pulls_[i] : 0.0;
    const int greedy = detail::argmax_first(means);
    const int P = rc.processors();
    for (int p = 0; p < P; ++p) {
      int i = greedy;
      if (stream.uniform() < cfg_.explore_rate)
        i = static_cast<int>(stream.uniform_below(static_cast<std::uint64_t>(m)));
      dec.candidates.row(p) = X.row(i);
      dec.candidate_indices[static_cast<std::size_t>(p)] = i;
    }
  }

  PolicyConfig cfg_;
  mutable std::vector<std::int64_t> pulls_;  // EpsilonGreedy per-arm statistics
  mutable std::vector<double> reward_sums_;
};

/// Test support: replays a decision's candidates as intra-round prefixes and
/// confirms V_{t,1} <= V_{t,p} <= c * V_{t,1} for every prefix.
inline bool cci_prefixes_hold(const CovarianceState& start, const BatchDecision& decision,
                              double c) {
  CovarianceState prefix = start;
  for (Eigen::Index p = 0; p <= decision.candidates.rows(); ++p) {
    if (!psd_dominates(prefix, start, c).dominated) return false;
    if (p < decision.candidates.rows())
      prefix.rank1_update(decision.candidates.row(p).transpose());
  }
  return true;
}

}  // namespace parbandit
