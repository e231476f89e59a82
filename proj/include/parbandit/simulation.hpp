#pragma once

// One trial = one environment, one policy, T rounds of P queries.  All
// randomness forks from the trial key: "policy" feeds selection (sampling,
// exploration, replacement picks), "noise"/t/p feeds exactly one reward draw
// per query.  Because every draw is keyed, a trial's output is independent
// of how trials are scheduled across workers.

#include <cstdint>
#include <functional>
#include <vector>

#include "parbandit/environments.hpp"
#include "parbandit/metrics.hpp"
#include "parbandit/policies.hpp"
#include "parbandit/rng.hpp"

namespace parbandit {

/// Observer invoked after each round's selection, before rewards are folded
/// in; used by tests to audit confidence sets and covariance prefixes.
using RoundHook =
    std::function<void(const RoundState&, const BatchDecision&, const RoundContexts&)>;

inline RegretLedger run_trial(const Environment& env, const PolicyConfig& cfg, int processors,
                              std::int64_t rounds, std::uint64_t trial_key,
                              const RoundHook& hook = {}) {
  Policy policy(cfg);
  RoundState state = RoundState::initial(cfg.scales, env.dim(), processors);
  Stream policy_stream{seed_stream(trial_key, "policy")};
  RegretLedger ledger(processors, env.fixed_global());

  std::vector<double> rewards(static_cast<std::size_t>(processors));
  for (std::int64_t t = 1; t <= rounds; ++t) {
    const RoundContexts rc = env.round_contexts(t, processors);
    const BatchDecision decision = policy.select_batch(state, rc, policy_stream);
    if (hook) hook(state, decision, rc);

    Eigen::VectorXd values = env.context_values(rc, 0);
    for (int p = 0; p < processors; ++p) {
      if (!rc.shared_across_processors() && p > 0) values = env.context_values(rc, p);
      const int arm = decision.action_indices[static_cast<std::size_t>(p)];
      const double value = values[arm];
      Stream noise{seed_stream(trial_key, "noise", t, static_cast<std::uint64_t>(p + 1))};
      const double reward = env.reward_from_value(value, noise);
      rewards[static_cast<std::size_t>(p)] = reward;
      ledger.add(t, p + 1, arm, reward, instantaneous_regret(values, arm), value,
                 decision.is_doubling_round, decision.alpha_min);
    }
    state = policy.observe_batch(std::move(state), decision, rewards);
  }
  return ledger;
}

}  // namespace parbandit
