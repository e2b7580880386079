#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "commrl/core.hpp"
#include "commrl/game.hpp"
#include "commrl/mcg.hpp"
#include "commrl/product_policy.hpp"

namespace commrl {

/// Brute-force evaluators refuse instances whose joint enumeration exceeds this many entries.
inline constexpr std::size_t kDefaultOracleEvalCap = 10'000'000;

namespace detail {

inline void check_policy_shape(const std::vector<int>& action_sizes, const ProductPolicy& pi) {
  require_arg(pi.action_sizes() == action_sizes, "policy shape does not match the game");
}

/// For one joint profile, products of per-agent probabilities excluding each agent in turn.
/// prefix/suffix decomposition avoids dividing by (possibly zero) per-agent probabilities.
struct ExclusiveProducts {
  std::vector<double> prefix;  // prefix[i] = prod_{j < i} pi_j(a_j)
  std::vector<double> suffix;  // suffix[i] = prod_{j >= i} pi_j(a_j)

  explicit ExclusiveProducts(int n)
      : prefix(static_cast<std::size_t>(n) + 1, 1.0), suffix(static_cast<std::size_t>(n) + 1, 1.0) {}

  void load(const ProductPolicy& pi, const ActionProfile& a) {
    const int n = pi.n();
    for (int i = 0; i < n; ++i)
      prefix[static_cast<std::size_t>(i) + 1] =
          prefix[static_cast<std::size_t>(i)] * pi[i][static_cast<std::size_t>(a[static_cast<std::size_t>(i)])];
    for (int i = n - 1; i >= 0; --i)
      suffix[static_cast<std::size_t>(i)] =
          suffix[static_cast<std::size_t>(i) + 1] * pi[i][static_cast<std::size_t>(a[static_cast<std::size_t>(i)])];
  }

  double full() const { return suffix[0]; }
  double excluding(int i) const {
    return prefix[static_cast<std::size_t>(i)] * suffix[static_cast<std::size_t>(i) + 1];
  }
};

}  // namespace detail

/// Exact marginal rewards for every agent and action:
/// out[i][a_i] = E_{a_-i ~ pi_-i}[ r_i(a_i, a_-i) ].
inline std::vector<ProbVec> exact_marginals_all(const PotentialGameModel& game, const ProductPolicy& pi,
                                                std::size_t eval_cap = kDefaultOracleEvalCap) {
  detail::check_policy_shape(game.action_sizes, pi);
  require_arg(game.joint_count() <= eval_cap, "instance exceeds the oracle evaluation cap");
  std::vector<ProbVec> out;
  out.reserve(static_cast<std::size_t>(game.n));
  for (int i = 0; i < game.n; ++i)
    out.emplace_back(static_cast<std::size_t>(game.action_sizes[static_cast<std::size_t>(i)]), 0.0);
  detail::ExclusiveProducts probs(game.n);
  for_each_profile(game.action_sizes, [&](const ActionProfile& a) {
    probs.load(pi, a);
    const std::size_t idx = flat_index(game.action_sizes, a);
    for (int i = 0; i < game.n; ++i) {
      const double w = probs.excluding(i);
      if (w > 0.0)
        out[static_cast<std::size_t>(i)][static_cast<std::size_t>(a[static_cast<std::size_t>(i)])] +=
            w * game.rewards[static_cast<std::size_t>(i)][idx];
    }
  });
  return out;
}

/// Exact marginal rewards for a single agent.
inline ProbVec exact_marginal_reward(const PotentialGameModel& game, int agent, const ProductPolicy& pi,
                                     std::size_t eval_cap = kDefaultOracleEvalCap) {
  require_arg(agent >= 0 && agent < game.n, "agent index out of range");
  return exact_marginals_all(game, pi, eval_cap)[static_cast<std::size_t>(agent)];
}

/// Exact expected reward per agent under the product policy.
inline std::vector<double> exact_expected_rewards(const PotentialGameModel& game, const ProductPolicy& pi,
                                                  std::size_t eval_cap = kDefaultOracleEvalCap) {
  detail::check_policy_shape(game.action_sizes, pi);
  require_arg(game.joint_count() <= eval_cap, "instance exceeds the oracle evaluation cap");
  std::vector<double> out(static_cast<std::size_t>(game.n), 0.0);
  detail::ExclusiveProducts probs(game.n);
  for_each_profile(game.action_sizes, [&](const ActionProfile& a) {
    probs.load(pi, a);
    const double w = probs.full();
    if (w <= 0.0) return;
    const std::size_t idx = flat_index(game.action_sizes, a);
    for (int i = 0; i < game.n; ++i) out[static_cast<std::size_t>(i)] += w * game.rewards[static_cast<std::size_t>(i)][idx];
  });
  return out;
}

/// Exact expected potential under the product policy.
inline double exact_potential_value(const PotentialGameModel& game, const ProductPolicy& pi,
                                    std::size_t eval_cap = kDefaultOracleEvalCap) {
  detail::check_policy_shape(game.action_sizes, pi);
  require_arg(game.has_potential(), "game has no potential table");
  require_arg(game.joint_count() <= eval_cap, "instance exceeds the oracle evaluation cap");
  double value = 0.0;
  detail::ExclusiveProducts probs(game.n);
  for_each_profile(game.action_sizes, [&](const ActionProfile& a) {
    probs.load(pi, a);
    const double w = probs.full();
    if (w > 0.0) value += w * game.potential[flat_index(game.action_sizes, a)];
  });
  return value;
}

/// Exact evaluation of a policy: per-agent values, per-agent best-response values against the
/// others' marginals, and the equilibrium gap max_i (best_response_i - value_i).
struct ValueReport {
  double value = 0.0;                      // mean over agents of per-agent values
  std::vector<double> per_agent_value;     // <pi_i, ell_i>
  std::vector<double> best_response;       // max_a ell_i(a)
  double gap = 0.0;                        // max_i (best_response[i] - per_agent_value[i])
};

inline ValueReport exact_pg_gap(const PotentialGameModel& game, const ProductPolicy& pi,
                                std::size_t eval_cap = kDefaultOracleEvalCap) {
  const std::vector<ProbVec> marginals = exact_marginals_all(game, pi, eval_cap);
  ValueReport report;
  report.per_agent_value.resize(static_cast<std::size_t>(game.n));
  report.best_response.resize(static_cast<std::size_t>(game.n));
  double worst = 0.0;
  for (int i = 0; i < game.n; ++i) {
    const ProbVec& ell = marginals[static_cast<std::size_t>(i)];
    double own = 0.0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < ell.size(); ++a) {
      own += pi[i][a] * ell[a];
      best = std::max(best, ell[a]);
    }
    report.per_agent_value[static_cast<std::size_t>(i)] = own;
    report.best_response[static_cast<std::size_t>(i)] = best;
    report.value += own / static_cast<double>(game.n);
    worst = std::max(worst, best - own);
  }
  report.gap = worst;
  return report;
}

/// Per-agent diagnostics of the gap-estimator analysis at a specific policy: c is the policy
/// mass on the argmax set of the exact marginals, delta the margin between the best and the
/// best non-optimal marginal value (infinity when every action is optimal).
struct GapAssumptionParams {
  double c = 0.0;
  double delta = 0.0;
};

inline std::vector<GapAssumptionParams> assumption_params(const PotentialGameModel& game,
                                                          const ProductPolicy& pi,
                                                          double tie_tol = 1e-12,
                                                          std::size_t eval_cap = kDefaultOracleEvalCap) {
  const std::vector<ProbVec> marginals = exact_marginals_all(game, pi, eval_cap);
  std::vector<GapAssumptionParams> out(static_cast<std::size_t>(game.n));
  for (int i = 0; i < game.n; ++i) {
    const ProbVec& ell = marginals[static_cast<std::size_t>(i)];
    const double best = *std::max_element(ell.begin(), ell.end());
    double mass = 0.0;
    double runner_up = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < ell.size(); ++a) {
      if (ell[a] >= best - tie_tol) {
        mass += pi[i][a];
      } else {
        runner_up = std::max(runner_up, ell[a]);
      }
    }
    out[static_cast<std::size_t>(i)].c = mass;
    out[static_cast<std::size_t>(i)].delta =
        std::isfinite(runner_up) ? best - runner_up : std::numeric_limits<double>::infinity();
  }
  return out;
}

/// Exact state values V_h(s) of a Markov product policy by backward induction.
/// Returned table has horizon+1 rows; the last row is the terminal zero row.
inline std::vector<std::vector<double>> exact_mcg_values(const MCGModel& mcg, const MCGPolicy& pi,
                                                         std::size_t eval_cap = kDefaultOracleEvalCap) {
  pi.validate(mcg);
  require_arg(mcg.joint_count() * static_cast<std::size_t>(mcg.num_states) *
                      static_cast<std::size_t>(mcg.horizon) <=
                  eval_cap,
              "instance exceeds the oracle evaluation cap");
  std::vector<std::vector<double>> v(static_cast<std::size_t>(mcg.horizon) + 1,
                                     std::vector<double>(static_cast<std::size_t>(mcg.num_states), 0.0));
  detail::ExclusiveProducts probs(mcg.n);
  for (int h = mcg.horizon - 1; h >= 0; --h) {
    for (int s = 0; s < mcg.num_states; ++s) {
      const ProductPolicy& joint = pi.at[static_cast<std::size_t>(h)][static_cast<std::size_t>(s)];
      double value = 0.0;
      for_each_profile(mcg.action_sizes, [&](const ActionProfile& a) {
        probs.load(joint, a);
        const double w = probs.full();
        if (w <= 0.0) return;
        const std::size_t idx = flat_index(mcg.action_sizes, a);
        double q = mcg.rewards[static_cast<std::size_t>(h)][static_cast<std::size_t>(s)][idx];
        const auto& row = mcg.transitions[static_cast<std::size_t>(h)][static_cast<std::size_t>(s)][idx];
        for (int s2 = 0; s2 < mcg.num_states; ++s2)
          q += row[static_cast<std::size_t>(s2)] * v[static_cast<std::size_t>(h) + 1][static_cast<std::size_t>(s2)];
        value += w * q;
      });
      v[static_cast<std::size_t>(h)][static_cast<std::size_t>(s)] = value;
    }
  }
  return v;
}

/// Exact value V_1(s1) of a Markov product policy.
inline double exact_mcg_value(const MCGModel& mcg, const MCGPolicy& pi,
                              std::size_t eval_cap = kDefaultOracleEvalCap) {
  return exact_mcg_values(mcg, pi, eval_cap)[0][static_cast<std::size_t>(mcg.initial_state)];
}

/// Value of agent `agent`'s best Markov deviation while everyone else follows pi.
inline double exact_best_response_value(const MCGModel& mcg, const MCGPolicy& pi, int agent,
                                        std::size_t eval_cap = kDefaultOracleEvalCap) {
  pi.validate(mcg);
  require_arg(agent >= 0 && agent < mcg.n, "agent index out of range");
  require_arg(mcg.joint_count() * static_cast<std::size_t>(mcg.num_states) *
                      static_cast<std::size_t>(mcg.horizon) <=
                  eval_cap,
              "instance exceeds the oracle evaluation cap");
  const int own_arity = mcg.action_sizes[static_cast<std::size_t>(agent)];
  std::vector<double> v_next(static_cast<std::size_t>(mcg.num_states), 0.0);
  std::vector<double> v_here(static_cast<std::size_t>(mcg.num_states), 0.0);
  detail::ExclusiveProducts probs(mcg.n);
  for (int h = mcg.horizon - 1; h >= 0; --h) {
    for (int s = 0; s < mcg.num_states; ++s) {
      const ProductPolicy& joint = pi.at[static_cast<std::size_t>(h)][static_cast<std::size_t>(s)];
      std::vector<double> q(static_cast<std::size_t>(own_arity), 0.0);
      for_each_profile(mcg.action_sizes, [&](const ActionProfile& a) {
        probs.load(joint, a);
        const double w = probs.excluding(agent);
        if (w <= 0.0) return;
        const std::size_t idx = flat_index(mcg.action_sizes, a);
        double payoff = mcg.rewards[static_cast<std::size_t>(h)][static_cast<std::size_t>(s)][idx];
        const auto& row = mcg.transitions[static_cast<std::size_t>(h)][static_cast<std::size_t>(s)][idx];
        for (int s2 = 0; s2 < mcg.num_states; ++s2)
          payoff += row[static_cast<std::size_t>(s2)] * v_next[static_cast<std::size_t>(s2)];
        q[static_cast<std::size_t>(a[static_cast<std::size_t>(agent)])] += w * payoff;
      });
      v_here[static_cast<std::size_t>(s)] = *std::max_element(q.begin(), q.end());
    }
    v_next = v_here;
  }
  return v_next[static_cast<std::size_t>(mcg.initial_state)];
}

/// Exact equilibrium gap of a Markov product policy: max_i (best response value - V^pi(s1)).
inline ValueReport exact_mcg_gap(const MCGModel& mcg, const MCGPolicy& pi,
                                 std::size_t eval_cap = kDefaultOracleEvalCap) {
  ValueReport report;
  const double value = exact_mcg_value(mcg, pi, eval_cap);
  report.value = value;
  report.per_agent_value.assign(static_cast<std::size_t>(mcg.n), value);
  report.best_response.resize(static_cast<std::size_t>(mcg.n));
  double worst = 0.0;
  for (int i = 0; i < mcg.n; ++i) {
    const double br = exact_best_response_value(mcg, pi, i, eval_cap);
    report.best_response[static_cast<std::size_t>(i)] = br;
    worst = std::max(worst, br - value);
  }
  report.gap = worst;
  return report;
}

}  // namespace commrl
