#pragma once

#include <cmath>
#include <vector>

#include "commrl/core.hpp"
#include "commrl/game.hpp"
#include "commrl/product_policy.hpp"
#include "commrl/rng.hpp"

namespace commrl {

/// Finite-horizon Markov cooperative game: common reward r_h(s, a) in [0, 1] and transition
/// kernel P_h(s' | s, a) over a finite state set. Joint actions use the same row-major flat
/// indexing as PotentialGameModel.
struct MCGModel {
  int n = 0;
  int horizon = 0;
  int num_states = 0;
  int initial_state = 0;
  std::vector<int> action_sizes;
  /// rewards[h][s][flat_joint_index]
  std::vector<std::vector<std::vector<double>>> rewards;
  /// transitions[h][s][flat_joint_index][s_next]
  std::vector<std::vector<std::vector<std::vector<double>>>> transitions;

  std::size_t joint_count() const { return joint_action_count(action_sizes); }

  double reward(int h, int s, const ActionProfile& a) const {
    return rewards[static_cast<std::size_t>(h)][static_cast<std::size_t>(s)][flat_index(action_sizes, a)];
  }

  const std::vector<double>& transition_row(int h, int s, const ActionProfile& a) const {
    return transitions[static_cast<std::size_t>(h)][static_cast<std::size_t>(s)][flat_index(action_sizes, a)];
  }

  void validate() const {
    require_arg(n >= 1, "MCG needs at least one agent");
    require_arg(horizon >= 1, "horizon must be at least 1");
    require_arg(num_states >= 1, "need at least one state");
    require_arg(initial_state >= 0 && initial_state < num_states, "initial state out of range");
    require_arg(static_cast<int>(action_sizes.size()) == n, "action_sizes must have one entry per agent");
    const std::size_t joint = joint_count();
    require_arg(static_cast<int>(rewards.size()) == horizon, "rewards must cover every step");
    require_arg(static_cast<int>(transitions.size()) == horizon, "transitions must cover every step");
    for (int h = 0; h < horizon; ++h) {
      const auto& r_h = rewards[static_cast<std::size_t>(h)];
      const auto& p_h = transitions[static_cast<std::size_t>(h)];
      require_arg(static_cast<int>(r_h.size()) == num_states, "rewards must cover every state");
      require_arg(static_cast<int>(p_h.size()) == num_states, "transitions must cover every state");
      for (int s = 0; s < num_states; ++s) {
        require_arg(r_h[static_cast<std::size_t>(s)].size() == joint, "reward table size mismatch");
        for (double v : r_h[static_cast<std::size_t>(s)])
          require_arg(std::isfinite(v) && v >= -1e-12 && v <= 1.0 + 1e-12, "MCG rewards must lie in [0,1]");
        require_arg(p_h[static_cast<std::size_t>(s)].size() == joint, "transition table size mismatch");
        for (const auto& row : p_h[static_cast<std::size_t>(s)]) {
          require_arg(static_cast<int>(row.size()) == num_states, "transition row size mismatch");
          double total = 0.0;
          for (double v : row) {
            require_arg(std::isfinite(v) && v >= 0.0, "transition probabilities must be non-negative");
            total += v;
          }
          require_arg(std::abs(total - 1.0) <= 1e-9, "transition rows must sum to one");
        }
      }
    }
  }
};

/// Assembles an MCG directly from tables, validating shapes and stochasticity.
inline MCGModel make_mcg_from_tables(int n, const std::vector<int>& action_sizes, int horizon,
                                     int num_states, int initial_state,
                                     std::vector<std::vector<std::vector<double>>> rewards,
                                     std::vector<std::vector<std::vector<std::vector<double>>>> transitions) {
  MCGModel mcg;
  mcg.n = n;
  mcg.action_sizes = action_sizes;
  mcg.horizon = horizon;
  mcg.num_states = num_states;
  mcg.initial_state = initial_state;
  mcg.rewards = std::move(rewards);
  mcg.transitions = std::move(transitions);
  mcg.validate();
  return mcg;
}

/// Two-state MCG built from the congestion stage games: the common reward is the mean agent
/// reward normalized by its maximum (w_top * (n-1)), and transitions follow
/// congestion_transition deterministically at every step.
inline MCGModel make_congestion_mcg(const CongestionConfig& cfg, int horizon) {
  cfg.validate();
  require_arg(horizon >= 1, "horizon must be at least 1");
  const PotentialGameModel safe_game = make_congestion_stage_game(cfg, CongestionState::safe);
  const PotentialGameModel dist_game = make_congestion_stage_game(cfg, CongestionState::distancing);
  const double scale = safe_game.r_max;  // w_top * (n - 1), the largest possible stage reward
  MCGModel mcg;
  mcg.n = cfg.n;
  mcg.action_sizes = safe_game.action_sizes;
  mcg.horizon = horizon;
  mcg.num_states = 2;
  mcg.initial_state = static_cast<int>(CongestionState::safe);
  const std::size_t joint = mcg.joint_count();
  std::vector<std::vector<double>> reward_by_state(2, std::vector<double>(joint, 0.0));
  std::vector<std::vector<std::vector<double>>> trans_by_state(
      2, std::vector<std::vector<double>>(joint, std::vector<double>(2, 0.0)));
  for (int s = 0; s < 2; ++s) {
    const PotentialGameModel& stage = (s == 0) ? safe_game : dist_game;
    for_each_profile(mcg.action_sizes, [&](const ActionProfile& a) {
      const std::size_t idx = flat_index(mcg.action_sizes, a);
      double mean = 0.0;
      for (int i = 0; i < cfg.n; ++i) mean += stage.rewards[static_cast<std::size_t>(i)][idx];
      mean /= static_cast<double>(cfg.n);
      reward_by_state[static_cast<std::size_t>(s)][idx] = mean / scale;
      const CongestionState next =
          congestion_transition(cfg, a, static_cast<CongestionState>(s));
      trans_by_state[static_cast<std::size_t>(s)][idx][static_cast<std::size_t>(static_cast<int>(next))] = 1.0;
    });
  }
  mcg.rewards.assign(static_cast<std::size_t>(horizon), reward_by_state);
  mcg.transitions.assign(static_cast<std::size_t>(horizon), trans_by_state);
  mcg.validate();
  return mcg;
}

/// Markov product policy: one ProductPolicy per (step, state).
struct MCGPolicy {
  /// at[h][s] is the joint product policy used at step h in state s.
  std::vector<std::vector<ProductPolicy>> at;

  static MCGPolicy uniform(const MCGModel& mcg) {
    MCGPolicy pi;
    pi.at.assign(static_cast<std::size_t>(mcg.horizon),
                 std::vector<ProductPolicy>(static_cast<std::size_t>(mcg.num_states),
                                            ProductPolicy::uniform(mcg.action_sizes)));
    return pi;
  }

  void validate(const MCGModel& mcg) const {
    require_arg(static_cast<int>(at.size()) == mcg.horizon, "policy must cover every step");
    for (const auto& per_state : at) {
      require_arg(static_cast<int>(per_state.size()) == mcg.num_states, "policy must cover every state");
      for (const auto& pi : per_state) {
        pi.validate();
        require_arg(pi.action_sizes() == mcg.action_sizes, "policy arity mismatch");
      }
    }
  }
};

inline bool mcg_policies_equal(const MCGPolicy& a, const MCGPolicy& b, double tol) {
  if (a.at.size() != b.at.size()) return false;
  for (std::size_t h = 0; h < a.at.size(); ++h) {
    if (a.at[h].size() != b.at[h].size()) return false;
    for (std::size_t s = 0; s < a.at[h].size(); ++s) {
      if (linf_distance(a.at[h][s], b.at[h][s]) > tol) return false;
    }
  }
  return true;
}

/// Draws the next state from the transition row at (h, s, a).
inline int sample_transition(const MCGModel& mcg, int h, int s, const ActionProfile& a, Rng& rng) {
  return rng.categorical(mcg.transition_row(h, s, a));
}

}  // namespace commrl
