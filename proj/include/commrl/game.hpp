#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "commrl/core.hpp"
#include "commrl/rng.hpp"

namespace commrl {

enum class NoiseKind { exact, bernoulli_scaled, custom_bounded };

/// How sampled rewards relate to the true mean reward. The default bernoulli_scaled channel
/// returns r_max with probability r/r_max and 0 otherwise (unbiased, bounded by r_max).
struct NoiseSpec {
  NoiseKind kind = NoiseKind::bernoulli_scaled;
  /// Used only for custom_bounded: must return an unbiased sample in [0, r_max].
  std::function<double(double r, double r_max, Rng&)> custom;
};

/// Finite n-agent game with per-agent reward tables and (optionally) an exact potential table.
/// Tables are flat, row-major over joint actions with agent 0 most significant.
struct PotentialGameModel {
  int n = 0;
  std::vector<int> action_sizes;
  std::vector<std::vector<double>> rewards;  // rewards[agent][flat_joint_index]
  std::vector<double> potential;             // empty when no potential table is known
  double r_max = 1.0;
  double phi_max = 1.0;
  NoiseSpec noise;

  std::size_t joint_count() const { return joint_action_count(action_sizes); }
  bool has_potential() const { return !potential.empty(); }

  /// Step-size scale M = max{r_max, phi_max, 1}; kept at least 1 so eta = 1/(2nM) <= 1/(2n).
  double big_m() const { return std::max({r_max, phi_max, 1.0}); }

  double reward(int agent, const ActionProfile& a) const {
    return rewards[static_cast<std::size_t>(agent)][flat_index(action_sizes, a)];
  }

  double potential_at(const ActionProfile& a) const {
    require_state(has_potential(), "game has no potential table");
    return potential[flat_index(action_sizes, a)];
  }

  void validate() const {
    require_arg(n >= 1, "game needs at least one agent");
    require_arg(static_cast<int>(action_sizes.size()) == n, "action_sizes must have one entry per agent");
    const std::size_t joint = joint_count();
    require_arg(static_cast<int>(rewards.size()) == n, "rewards must have one table per agent");
    require_arg(std::isfinite(r_max) && r_max >= 0.0, "r_max must be finite and non-negative");
    require_arg(std::isfinite(phi_max), "phi_max must be finite");
    for (const auto& table : rewards) {
      require_arg(table.size() == joint, "reward table size mismatch");
      for (double v : table)
        require_arg(std::isfinite(v) && v >= -1e-12 && v <= r_max + 1e-12,
                    "rewards must lie in [0, r_max]");
    }
    if (!potential.empty()) {
      require_arg(potential.size() == joint, "potential table size mismatch");
      for (double v : potential) require_arg(std::isfinite(v), "potential entries must be finite");
    }
    if (noise.kind == NoiseKind::custom_bounded)
      require_arg(static_cast<bool>(noise.custom), "custom noise requires a sampler");
    if (noise.kind == NoiseKind::bernoulli_scaled)
      require_arg(r_max > 0.0, "bernoulli-scaled noise requires r_max > 0");
  }
};

/// Identical-interest game: one shared reward table drawn i.i.d. uniform from [lo, hi].
/// The shared table is also the exact potential.
inline PotentialGameModel make_random_cooperative_game(int n, const std::vector<int>& action_sizes,
                                                       double lo, double hi, std::uint64_t seed) {
  require_arg(n >= 2, "cooperative game needs at least two agents");
  require_arg(static_cast<int>(action_sizes.size()) == n, "action_sizes must have one entry per agent");
  require_arg(std::isfinite(lo) && std::isfinite(hi) && 0.0 <= lo && lo < hi,
              "reward range must satisfy 0 <= lo < hi");
  PotentialGameModel game;
  game.n = n;
  game.action_sizes = action_sizes;
  const std::size_t joint = game.joint_count();
  Rng rng(derive_seed(seed, "random-coop", 0));
  std::vector<double> shared(joint);
  for (double& v : shared) v = rng.uniform(lo, hi);
  game.rewards.assign(static_cast<std::size_t>(n), shared);
  game.potential = shared;
  game.r_max = hi;
  game.phi_max = hi;
  game.validate();
  return game;
}

enum class CongestionState { safe = 0, distancing = 1 };

inline const char* to_string(CongestionState s) {
  return s == CongestionState::safe ? "safe" : "distancing";
}

/// Congestion game over shared facilities: each agent picks a facility and earns
/// w[facility] * (number of OTHER agents on the same facility). In the distancing state all
/// weights are scaled by distancing_multiplier.
struct CongestionConfig {
  int n = 8;
  std::vector<double> weights_safe{0.1, 0.2, 0.3, 0.4};
  double distancing_multiplier = 0.5;

  int facilities() const { return static_cast<int>(weights_safe.size()); }

  void validate() const {
    require_arg(n >= 2, "congestion game needs at least two agents");
    require_arg(weights_safe.size() >= 2, "need at least two facilities");
    for (std::size_t i = 0; i < weights_safe.size(); ++i) {
      require_arg(std::isfinite(weights_safe[i]) && weights_safe[i] > 0.0, "weights must be positive");
      if (i > 0) require_arg(weights_safe[i] > weights_safe[i - 1], "weights must be strictly increasing");
    }
    require_arg(distancing_multiplier > 0.0 && distancing_multiplier <= 1.0,
                "distancing multiplier must lie in (0, 1]");
  }

  std::vector<double> weights(CongestionState s) const {
    std::vector<double> w = weights_safe;
    if (s == CongestionState::distancing)
      for (double& v : w) v *= distancing_multiplier;
    return w;
  }
};

inline std::vector<int> facility_counts(const CongestionConfig& cfg, const ActionProfile& a) {
  std::vector<int> counts(static_cast<std::size_t>(cfg.facilities()), 0);
  for (int ai : a) {
    require_arg(ai >= 0 && ai < cfg.facilities(), "facility index out of range");
    ++counts[static_cast<std::size_t>(ai)];
  }
  return counts;
}

/// Stage game for one congestion state, with the exact Rosenthal potential
/// phi(a) = sum_f w[f] * c_f (c_f - 1) / 2.
inline PotentialGameModel make_congestion_stage_game(const CongestionConfig& cfg, CongestionState state) {
  cfg.validate();
  const std::vector<double> w = cfg.weights(state);
  PotentialGameModel game;
  game.n = cfg.n;
  game.action_sizes.assign(static_cast<std::size_t>(cfg.n), cfg.facilities());
  const std::size_t joint = game.joint_count();
  game.rewards.assign(static_cast<std::size_t>(cfg.n), std::vector<double>(joint, 0.0));
  game.potential.assign(joint, 0.0);
  for_each_profile(game.action_sizes, [&](const ActionProfile& a) {
    const std::size_t idx = flat_index(game.action_sizes, a);
    const std::vector<int> counts = facility_counts(cfg, a);
    for (int i = 0; i < cfg.n; ++i) {
      const int f = a[static_cast<std::size_t>(i)];
      game.rewards[static_cast<std::size_t>(i)][idx] =
          w[static_cast<std::size_t>(f)] * static_cast<double>(counts[static_cast<std::size_t>(f)] - 1);
    }
    double phi = 0.0;
    for (int f = 0; f < cfg.facilities(); ++f) {
      const double c = static_cast<double>(counts[static_cast<std::size_t>(f)]);
      phi += w[static_cast<std::size_t>(f)] * c * (c - 1.0) / 2.0;
    }
    game.potential[idx] = phi;
  });
  const double w_top = w.back();
  game.r_max = w_top * static_cast<double>(cfg.n - 1);
  game.phi_max = w_top * static_cast<double>(cfg.n) * static_cast<double>(cfg.n - 1) / 2.0;
  game.validate();
  return game;
}

/// State transition: a strict majority on one facility moves to distancing; an even spread
/// (max count - min count <= 1) moves to safe; anything else keeps the current state.
inline CongestionState congestion_transition(const CongestionConfig& cfg, const ActionProfile& a,
                                             CongestionState current) {
  const std::vector<int> counts = facility_counts(cfg, a);
  const int max_count = *std::max_element(counts.begin(), counts.end());
  const int min_count = *std::min_element(counts.begin(), counts.end());
  if (2 * max_count > cfg.n) return CongestionState::distancing;
  if (max_count - min_count <= 1) return CongestionState::safe;
  return current;
}

/// One noisy reward draw for `agent` at joint action `a` through the game's noise channel.
inline double sample_reward(const PotentialGameModel& game, int agent, const ActionProfile& a, Rng& rng) {
  const double r = game.reward(agent, a);
  switch (game.noise.kind) {
    case NoiseKind::exact:
      return r;
    case NoiseKind::bernoulli_scaled:
      return rng.next_unit() < r / game.r_max ? game.r_max : 0.0;
    case NoiseKind::custom_bounded: {
      const double v = game.noise.custom(r, game.r_max, rng);
      require_state(std::isfinite(v) && v >= 0.0 && v <= game.r_max, "custom noise sample out of range");
      return v;
    }
  }
  throw std::logic_error("unknown noise kind");
}

struct PotentialCheck {
  double max_violation = 0.0;
  bool ok = false;
};

/// Verifies the exact-potential identity r_i(a_i', a_-i) - r_i(a) = phi(a_i', a_-i) - phi(a)
/// over every agent, profile, and unilateral deviation.
inline PotentialCheck verify_potential(const PotentialGameModel& game, double tol = 1e-9) {
  game.validate();
  require_arg(game.has_potential(), "verify_potential needs a potential table");
  PotentialCheck out;
  for_each_profile(game.action_sizes, [&](const ActionProfile& a) {
    const std::size_t idx = flat_index(game.action_sizes, a);
    const double phi_a = game.potential[idx];
    ActionProfile b = a;
    for (int i = 0; i < game.n; ++i) {
      const int original = a[static_cast<std::size_t>(i)];
      for (int alt = 0; alt < game.action_sizes[static_cast<std::size_t>(i)]; ++alt) {
        if (alt == original) continue;
        b[static_cast<std::size_t>(i)] = alt;
        const std::size_t jdx = flat_index(game.action_sizes, b);
        const double lhs = game.rewards[static_cast<std::size_t>(i)][jdx] -
                           game.rewards[static_cast<std::size_t>(i)][idx];
        const double rhs = game.potential[jdx] - phi_a;
        out.max_violation = std::max(out.max_violation, std::abs(lhs - rhs));
      }
      b[static_cast<std::size_t>(i)] = original;
    }
  });
  out.ok = out.max_violation <= tol;
  return out;
}

}  // namespace commrl
