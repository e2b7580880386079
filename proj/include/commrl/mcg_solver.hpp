#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "commrl/core.hpp"
#include "commrl/ledger.hpp"
#include "commrl/mcg.hpp"
#include "commrl/metrics.hpp"
#include "commrl/pg_solver.hpp"
#include "commrl/product_policy.hpp"
#include "commrl/rng.hpp"
#include "commrl/stage_pg_learner.hpp"

namespace commrl {

// ---------------------------------------------------------------------------------------------
// Exploration mixture
// ---------------------------------------------------------------------------------------------

/// Uniform-over-history exploration policy: a weighted set of full-policy snapshots. One
/// snapshot is drawn per episode and followed for the whole prefix.
struct MixturePolicy {
  std::vector<MCGPolicy> snapshots;
  std::vector<double> weights;

  std::size_t size() const { return snapshots.size(); }

  void validate() const {
    require_arg(!snapshots.empty(), "mixture needs at least one snapshot");
    require_arg(snapshots.size() == weights.size(), "mixture weight arity mismatch");
    double sum = 0.0;
    for (double w : weights) {
      require_arg(w >= 0.0, "mixture weights must be non-negative");
      sum += w;
    }
    require_arg(std::abs(sum - 1.0) <= 1e-9, "mixture weights must sum to 1");
  }

  const MCGPolicy& draw(Rng& rng) const { return snapshots[rng.categorical(weights)]; }
};

// ---------------------------------------------------------------------------------------------
// Trigger schedule
// ---------------------------------------------------------------------------------------------

/// True iff the time since the last policy update is an exact power of two (1, 2, 4, ...).
inline bool is_power_of_two_gap(long t, long i_t) {
  require_arg(t >= i_t, "current episode precedes the last update");
  const long gap = t - i_t;
  return gap >= 1 && (gap & (gap - 1)) == 0;
}

/// True iff some (step, state) visit count has at least doubled since the last update.
/// Conventions: a first visit (now >= 1 vs 0) fires; (0 vs 0) does not.
inline bool trigger_check(const std::vector<long>& counts_now,
                          const std::vector<long>& counts_at_update) {
  require_arg(counts_now.size() == counts_at_update.size(), "count table shapes must match");
  for (std::size_t k = 0; k < counts_now.size(); ++k) {
    require_arg(counts_now[k] >= counts_at_update[k], "visit counts must be monotone");
    if (counts_at_update[k] == 0) {
      if (counts_now[k] >= 1) return true;
    } else if (counts_now[k] >= 2 * counts_at_update[k]) {
      return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------------------------
// Optimism bonus
// ---------------------------------------------------------------------------------------------

struct BonusParams {
  int n = 2;
  int horizon = 1;
  int states = 1;
  int max_actions = 1;
  double c = 1.0;             ///< curvature constant of the gap assumption
  double gap_delta = 1.0;     ///< separation constant of the gap assumption
  double confidence = 0.05;   ///< failure probability delta
  double scale = 1.0;         ///< multiplier on the whole bonus (1 = verbatim constant)
};

/// Exploration bonus G(N, t): decreasing in the visit count N, with a log factor tau floored
/// at 2. The scale knob exists because the verbatim constant dwarfs the value range at desk
/// scale.
inline double bonus_g(long n_visits, long t, const BonusParams& p) {
  require_arg(t >= 1, "bonus time index must be >= 1");
  require_arg(n_visits >= 0, "visit count must be >= 0");
  require_arg(p.confidence > 0.0 && p.confidence < 1.0, "confidence must lie in (0,1)");
  require_arg(p.c > 0.0 && p.gap_delta > 0.0, "bonus constants must be positive");
  require_arg(p.scale >= 0.0, "bonus scale must be >= 0");
  const double tau =
      std::max(2.0, std::log(static_cast<double>(p.states) * static_cast<double>(p.max_actions) *
                             static_cast<double>(t) / p.confidence));
  const double lead = 280.0 * static_cast<double>(p.n) * std::pow(static_cast<double>(p.horizon), 3) *
                      std::pow(1.0 + 1.0 / (p.c * p.gap_delta), 2);
  const double denom = static_cast<double>(n_visits) / std::sqrt(static_cast<double>(t)) + tau / 2.0;
  return p.scale * lead * tau / denom;
}

/// Largest value bonus_g can take for fixed params (attained at N = 0; tau cancels).
inline double bonus_g_max(const BonusParams& p) {
  const double lead = 280.0 * static_cast<double>(p.n) * std::pow(static_cast<double>(p.horizon), 3) *
                      std::pow(1.0 + 1.0 / (p.c * p.gap_delta), 2);
  return p.scale * lead * 2.0;
}

// ---------------------------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------------------------

struct MCGRunConfig {
  long episodes = 256;  ///< number of main on-policy episodes T
  PGMode mode = PGMode::practical;
  /// Bonus multiplier; < 0 picks a mode default (1.0 in theory mode, 1e-3 in practical mode).
  double bonus_scale = -1.0;
  double c = 1.0;          ///< curvature constant fed to the bonus (unknowable a priori)
  double gap_delta = 1.0;  ///< separation constant fed to the bonus
  double delta = 0.05;     ///< confidence parameter for bonuses and final selection
  double selection_epsilon = 0.05;  ///< accuracy target of the final gap estimates
  int probes_per_estimate = 1;      ///< per-(agent, action) samples per learner iteration
  bool deviate_all_steps = false;   ///< deviations play a_i at every step instead of step 1
  double eta = 0.0;                 ///< learner step size; <= 0 selects 1/(2 n M) per stage
  std::uint64_t seed = 0;

  double resolved_bonus_scale() const {
    if (bonus_scale >= 0.0) return bonus_scale;
    return mode == PGMode::theory ? 1.0 : 1e-3;
  }

  void validate() const {
    require_arg(episodes >= 1, "episodes must be >= 1");
    require_arg(delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
    require_arg(selection_epsilon > 0.0, "selection_epsilon must be > 0");
    require_arg(probes_per_estimate >= 1, "probes_per_estimate must be >= 1");
    require_arg(c > 0.0 && gap_delta > 0.0, "assumption constants must be positive");
  }
};

// ---------------------------------------------------------------------------------------------
// Per-state learner bank
// ---------------------------------------------------------------------------------------------

/// Holds one StagePgLearner per (step, state), created lazily on first visit. The bank
/// persists across trigger rounds so learners keep their stage progress.
class PerStateBank {
 public:
  PerStateBank(const MCGModel& mcg, int probes_per_estimate, double eta_override)
      : states_(mcg.num_states),
        action_sizes_(mcg.action_sizes),
        n_(mcg.n),
        probes_(probes_per_estimate),
        eta_override_(eta_override),
        slots_(static_cast<std::size_t>(mcg.horizon) * static_cast<std::size_t>(mcg.num_states)) {}

  StagePgLearner& get_or_create(int h, int s, double m_stage) {
    auto& slot = slots_[index(h, s)];
    if (!slot) {
      slot = std::make_unique<StagePgLearner>(n_, action_sizes_, probes_, eta_override_, m_stage);
    }
    return *slot;
  }

  const StagePgLearner* peek(int h, int s) const { return slots_[index(h, s)].get(); }

 private:
  std::size_t index(int h, int s) const {
    require_arg(h >= 1 && s >= 0 && s < states_, "bank index out of range");
    return static_cast<std::size_t>(h - 1) * static_cast<std::size_t>(states_) +
           static_cast<std::size_t>(s);
  }

  int states_;
  std::vector<int> action_sizes_;
  int n_;
  int probes_;
  double eta_override_;
  std::vector<std::unique_ptr<StagePgLearner>> slots_;
};

// ---------------------------------------------------------------------------------------------
// Subroutines
// ---------------------------------------------------------------------------------------------

namespace detail {

/// Rolls one episode prefix: draws a snapshot from the mixture and follows it for steps
/// 1 .. h-1. Returns the state reached at step h.
inline int roll_exploration_prefix(const MCGModel& mcg, const MixturePolicy& explore, int h,
                                   Rng& rng) {
  int s = mcg.initial_state;
  if (h <= 1) return s;
  const MCGPolicy& snap = explore.draw(rng);
  for (int g = 1; g < h; ++g) {
    const ActionProfile a = sample_profile(
        snap.at[static_cast<std::size_t>(g - 1)][static_cast<std::size_t>(s)], rng);
    s = sample_transition(mcg, g - 1, s, a, rng);
  }
  return s;
}

}  // namespace detail

/// Advances the per-state learners at step h through K visitation-driven interactions and
/// returns each state's published policy (uniform for states never visited). Each interaction
/// is one environment episode prefix; its composite reward is r + V_next(s').
inline std::vector<ProductPolicy> pg_share(const MCGModel& mcg, int h,
                                           const MixturePolicy& explore,
                                           const std::vector<double>& v_next, long k_interactions,
                                           long episode, PerStateBank& bank, Rng& rng,
                                           CommLedger& ledger) {
  require_arg(h >= 1 && h <= mcg.horizon, "step index out of range");
  require_arg(k_interactions >= 1, "interaction budget must be >= 1");
  require_arg(static_cast<int>(v_next.size()) == mcg.num_states, "value table shape mismatch");
  explore.validate();
  double v_next_max = 0.0;
  for (double v : v_next) {
    require_arg(std::isfinite(v) && v >= 0.0, "value table entries must be finite and >= 0");
    v_next_max = std::max(v_next_max, v);
  }
  const double m_stage = 1.0 + v_next_max;

  for (long k = 0; k < k_interactions; ++k) {
    const int s = detail::roll_exploration_prefix(mcg, explore, h, rng);
    StagePgLearner& learner = bank.get_or_create(h, s, m_stage);
    const ActionProfile a = learner.begin_visit(rng);
    const double r = mcg.reward(h - 1, s, a);
    const int s_next = sample_transition(mcg, h - 1, s, a, rng);
    const double value = r + v_next[static_cast<std::size_t>(s_next)];
    require_state(value >= 0.0 && value <= m_stage + 1e-9,
                  "composite reward left the admissible range");
    learner.end_visit(value, episode, m_stage, ledger);
    ledger.add_samples(1);
  }

  std::vector<ProductPolicy> out;
  out.reserve(static_cast<std::size_t>(mcg.num_states));
  for (int s = 0; s < mcg.num_states; ++s) {
    const StagePgLearner* learner = bank.peek(h, s);
    out.push_back(learner ? learner->output() : ProductPolicy::uniform(mcg.action_sizes));
  }
  return out;
}

/// Estimates V_h by rolling the exploration prefix to step h, playing pi_h once, and
/// bootstrapping with v_next. Each state's mean is inflated by an optimism bonus; states
/// never reached contribute bonus only. Records exactly one communication round.
inline std::vector<double> v_approx(const MCGModel& mcg, int h, const MixturePolicy& explore,
                                    const std::vector<ProductPolicy>& pi_h,
                                    const std::vector<double>& v_next, long t,
                                    const BonusParams& bonus, bool clip_to_horizon, long episode,
                                    Rng& rng, CommLedger& ledger) {
  require_arg(h >= 1 && h <= mcg.horizon, "step index out of range");
  require_arg(t >= 1, "episode budget must be >= 1");
  require_arg(static_cast<int>(pi_h.size()) == mcg.num_states, "policy table shape mismatch");
  require_arg(static_cast<int>(v_next.size()) == mcg.num_states, "value table shape mismatch");
  explore.validate();

  std::vector<double> sums(static_cast<std::size_t>(mcg.num_states), 0.0);
  std::vector<long> visits(static_cast<std::size_t>(mcg.num_states), 0);
  for (long e = 0; e < t; ++e) {
    const int s = detail::roll_exploration_prefix(mcg, explore, h, rng);
    const ActionProfile a = sample_profile(pi_h[static_cast<std::size_t>(s)], rng);
    const int s_next = sample_transition(mcg, h - 1, s, a, rng);
    sums[static_cast<std::size_t>(s)] +=
        mcg.reward(h - 1, s, a) + v_next[static_cast<std::size_t>(s_next)];
    visits[static_cast<std::size_t>(s)] += 1;
    ledger.add_samples(1);
  }

  std::vector<double> v(static_cast<std::size_t>(mcg.num_states), 0.0);
  for (int s = 0; s < mcg.num_states; ++s) {
    const long n_s = visits[static_cast<std::size_t>(s)];
    const double mean = n_s > 0 ? sums[static_cast<std::size_t>(s)] / static_cast<double>(n_s) : 0.0;
    double value = mean + 3.0 * bonus_g(n_s, t, bonus);
    if (clip_to_horizon) {
      value = std::min(value, static_cast<double>(mcg.horizon));
      value = std::max(value, 0.0);
    }
    v[static_cast<std::size_t>(s)] = value;
  }
  ledger.record_round(episode, 0, static_cast<std::uint64_t>(t));
  return v;
}

// ---------------------------------------------------------------------------------------------
// Final selection
// ---------------------------------------------------------------------------------------------

struct SelectionResult {
  std::size_t best_index = 0;
  std::vector<double> gaps;           ///< one estimate per candidate
  std::uint64_t episodes_used = 0;
};

namespace detail {

/// One Monte-Carlo episode under `policy`, with an optional unilateral deviation: agent
/// `dev_agent` plays `dev_action` at step 1 (and at every step when all_steps is set).
inline double mcg_episode_return(const MCGModel& mcg, const MCGPolicy& policy, int dev_agent,
                                 int dev_action, bool all_steps, Rng& rng) {
  int s = mcg.initial_state;
  double ret = 0.0;
  for (int h = 1; h <= mcg.horizon; ++h) {
    ActionProfile a = sample_profile(
        policy.at[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(s)], rng);
    if (dev_agent >= 0 && (h == 1 || all_steps)) {
      a[static_cast<std::size_t>(dev_agent)] = dev_action;
    }
    ret += mcg.reward(h - 1, s, a);
    if (h < mcg.horizon) s = sample_transition(mcg, h - 1, s, a, rng);
  }
  return ret;
}

}  // namespace detail

/// Monte-Carlo gap screening: for every candidate policy, estimates its value and the value
/// of each single-agent deviation, scores g = sum_i (max_a dev_value - value), and returns
/// the argmin. Uses ceil(H^2 ln(2/delta) / epsilon^2) episodes per estimate and records one
/// communication round for the whole phase.
inline SelectionResult final_gap_selection(const MCGModel& mcg,
                                           const std::vector<MCGPolicy>& candidates,
                                           double epsilon, double delta, bool deviate_all_steps,
                                           long episode, Rng& rng, CommLedger& ledger) {
  require_arg(!candidates.empty(), "need at least one candidate policy");
  require_arg(epsilon > 0.0, "epsilon must be > 0");
  require_arg(delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
  const double h2 = static_cast<double>(mcg.horizon) * static_cast<double>(mcg.horizon);
  const long per_estimate =
      static_cast<long>(std::ceil(h2 * std::log(2.0 / delta) / (epsilon * epsilon)));

  SelectionResult res;
  res.gaps.reserve(candidates.size());
  for (const MCGPolicy& pi : candidates) {
    double base_value = 0.0;
    for (long e = 0; e < per_estimate; ++e) {
      base_value += detail::mcg_episode_return(mcg, pi, -1, 0, false, rng);
    }
    base_value /= static_cast<double>(per_estimate);
    res.episodes_used += static_cast<std::uint64_t>(per_estimate);

    double g = 0.0;
    for (int i = 0; i < mcg.n; ++i) {
      double best_dev = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mcg.action_sizes[static_cast<std::size_t>(i)]; ++a) {
        double dev_value = 0.0;
        for (long e = 0; e < per_estimate; ++e) {
          dev_value += detail::mcg_episode_return(mcg, pi, i, a, deviate_all_steps, rng);
        }
        dev_value /= static_cast<double>(per_estimate);
        res.episodes_used += static_cast<std::uint64_t>(per_estimate);
        best_dev = std::max(best_dev, dev_value);
      }
      g += best_dev - base_value;
    }
    res.gaps.push_back(g);
  }

  for (std::size_t k = 1; k < res.gaps.size(); ++k) {
    if (res.gaps[k] < res.gaps[res.best_index]) res.best_index = k;
  }
  ledger.add_samples(res.episodes_used);
  ledger.record_round(episode, 0, res.episodes_used);
  return res;
}

// ---------------------------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------------------------

struct MCGRunBreakdown {
  std::uint64_t check_rounds = 0;      ///< visit-count reads at power-of-two gaps
  std::uint64_t learner_rounds = 0;    ///< batches shared by the per-state learners
  std::uint64_t vapprox_rounds = 0;    ///< one per v_approx call
  std::uint64_t selection_rounds = 0;  ///< one for the final screening phase
  long triggers = 0;
};

struct MCGRunResult {
  std::vector<MetricsRow> rows;  ///< one per main episode
  MCGPolicy final_policy;
  double final_gap_estimate = 0.0;
  std::vector<MCGPolicy> candidates;   ///< distinct policies screened at the end
  std::vector<double> candidate_gaps;  ///< their Monte-Carlo gap estimates
  CommLedger ledger;
  MCGRunBreakdown breakdown;
  std::uint64_t total_env_episodes = 0;  ///< main + learner + value + selection episodes
  std::vector<long> trigger_episodes;
};

namespace detail {

inline long ceil_log2(long x) {
  require_arg(x >= 1, "ceil_log2 domain");
  long k = 0;
  long p = 1;
  while (p < x) {
    p <<= 1;
    ++k;
  }
  return k;
}

}  // namespace detail

/// Runs the full episodic pipeline: on-policy play with doubling-visit-count triggers, a
/// backward learner/value pass on each trigger, and Monte-Carlo gap screening over all
/// distinct policies at the end.
inline MCGRunResult run_mcg(const MCGModel& mcg, const MCGRunConfig& cfg) {
  mcg.validate();
  cfg.validate();
  const long T = cfg.episodes;
  const int H = mcg.horizon;
  const int S = mcg.num_states;

  BonusParams bonus;
  bonus.n = mcg.n;
  bonus.horizon = H;
  bonus.states = S;
  bonus.max_actions = *std::max_element(mcg.action_sizes.begin(), mcg.action_sizes.end());
  bonus.c = cfg.c;
  bonus.gap_delta = cfg.gap_delta;
  bonus.confidence = cfg.delta;
  bonus.scale = cfg.resolved_bonus_scale();
  const bool clip = cfg.mode == PGMode::practical;

  Rng rng(cfg.seed);
  MCGRunResult res;
  res.rows.reserve(static_cast<std::size_t>(T));

  MCGPolicy pi = MCGPolicy::uniform(mcg);
  std::vector<std::pair<MCGPolicy, long>> history;  // (policy, episodes played with it)
  history.emplace_back(pi, 0);

  // v[h] for h in 1..H+1; v[H+1] stays identically zero.
  std::vector<std::vector<double>> v(static_cast<std::size_t>(H) + 2,
                                     std::vector<double>(static_cast<std::size_t>(S), 0.0));

  PerStateBank bank(mcg, cfg.probes_per_estimate, cfg.eta);

  std::vector<long> counts_now(static_cast<std::size_t>(H) * static_cast<std::size_t>(S), 0);
  std::vector<long> counts_at_update = counts_now;
  long last_update = 1;  // I_t; the snapshot is taken right after episode 1

  const auto flat = [S](int h, int s) {
    return static_cast<std::size_t>(h - 1) * static_cast<std::size_t>(S) +
           static_cast<std::size_t>(s);
  };

  for (long t = 1; t <= T; ++t) {
    // Play one main episode with the current policy.
    history.back().second += 1;
    int s = mcg.initial_state;
    double ep_return = 0.0;
    for (int h = 1; h <= H; ++h) {
      counts_now[flat(h, s)] += 1;
      const ActionProfile a = sample_profile(
          pi.at[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(s)], rng);
      ep_return += mcg.reward(h - 1, s, a);
      if (h < H) s = sample_transition(mcg, h - 1, s, a, rng);
    }
    res.total_env_episodes += 1;

    if (t == last_update) counts_at_update = counts_now;

    if (t > last_update && is_power_of_two_gap(t, last_update)) {
      // One communication round to pool the visit counts.
      res.breakdown.check_rounds += 1;
      res.ledger.record_round(t, 0, 0);

      if (trigger_check(counts_now, counts_at_update)) {
        res.breakdown.triggers += 1;
        res.trigger_episodes.push_back(t);

        // Exploration mixture: uniform over the episodes played so far.
        MixturePolicy explore;
        for (const auto& [snap, cnt] : history) {
          if (cnt == 0) continue;
          explore.snapshots.push_back(snap);
          explore.weights.push_back(static_cast<double>(cnt) / static_cast<double>(t));
        }
        explore.validate();

        // Backward pass: learners first, then the optimistic value refresh.
        MCGPolicy next = pi;
        const long k_budget = static_cast<long>(std::floor(std::sqrt(static_cast<double>(t)))) + 1;
        for (int h = H; h >= 1; --h) {
          const std::uint64_t rounds_before = res.ledger.rounds;
          const std::vector<ProductPolicy> pi_h =
              pg_share(mcg, h, explore, v[static_cast<std::size_t>(h) + 1], k_budget, t, bank,
                       rng, res.ledger);
          res.breakdown.learner_rounds += res.ledger.rounds - rounds_before;
          res.total_env_episodes += static_cast<std::uint64_t>(k_budget);

          v[static_cast<std::size_t>(h)] =
              v_approx(mcg, h, explore, pi_h, v[static_cast<std::size_t>(h) + 1],
                       t, bonus, clip, t, rng, res.ledger);
          res.breakdown.vapprox_rounds += 1;
          res.total_env_episodes += static_cast<std::uint64_t>(t);

          next.at[static_cast<std::size_t>(h - 1)] = pi_h;
          if (!clip) {
            // Optimistic values stay within the computable upper envelope.
            const double cap = static_cast<double>(H - h + 1) * (1.0 + 3.0 * bonus_g_max(bonus));
            for (double val : v[static_cast<std::size_t>(h)]) {
              require_state(val <= cap + 1e-6, "optimistic value exceeded its envelope");
            }
          }
        }

        pi = next;
        history.emplace_back(pi, 0);
        last_update = t;
        counts_at_update = counts_now;
      }
    }

    MetricsRow row;
    row.episode = t - 1;
    row.reward = ep_return;
    row.comm_rounds = res.ledger.rounds;
    row.samples = res.ledger.samples;
    res.rows.push_back(std::move(row));
  }

  require_state(res.breakdown.triggers <=
                    static_cast<long>(S) * static_cast<long>(H) * (detail::ceil_log2(T) + 1),
                "trigger count exceeded its doubling bound");

  // Distinct policies played during the run (exact-duplicate merge).
  for (const auto& [snap, cnt] : history) {
    bool duplicate = false;
    for (const MCGPolicy& seen : res.candidates) {
      if (mcg_policies_equal(snap, seen, 0.0)) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) res.candidates.push_back(snap);
  }

  const SelectionResult sel =
      final_gap_selection(mcg, res.candidates, cfg.selection_epsilon, cfg.delta,
                          cfg.deviate_all_steps, T, rng, res.ledger);
  res.breakdown.selection_rounds = 1;
  res.total_env_episodes += sel.episodes_used;
  res.candidate_gaps = sel.gaps;
  res.final_policy = res.candidates[sel.best_index];
  res.final_gap_estimate = sel.gaps[sel.best_index];

  require_state(res.ledger.rounds == res.breakdown.check_rounds + res.breakdown.learner_rounds +
                                         res.breakdown.vapprox_rounds +
                                         res.breakdown.selection_rounds,
                "ledger round decomposition out of balance");
  return res;
}

}  // namespace commrl
