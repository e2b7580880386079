#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "commrl/core.hpp"
#include "commrl/game.hpp"
#include "commrl/ledger.hpp"
#include "commrl/metrics.hpp"
#include "commrl/oracle.hpp"
#include "commrl/product_policy.hpp"
#include "commrl/rng.hpp"

namespace commrl {

// ---------------------------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------------------------

/// Communication strategy for the policy-gradient runner.
///  - full_comm: agents share fresh data every episode (upper baseline).
///  - no_is:     data is shared every `interval` episodes and reward estimates are frozen
///               in between (no reweighting).
///  - naive_is:  one shared batch per interval, reweighted towards the current policy by
///               importance sampling against the single anchor batch.
///  - bpp:       base-policy prediction: at each round agents also collect batches under
///               *predicted future* policies, so later episodes reweight against a nearby
///               base instead of a stale anchor.
enum class Strategy { full_comm, no_is, naive_is, bpp };

/// practical: fixed communication interval, fixed number of predicted bases.
/// theory:    data-driven re-communication (drift / horizon conditions), exhaustive base
///            prediction with deduplication, and a hard guard on importance ratios.
enum class PGMode { practical, theory };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::full_comm: return "full-comm";
    case Strategy::no_is: return "no-is";
    case Strategy::naive_is: return "naive-is";
    case Strategy::bpp: return "bpp";
  }
  return "unknown";
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "full-comm" || s == "full_comm") return Strategy::full_comm;
  if (s == "no-is" || s == "no_is") return Strategy::no_is;
  if (s == "naive-is" || s == "naive_is") return Strategy::naive_is;
  if (s == "bpp") return Strategy::bpp;
  throw std::invalid_argument("unknown strategy: " + s);
}

inline std::string to_string(PGMode m) {
  return m == PGMode::practical ? "practical" : "theory";
}

inline PGMode parse_pg_mode(const std::string& s) {
  if (s == "practical") return PGMode::practical;
  if (s == "theory") return PGMode::theory;
  throw std::invalid_argument("unknown mode: " + s);
}

struct PGRunConfig {
  Strategy strategy = Strategy::bpp;
  PGMode mode = PGMode::practical;
  long episodes = 1000;
  /// Learning rate; <= 0 selects the default 1 / (2 n M) with M = max{r_max, phi_max, 1}.
  double eta = 0.0;
  /// Exploration floor used when flooring predicted base policies.
  double epsilon = 0.1;
  /// Communication interval K for the practical interval-based strategies.
  long interval = 100;
  /// Number of predicted base policies per round (practical bpp only).
  int bases = 5;
  /// Samples collected per (agent, action, base) triple at each round.
  int samples_per_probe = 20;
  /// Tolerance for merging near-identical predicted bases (theory mode).
  double dedup_tol = 1e-9;
  /// Diagnostic switch: replace sampled estimates with exact marginal rewards.
  bool exact_marginals = false;
  std::uint64_t seed = 0;
  /// Per-row exact metrics (reward/potential) are computed only when the joint action space
  /// is at most this large; otherwise rows fall back to estimate-based reward.
  std::size_t metrics_eval_cap = 200000;
  /// Hard upper bound on importance ratios enforced in theory mode.
  double ratio_guard = 2.0 * 24154952.7535753;  // 2 * e^17

  double resolved_eta(const PotentialGameModel& game) const {
    if (eta > 0.0) return eta;
    return 1.0 / (2.0 * static_cast<double>(game.n) * game.big_m());
  }

  void validate(const PotentialGameModel& game) const {
    require_arg(episodes >= 1, "episodes must be >= 1");
    require_arg(samples_per_probe >= 1, "samples_per_probe must be >= 1");
    require_arg(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
    if (strategy != Strategy::full_comm && mode == PGMode::practical) {
      require_arg(interval >= 1, "interval must be >= 1");
    }
    if (strategy == Strategy::bpp && mode == PGMode::practical) {
      require_arg(bases >= 1, "bases must be >= 1");
      require_arg(static_cast<long>(bases) <= interval,
                  "bases must not exceed the communication interval");
    }
    if (mode == PGMode::theory) {
      require_arg(strategy == Strategy::bpp, "theory mode requires the bpp strategy");
      require_arg(epsilon * static_cast<double>(game.n) <= 1.0,
                  "theory mode requires epsilon <= 1/n");
      require_arg(game.phi_max > 0.0, "theory mode requires phi_max > 0");
      require_arg(dedup_tol >= 0.0, "dedup_tol must be >= 0");
      require_arg(ratio_guard > 0.0, "ratio_guard must be > 0");
    }
  }
};

// ---------------------------------------------------------------------------------------------
// Sampling and estimation
// ---------------------------------------------------------------------------------------------

/// One recorded probe: the full joint action that was played and the (noisy) reward the
/// probing agent observed.
struct ProbeSample {
  ActionProfile profile;
  double reward = 0.0;
};

/// All samples gathered under one base policy. samples[i][a] holds the probes where agent i
/// pinned action a while everyone else sampled from `base`.
struct BaseDataset {
  ProductPolicy base;
  long offset_begin = 0;  ///< first iterate offset (relative to the round) this base serves
  long offset_end = 0;    ///< last iterate offset served (inclusive)
  std::vector<std::vector<std::vector<ProbeSample>>> samples;

  std::uint64_t sample_count() const {
    std::uint64_t c = 0;
    for (const auto& per_agent : samples)
      for (const auto& per_action : per_agent) c += per_action.size();
    return c;
  }
};

/// Collects `samples_per_probe` probes for every (agent, action) pair under `base`.
/// Consumes RNG draws in a fixed order: agents ascending, actions ascending, then probes.
inline BaseDataset collect_base_dataset(const PotentialGameModel& game,
                                        const ProductPolicy& base, int samples_per_probe,
                                        Rng& rng) {
  require_arg(samples_per_probe >= 1, "samples_per_probe must be >= 1");
  require_arg(static_cast<int>(base.agents.size()) == game.n,
              "base policy does not match the game");
  BaseDataset out;
  out.base = base;
  out.samples.resize(static_cast<std::size_t>(game.n));
  for (int i = 0; i < game.n; ++i) {
    out.samples[static_cast<std::size_t>(i)].resize(
        static_cast<std::size_t>(game.action_sizes[static_cast<std::size_t>(i)]));
    for (int a = 0; a < game.action_sizes[static_cast<std::size_t>(i)]; ++a) {
      auto& bucket = out.samples[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
      bucket.reserve(static_cast<std::size_t>(samples_per_probe));
      for (int k = 0; k < samples_per_probe; ++k) {
        ActionProfile profile(static_cast<std::size_t>(game.n), 0);
        for (int j = 0; j < game.n; ++j) {
          if (j == i) {
            profile[static_cast<std::size_t>(j)] = a;
          } else {
            profile[static_cast<std::size_t>(j)] =
                rng.categorical(base.agents[static_cast<std::size_t>(j)]);
          }
        }
        const double r = sample_reward(game, i, profile, rng);
        bucket.push_back(ProbeSample{std::move(profile), r});
      }
    }
  }
  return out;
}

struct MarginalEstimate {
  std::vector<ProbVec> marginals;  ///< marginals[i][a] = estimated reward of agent i playing a
  double max_ratio = 0.0;          ///< largest importance ratio encountered (1 when on-policy)
};

/// Importance-sampling estimate of every agent's per-action expected reward under `target`,
/// using probes that were collected under `dataset.base`. Ratios are computed in log space;
/// a zero base probability on a stored sample is a contract violation and throws.
inline MarginalEstimate estimate_marginals_is(const BaseDataset& dataset,
                                              const ProductPolicy& target) {
  const int n = static_cast<int>(dataset.samples.size());
  require_arg(static_cast<int>(target.agents.size()) == n,
              "target policy does not match the dataset");
  MarginalEstimate out;
  out.marginals.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& per_action = dataset.samples[static_cast<std::size_t>(i)];
    ProbVec& est = out.marginals[static_cast<std::size_t>(i)];
    est.assign(per_action.size(), 0.0);
    for (std::size_t a = 0; a < per_action.size(); ++a) {
      const auto& bucket = per_action[a];
      require_state(!bucket.empty(), "base dataset has an empty probe bucket");
      double sum = 0.0;
      for (const ProbeSample& s : bucket) {
        double log_ratio = 0.0;
        bool zero_target = false;
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          const int aj = s.profile[static_cast<std::size_t>(j)];
          const double bp = dataset.base.agents[static_cast<std::size_t>(j)]
                                              [static_cast<std::size_t>(aj)];
          require_state(bp > 0.0,
                        "stored sample has zero probability under its base policy");
          const double tp =
              target.agents[static_cast<std::size_t>(j)][static_cast<std::size_t>(aj)];
          if (tp <= 0.0) {
            zero_target = true;
            break;
          }
          log_ratio += std::log(tp) - std::log(bp);
        }
        const double ratio = zero_target ? 0.0 : std::exp(log_ratio);
        require_state(std::isfinite(ratio), "importance ratio overflowed");
        out.max_ratio = std::max(out.max_ratio, ratio);
        sum += s.reward * ratio;
      }
      est[a] = sum / static_cast<double>(bucket.size());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Re-communication conditions (theory mode)
// ---------------------------------------------------------------------------------------------

enum class TriggerReason { none, drift, horizon };

/// Drift threshold: how far any per-action reward estimate must move (relative to the round's
/// anchor) before agents re-communicate, after t_prime elapsed iterations.
inline double drift_threshold(int n, long t_prime, double eps, double phi_max) {
  require_arg(n >= 2, "need at least two agents");
  require_arg(t_prime >= 1, "t_prime must be >= 1");
  require_arg(eps > 0.0 && eps * n <= 1.0, "need 0 < eps <= 1/n");
  require_arg(phi_max > 0.0, "phi_max must be > 0");
  const double log_term = std::log(1.0 / (static_cast<double>(n) * eps));
  if (log_term <= 0.0) return std::numeric_limits<double>::infinity();
  return 16.0 / (static_cast<double>(n - 1) * static_cast<double>(t_prime) * phi_max * log_term);
}

/// Horizon threshold: the number of elapsed iterations after which agents re-communicate
/// unconditionally.
inline double horizon_threshold(int n, double eps, double phi_max) {
  require_arg(n >= 2, "need at least two agents");
  require_arg(eps > 0.0 && eps * n <= 1.0, "need 0 < eps <= 1/n");
  require_arg(phi_max > 0.0, "phi_max must be > 0");
  const double log_term = std::log(1.0 / (static_cast<double>(n) * eps));
  if (log_term <= 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / (std::pow(static_cast<double>(n), 0.25) * std::pow(eps, 0.25) * phi_max *
                log_term);
}

/// Decides whether to start a new communication round. The drift condition is checked first;
/// if it does not fire, the horizon condition is checked.
inline TriggerReason changing_condition(const std::vector<ProbVec>& anchor_marginals,
                                        const std::vector<ProbVec>& latest_marginals,
                                        long t_prime, int n, double eps, double phi_max) {
  require_arg(anchor_marginals.size() == latest_marginals.size(),
              "marginal vectors must match");
  const double drift_cut = drift_threshold(n, t_prime, eps, phi_max);
  double max_drift = 0.0;
  for (std::size_t i = 0; i < anchor_marginals.size(); ++i) {
    require_arg(anchor_marginals[i].size() == latest_marginals[i].size(),
                "marginal vectors must match");
    for (std::size_t a = 0; a < anchor_marginals[i].size(); ++a) {
      max_drift = std::max(max_drift, std::abs(latest_marginals[i][a] - anchor_marginals[i][a]));
    }
  }
  if (max_drift >= drift_cut) return TriggerReason::drift;
  if (static_cast<double>(t_prime) >= horizon_threshold(n, eps, phi_max))
    return TriggerReason::horizon;
  return TriggerReason::none;
}

// ---------------------------------------------------------------------------------------------
// Gap estimation
// ---------------------------------------------------------------------------------------------

/// First-order improvement of the mirror step: sum over agents of
/// <new_policy_i - prev_policy_i, marginals_i>. Small values certify the iterate is nearly
/// stationary under the estimated rewards.
inline double estimate_nash_gap(const std::vector<ProbVec>& marginals,
                                const ProductPolicy& new_policy,
                                const ProductPolicy& prev_policy) {
  require_arg(marginals.size() == new_policy.agents.size() &&
                  marginals.size() == prev_policy.agents.size(),
              "policy/marginal shapes must match");
  double g = 0.0;
  for (std::size_t i = 0; i < marginals.size(); ++i) {
    require_arg(marginals[i].size() == new_policy.agents[i].size() &&
                    marginals[i].size() == prev_policy.agents[i].size(),
                "policy/marginal shapes must match");
    for (std::size_t a = 0; a < marginals[i].size(); ++a) {
      g += (new_policy.agents[i][a] - prev_policy.agents[i][a]) * marginals[i][a];
    }
  }
  return g;
}

// ---------------------------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------------------------

struct PGRunResult {
  std::vector<MetricsRow> rows;  ///< one row per iterate, episodes 0 .. T-1
  long selected_episode = 0;     ///< iterate with the smallest recorded gap estimate
  ProductPolicy final_policy;    ///< the selected iterate
  CommLedger ledger;
  double max_importance_ratio = 0.0;
  std::vector<long> first_round_offsets;  ///< base offsets laid out by the initial round
};

namespace detail {

inline const BaseDataset& base_for_offset(const std::vector<BaseDataset>& bases, long offset) {
  for (const BaseDataset& b : bases) {
    if (offset >= b.offset_begin && offset <= b.offset_end) return b;
  }
  throw std::runtime_error("no base policy covers offset " + std::to_string(offset));
}

}  // namespace detail

/// Runs natural policy gradient on a static potential game under the configured communication
/// strategy. Returns per-episode metrics, the full communication ledger, and the iterate with
/// the best (smallest) gap estimate.
inline PGRunResult run_pg(const PotentialGameModel& game, const PGRunConfig& cfg) {
  game.validate();
  cfg.validate(game);
  const long T = cfg.episodes;
  const int n = game.n;
  const double eta = cfg.resolved_eta(game);
  const bool theory = cfg.mode == PGMode::theory;
  const bool oracle_rows = game.joint_count() <= cfg.metrics_eval_cap;

  Rng rng(cfg.seed);
  PGRunResult res;
  res.rows.reserve(static_cast<std::size_t>(T));

  ProductPolicy pi = ProductPolicy::uniform(game.action_sizes);
  std::vector<ProductPolicy> iterates;
  iterates.reserve(static_cast<std::size_t>(T));
  std::vector<double> gaps;
  gaps.reserve(static_cast<std::size_t>(T));

  long anchor_episode = 0;
  std::vector<BaseDataset> bases;
  std::vector<ProbVec> anchor_marginals;
  std::vector<ProbVec> latest_marginals;

  // Lays out the base policies for a new communication round anchored at iterate `t` (whose
  // policy is `pi`), collects one dataset per base, and refreshes the anchor estimates.
  const auto establish_round = [&](long t) {
    bases.clear();
    anchor_episode = t;
    if (cfg.exact_marginals) {
      anchor_marginals = exact_marginals_all(game, pi);
      latest_marginals = anchor_marginals;
      res.ledger.record_round(t, 0, 0);
      return;
    }
    std::uint64_t collected = 0;

    // Base 0 is the anchor itself: floored for the prediction-based strategies (so later
    // importance ratios stay bounded), raw for the baselines.
    const bool floor_bases = cfg.strategy == Strategy::bpp;
    ProductPolicy base0 = floor_bases ? floor_and_mix(pi, cfg.epsilon) : pi;
    bases.push_back(collect_base_dataset(game, base0, cfg.samples_per_probe, rng));
    bases.back().offset_begin = 0;
    bases.back().offset_end = std::max<long>(T - t, 1);  // provisional; tightened below
    collected += bases.back().sample_count();

    // Anchor estimate: reweight the anchor dataset towards the (unfloored) current policy.
    {
      const MarginalEstimate est = estimate_marginals_is(bases.front(), pi);
      res.max_importance_ratio = std::max(res.max_importance_ratio, est.max_ratio);
      anchor_marginals = est.marginals;
    }

    if (cfg.strategy == Strategy::bpp) {
      if (!theory) {
        // Fixed layout: `bases` policies tile the interval at stride K / B.
        const long stride = std::max<long>(1, cfg.interval / cfg.bases);
        bases.front().offset_end = (cfg.bases == 1) ? cfg.interval - 1 : stride - 1;
        for (int b = 1; b < cfg.bases; ++b) {
          const long off = static_cast<long>(b) * stride;
          ProductPolicy predicted =
              floor_and_mix(predict_base_policy(pi, anchor_marginals, eta, off), cfg.epsilon);
          bases.push_back(collect_base_dataset(game, predicted, cfg.samples_per_probe, rng));
          bases.back().offset_begin = off;
          bases.back().offset_end =
              (b + 1 < cfg.bases) ? static_cast<long>(b + 1) * stride - 1 : cfg.interval - 1;
          collected += bases.back().sample_count();
        }
        // The final base also serves any offsets past the nominal interval (tail intervals
        // at the end of training never reach them, but keep the invariant airtight).
        bases.back().offset_end = std::max(bases.back().offset_end, std::max<long>(T - t, 1));
      } else {
        // Theory layout: predict a floored base for every remaining offset, then merge runs
        // of near-identical predictions so each distinct policy is sampled once.
        const long horizon = T - 1 - t;  // offsets 0 .. horizon are reachable before the end
        std::vector<ProductPolicy> seq;
        seq.reserve(static_cast<std::size_t>(horizon + 1));
        for (long off = 0; off <= horizon; ++off) {
          seq.push_back(
              floor_and_mix(predict_base_policy(pi, anchor_marginals, eta, off), cfg.epsilon));
        }
        const std::vector<BaseEntry> entries = dedup_policies(seq, cfg.dedup_tol);
        // entries[0] is the floored anchor and was already collected as base 0.
        bases.front().offset_begin = entries.front().offset_begin;
        bases.front().offset_end = entries.front().offset_end;
        for (std::size_t e = 1; e < entries.size(); ++e) {
          bases.push_back(
              collect_base_dataset(game, entries[e].policy, cfg.samples_per_probe, rng));
          bases.back().offset_begin = entries[e].offset_begin;
          bases.back().offset_end = entries[e].offset_end;
          collected += bases.back().sample_count();
        }
        bases.back().offset_end = std::max(bases.back().offset_end, std::max<long>(T - t, 1));
      }
    } else {
      // Baselines use the single anchor base for the whole interval.
      bases.front().offset_end = std::max<long>(T - t, 1);
    }

    res.ledger.add_samples(collected);
    res.ledger.record_round(t, static_cast<int>(bases.size()), collected);
    latest_marginals = anchor_marginals;
  };

  establish_round(0);
  for (const BaseDataset& b : bases) res.first_round_offsets.push_back(b.offset_begin);

  for (long t = 1; t <= T; ++t) {
    iterates.push_back(pi);
    const ProductPolicy prev = pi;
    pi = npg_step(pi, latest_marginals, eta);
    const double g = estimate_nash_gap(latest_marginals, pi, prev);
    gaps.push_back(g);

    MetricsRow row;
    row.episode = t - 1;
    if (oracle_rows) {
      const ProbVec vals = exact_expected_rewards(game, prev);
      double mean = 0.0;
      for (double v : vals) mean += v;
      row.reward = mean / static_cast<double>(n);
      if (game.has_potential()) row.potential = exact_potential_value(game, prev);
    } else {
      double mean = 0.0;
      for (int i = 0; i < n; ++i) {
        const auto& p = prev.agents[static_cast<std::size_t>(i)];
        const auto& l = latest_marginals[static_cast<std::size_t>(i)];
        for (std::size_t a = 0; a < p.size(); ++a) mean += p[a] * l[a];
      }
      row.reward = mean / static_cast<double>(n);
    }
    row.gap_estimate = g;
    row.comm_rounds = res.ledger.rounds;
    row.samples = res.ledger.samples;
    res.rows.push_back(std::move(row));

    if (t == T) break;

    // Decide whether iterate t opens a new communication round.
    bool trigger = false;
    if (cfg.strategy == Strategy::full_comm) {
      trigger = true;
    } else if (!theory) {
      trigger = (t - anchor_episode) >= cfg.interval;
    } else {
      trigger = changing_condition(anchor_marginals, latest_marginals, t - anchor_episode, n,
                                   cfg.epsilon, game.phi_max) != TriggerReason::none;
    }
    if (trigger) establish_round(t);

    // Refresh the working estimate for iterate t's policy.
    if (cfg.exact_marginals) {
      latest_marginals = exact_marginals_all(game, pi);
    } else if (cfg.strategy == Strategy::no_is) {
      // Estimates stay frozen at the anchor until the next round.
    } else {
      const BaseDataset& d = detail::base_for_offset(bases, t - anchor_episode);
      const MarginalEstimate est = estimate_marginals_is(d, pi);
      res.max_importance_ratio = std::max(res.max_importance_ratio, est.max_ratio);
      if (theory) {
        require_state(est.max_ratio <= cfg.ratio_guard,
                      "importance ratio exceeded the configured guard");
      }
      latest_marginals = est.marginals;
    }
  }

  std::size_t best = 0;
  for (std::size_t k = 1; k < gaps.size(); ++k) {
    if (gaps[k] < gaps[best]) best = k;
  }
  res.selected_episode = static_cast<long>(best);
  res.final_policy = iterates[best];
  return res;
}

// ---------------------------------------------------------------------------------------------
// Doubling schedule for unknown horizons
// ---------------------------------------------------------------------------------------------

struct PGStageResult {
  int stage = 0;          ///< 1-based stage index
  long start_episode = 0; ///< first global episode of the stage
  long episodes = 0;      ///< episodes actually run (last stage may be truncated)
  double epsilon = 0.0;   ///< exploration floor used in this stage
  PGRunResult result;
};

struct PGUnknownResult {
  std::vector<PGStageResult> stages;
  int output_stage = 0;  ///< 1-based stage whose best iterate is returned
  ProductPolicy final_policy;
  CommLedger ledger;
};

/// Stage length for the doubling schedule: stage i runs n * 2^i episodes.
inline long pg_stage_length(int n, int stage) {
  require_arg(stage >= 1, "stage must be >= 1");
  return static_cast<long>(n) * (1L << stage);
}

/// First global episode of stage i: 2n (2^{i-1} - 1).
inline long pg_stage_start(int n, int stage) {
  require_arg(stage >= 1, "stage must be >= 1");
  return 2L * static_cast<long>(n) * ((1L << (stage - 1)) - 1L);
}

/// Exploration floor for stage i: 1 / (2^{i-1} n).
inline double pg_stage_epsilon(int n, int stage) {
  require_arg(stage >= 1, "stage must be >= 1");
  return 1.0 / (std::pow(2.0, stage - 1) * static_cast<double>(n));
}

/// Stage whose output is returned after `total` episodes: floor(log2(total / 2n)), at least 1.
inline int pg_output_stage(int n, long total) {
  require_arg(total >= 1, "total episodes must be >= 1");
  const double ratio = static_cast<double>(total) / (2.0 * static_cast<double>(n));
  if (ratio < 2.0) return 1;
  return static_cast<int>(std::floor(std::log2(ratio)));
}

/// Runs the doubling schedule: successive theory-mode runs with halving exploration floors,
/// restarting from uniform each stage. `base_cfg` supplies sampling parameters; episodes,
/// epsilon, and mode are overridden per stage.
inline PGUnknownResult pg_unknown(const PotentialGameModel& game, const PGRunConfig& base_cfg,
                                  long total_episodes) {
  game.validate();
  require_arg(total_episodes >= 1, "total episodes must be >= 1");
  const int n = game.n;
  PGUnknownResult out;
  for (int stage = 1;; ++stage) {
    const long start = pg_stage_start(n, stage);
    if (start >= total_episodes) break;
    const long full_len = pg_stage_length(n, stage);
    const long run_len = std::min(full_len, total_episodes - start);

    PGRunConfig cfg = base_cfg;
    cfg.strategy = Strategy::bpp;
    cfg.mode = PGMode::theory;
    cfg.episodes = run_len;
    cfg.epsilon = pg_stage_epsilon(n, stage);
    cfg.seed = derive_seed(base_cfg.seed, "pg-stage", static_cast<std::uint64_t>(stage));

    PGStageResult sr;
    sr.stage = stage;
    sr.start_episode = start;
    sr.episodes = run_len;
    sr.epsilon = cfg.epsilon;
    sr.result = run_pg(game, cfg);
    out.ledger.merge(sr.result.ledger);
    out.stages.push_back(std::move(sr));
  }
  require_state(!out.stages.empty(), "doubling schedule produced no stages");
  const int s = std::min<int>(pg_output_stage(n, total_episodes),
                              static_cast<int>(out.stages.size()));
  out.output_stage = s;
  out.final_policy = out.stages[static_cast<std::size_t>(s - 1)].result.final_policy;
  return out;
}

}  // namespace commrl
