#pragma once

// Two-state congestion experiment runner. Each episode plays one step of the safe/distancing
// Markov chain; both states keep their own natural-policy-gradient learner and their own
// base datasets, and a communication round refreshes the data for BOTH states at once. The
// four communication strategies mirror the static-game runner (pg_solver.hpp) exactly, just
// duplicated per state.
//
// The congestion structure makes every diagnostic closed-form: an agent choosing facility f
// earns w[f] times the expected number of other agents on f, so marginal rewards, mean
// rewards, and the expected Rosenthal potential are all O(n^2 * facilities) sums. The runner
// uses these instead of the exhaustive oracle (the n=8 joint space has 65,536 profiles and
// the oracle would dominate the runtime).

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "commrl/game.hpp"
#include "commrl/ledger.hpp"
#include "commrl/metrics.hpp"
#include "commrl/pg_solver.hpp"
#include "commrl/product_policy.hpp"
#include "commrl/rng.hpp"

namespace commrl {

// ---------------------------------------------------------------------------------------------
// Closed-form congestion diagnostics
// ---------------------------------------------------------------------------------------------

/// Per-agent per-facility expected reward: ell_i(f) = w[f] * sum_{j != i} pi_j(f).
inline std::vector<ProbVec> congestion_marginals(const CongestionConfig& cfg,
                                                 CongestionState state,
                                                 const ProductPolicy& pi) {
  const std::vector<double> w = cfg.weights(state);
  const int F = cfg.facilities();
  require_arg(static_cast<int>(pi.agents.size()) == cfg.n, "policy has wrong agent count");
  std::vector<double> mass(static_cast<std::size_t>(F), 0.0);
  for (const ProbVec& p : pi.agents) {
    require_arg(static_cast<int>(p.size()) == F, "policy has wrong action count");
    for (int f = 0; f < F; ++f) mass[static_cast<std::size_t>(f)] += p[static_cast<std::size_t>(f)];
  }
  std::vector<ProbVec> out(static_cast<std::size_t>(cfg.n),
                           ProbVec(static_cast<std::size_t>(F), 0.0));
  for (int i = 0; i < cfg.n; ++i) {
    const ProbVec& p = pi.agents[static_cast<std::size_t>(i)];
    for (int f = 0; f < F; ++f) {
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)] =
          w[static_cast<std::size_t>(f)] *
          (mass[static_cast<std::size_t>(f)] - p[static_cast<std::size_t>(f)]);
    }
  }
  return out;
}

/// Mean over agents of each agent's expected reward under `pi` in `state`.
inline double congestion_mean_reward(const CongestionConfig& cfg, CongestionState state,
                                     const ProductPolicy& pi) {
  const std::vector<ProbVec> ell = congestion_marginals(cfg, state, pi);
  double total = 0.0;
  for (int i = 0; i < cfg.n; ++i) {
    const ProbVec& p = pi.agents[static_cast<std::size_t>(i)];
    const ProbVec& l = ell[static_cast<std::size_t>(i)];
    for (std::size_t f = 0; f < p.size(); ++f) total += p[f] * l[f];
  }
  return total / static_cast<double>(cfg.n);
}

/// Expected Rosenthal potential: sum_f w[f] * sum_{i<j} pi_i(f) pi_j(f).
inline double congestion_expected_potential(const CongestionConfig& cfg, CongestionState state,
                                            const ProductPolicy& pi) {
  const std::vector<double> w = cfg.weights(state);
  const int F = cfg.facilities();
  double phi = 0.0;
  for (int f = 0; f < F; ++f) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const ProbVec& p : pi.agents) {
      const double v = p[static_cast<std::size_t>(f)];
      sum += v;
      sum_sq += v * v;
    }
    phi += w[static_cast<std::size_t>(f)] * (sum * sum - sum_sq) / 2.0;
  }
  return phi;
}

// ---------------------------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------------------------

struct MarkovPGConfig {
  Strategy strategy = Strategy::bpp;
  long episodes = 500;
  double eta = 0.0;        ///< <= 0 selects 1 / (2 n M) from the safe-state stage game
  double epsilon = 0.1;    ///< exploration floor applied to predicted base policies
  int interval = 30;       ///< communication interval K
  int bases = 6;           ///< predicted base policies per round (bpp only)
  int samples_per_probe = 4;  ///< samples per (agent, facility, base) triple per state
  NoiseKind noise = NoiseKind::exact;  ///< reward channel used for collected probes
  std::uint64_t seed = 0;

  void validate() const {
    require_arg(episodes >= 1, "episodes must be >= 1");
    require_arg(interval >= 1, "interval must be >= 1");
    require_arg(bases >= 1, "bases must be >= 1");
    require_arg(samples_per_probe >= 1, "samples_per_probe must be >= 1");
    require_arg(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
    if (strategy == Strategy::bpp)
      require_arg(bases <= interval, "cannot lay out more base policies than interval slots");
  }
};

struct MarkovPGResult {
  std::vector<MetricsRow> rows;                  ///< one row per episode
  std::array<ProductPolicy, 2> final_policies;   ///< [safe, distancing] last iterates
  CommLedger ledger;
  std::vector<int> state_trace;                  ///< Markov state per episode (0 = safe)
  double max_importance_ratio = 0.0;
};

/// Runs the two-state congestion experiment under the configured communication strategy.
inline MarkovPGResult run_congestion_pg(const CongestionConfig& cfg, const MarkovPGConfig& run) {
  cfg.validate();
  run.validate();
  const long T = run.episodes;
  std::array<PotentialGameModel, 2> stage = {
      make_congestion_stage_game(cfg, CongestionState::safe),
      make_congestion_stage_game(cfg, CongestionState::distancing)};
  stage[0].noise.kind = run.noise;
  stage[1].noise.kind = run.noise;
  double eta = run.eta;
  if (eta <= 0.0) {
    const double m = std::max({stage[0].r_max, stage[0].phi_max, 1.0});
    eta = 1.0 / (2.0 * static_cast<double>(cfg.n) * m);
  }

  Rng rng(run.seed);
  MarkovPGResult res;
  res.rows.reserve(static_cast<std::size_t>(T));
  res.state_trace.reserve(static_cast<std::size_t>(T));

  struct Lane {
    ProductPolicy pi;
    std::vector<BaseDataset> bases;
    std::vector<ProbVec> anchor_marginals;
    std::vector<ProbVec> latest_marginals;
  };
  std::array<Lane, 2> lanes;
  for (Lane& lane : lanes) lane.pi = ProductPolicy::uniform(stage[0].action_sizes);

  long anchor_episode = 0;

  // Refreshes both lanes' datasets and anchor estimates; one ledger round covers both states.
  const auto establish_round = [&](long t) {
    anchor_episode = t;
    std::uint64_t collected = 0;
    int base_count = 0;
    for (int s = 0; s < 2; ++s) {
      Lane& lane = lanes[static_cast<std::size_t>(s)];
      lane.bases.clear();

      const bool floor_bases = run.strategy == Strategy::bpp;
      ProductPolicy base0 = floor_bases ? floor_and_mix(lane.pi, run.epsilon) : lane.pi;
      lane.bases.push_back(collect_base_dataset(stage[static_cast<std::size_t>(s)], base0,
                                                run.samples_per_probe, rng));
      lane.bases.back().offset_begin = 0;
      lane.bases.back().offset_end = std::max<long>(T - t, 1);
      collected += lane.bases.back().sample_count();

      {
        const MarginalEstimate est = estimate_marginals_is(lane.bases.front(), lane.pi);
        res.max_importance_ratio = std::max(res.max_importance_ratio, est.max_ratio);
        lane.anchor_marginals = est.marginals;
      }

      if (run.strategy == Strategy::bpp) {
        const long stride = std::max<long>(1, run.interval / run.bases);
        lane.bases.front().offset_end = (run.bases == 1) ? run.interval - 1 : stride - 1;
        for (int b = 1; b < run.bases; ++b) {
          const long off = static_cast<long>(b) * stride;
          ProductPolicy predicted = floor_and_mix(
              predict_base_policy(lane.pi, lane.anchor_marginals, eta, off), run.epsilon);
          lane.bases.push_back(collect_base_dataset(stage[static_cast<std::size_t>(s)],
                                                    predicted, run.samples_per_probe, rng));
          lane.bases.back().offset_begin = off;
          lane.bases.back().offset_end =
              (b + 1 < run.bases) ? static_cast<long>(b + 1) * stride - 1 : run.interval - 1;
          collected += lane.bases.back().sample_count();
        }
        lane.bases.back().offset_end =
            std::max(lane.bases.back().offset_end, std::max<long>(T - t, 1));
      }
      base_count += static_cast<int>(lane.bases.size());
      lane.latest_marginals = lane.anchor_marginals;
    }
    res.ledger.add_samples(collected);
    res.ledger.record_round(t, base_count, collected);
  };

  establish_round(0);

  int state = 0;  // the chain starts in the safe state
  for (long t = 1; t <= T; ++t) {
    res.state_trace.push_back(state);
    const std::array<ProductPolicy, 2> prev = {lanes[0].pi, lanes[1].pi};

    double gap = 0.0;
    for (int s = 0; s < 2; ++s) {
      Lane& lane = lanes[static_cast<std::size_t>(s)];
      lane.pi = npg_step(lane.pi, lane.latest_marginals, eta);
      gap += estimate_nash_gap(lane.latest_marginals, lane.pi,
                               prev[static_cast<std::size_t>(s)]);
    }

    MetricsRow row;
    row.episode = t - 1;
    const CongestionState cs = static_cast<CongestionState>(state);
    row.reward = congestion_mean_reward(cfg, cs, prev[static_cast<std::size_t>(state)]);
    row.potential =
        congestion_expected_potential(cfg, cs, prev[static_cast<std::size_t>(state)]);
    row.gap_estimate = gap;
    row.comm_rounds = res.ledger.rounds;
    row.samples = res.ledger.samples;
    res.rows.push_back(std::move(row));

    if (t == T) break;

    // The profile actually played this episode drives the state transition.
    const ActionProfile played =
        sample_profile(prev[static_cast<std::size_t>(state)], rng);
    state = static_cast<int>(congestion_transition(cfg, played, static_cast<CongestionState>(state)));

    const bool trigger = run.strategy == Strategy::full_comm
                             ? true
                             : (t - anchor_episode) >= run.interval;
    if (trigger) establish_round(t);

    for (int s = 0; s < 2; ++s) {
      Lane& lane = lanes[static_cast<std::size_t>(s)];
      if (run.strategy == Strategy::no_is) continue;  // estimates stay frozen
      const BaseDataset& d = detail::base_for_offset(lane.bases, t - anchor_episode);
      const MarginalEstimate est = estimate_marginals_is(d, lane.pi);
      res.max_importance_ratio = std::max(res.max_importance_ratio, est.max_ratio);
      lane.latest_marginals = est.marginals;
    }
  }

  res.final_policies = {lanes[0].pi, lanes[1].pi};
  return res;
}

}  // namespace commrl
