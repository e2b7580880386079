#include <catch2/catch_amalgamated.hpp>

#include <stdexcept>

#include "commrl/markov_pg.hpp"
#include "commrl/oracle.hpp"

using namespace commrl;
using Catch::Approx;

namespace {

CongestionConfig small_congestion() {
  CongestionConfig cfg;
  cfg.n = 3;
  cfg.weights_safe = {0.1, 0.2, 0.3, 0.4};
  cfg.distancing_multiplier = 0.5;
  return cfg;
}

}  // namespace

TEST_CASE("closed-form congestion diagnostics match the exhaustive oracle") {
  const CongestionConfig cfg = small_congestion();
  Rng rng(21);
  for (CongestionState state : {CongestionState::safe, CongestionState::distancing}) {
    const PotentialGameModel game = make_congestion_stage_game(cfg, state);
    for (int trial = 0; trial < 3; ++trial) {
      // A random product policy: floored uniform perturbed through the mirror step.
      ProductPolicy pi = ProductPolicy::uniform(game.action_sizes);
      std::vector<ProbVec> push;
      for (int i = 0; i < cfg.n; ++i) {
        ProbVec v;
        for (int f = 0; f < cfg.facilities(); ++f) v.push_back(rng.next_unit());
        push.push_back(v);
      }
      pi = npg_step(pi, push, 1.7);

      const std::vector<ProbVec> fast = congestion_marginals(cfg, state, pi);
      const std::vector<ProbVec> slow = exact_marginals_all(game, pi);
      REQUIRE(fast.size() == slow.size());
      for (std::size_t i = 0; i < fast.size(); ++i) {
        for (std::size_t f = 0; f < fast[i].size(); ++f) {
          CHECK(fast[i][f] == Approx(slow[i][f]).margin(1e-12));
        }
      }

      const ProbVec agent_values = exact_expected_rewards(game, pi);
      double mean = 0.0;
      for (double v : agent_values) mean += v;
      mean /= static_cast<double>(cfg.n);
      CHECK(congestion_mean_reward(cfg, state, pi) == Approx(mean).margin(1e-12));
      CHECK(congestion_expected_potential(cfg, state, pi) ==
            Approx(exact_potential_value(game, pi)).margin(1e-12));
    }
  }
}

TEST_CASE("uniform-policy congestion diagnostics have hand-computed values") {
  const CongestionConfig cfg = small_congestion();
  const ProductPolicy uniform = ProductPolicy::uniform({4, 4, 4});
  // ell_i(f) = w_f * (n - 1) / F; mean reward = (n-1)/F^2 * sum_f w_f = 2/16.
  CHECK(congestion_mean_reward(cfg, CongestionState::safe, uniform) ==
        Approx(0.125).margin(1e-15));
  CHECK(congestion_mean_reward(cfg, CongestionState::distancing, uniform) ==
        Approx(0.0625).margin(1e-15));
  // phi = sum_f w_f * C(3,2) / 16 = 3/16.
  CHECK(congestion_expected_potential(cfg, CongestionState::safe, uniform) ==
        Approx(0.1875).margin(1e-15));
}

TEST_CASE("markov runner ledger follows the interval arithmetic") {
  const CongestionConfig cfg = small_congestion();
  MarkovPGConfig run;
  run.strategy = Strategy::bpp;
  run.episodes = 95;
  run.interval = 30;
  run.bases = 6;
  run.samples_per_probe = 2;
  run.eta = 0.5;
  run.seed = 3;
  const MarkovPGResult res = run_congestion_pg(cfg, run);
  REQUIRE(res.rows.size() == 95);
  REQUIRE(res.state_trace.size() == 95);
  CHECK(res.state_trace[0] == 0);  // the chain starts safe
  // Rounds at t = 0, 30, 60, 90.
  CHECK(res.ledger.rounds == 4);
  // Per round: 2 states x 6 bases x N x sum |A_i| = 2 * 6 * 2 * 12 = 288 samples.
  CHECK(res.ledger.samples == 4u * 288u);
  CHECK(res.rows[0].comm_rounds == 1);
  CHECK(res.rows.back().comm_rounds == 4);
  // First row reflects the uniform start in the safe state.
  CHECK(res.rows[0].reward == Approx(0.125).margin(1e-12));
  REQUIRE(res.rows[0].potential.has_value());
  CHECK(*res.rows[0].potential == Approx(0.1875).margin(1e-12));

  MarkovPGConfig full = run;
  full.strategy = Strategy::full_comm;
  full.episodes = 12;
  const MarkovPGResult fc = run_congestion_pg(cfg, full);
  CHECK(fc.ledger.rounds == 12);  // initial round + one per subsequent episode
  // Each full-comm round collects one base per state.
  CHECK(fc.ledger.samples == 12u * 2u * 2u * 12u);
}

TEST_CASE("markov runner improves the safe-state reward over the uniform start") {
  const CongestionConfig cfg = small_congestion();
  MarkovPGConfig run;
  run.strategy = Strategy::bpp;
  run.episodes = 150;
  run.interval = 30;
  run.bases = 6;
  run.samples_per_probe = 8;
  run.eta = 1.0;
  run.seed = 11;
  const MarkovPGResult res = run_congestion_pg(cfg, run);
  const double final_safe =
      congestion_mean_reward(cfg, CongestionState::safe, res.final_policies[0]);
  CHECK(final_safe > 0.15);  // uniform start sits at 0.125
  // Cumulative columns are monotone.
  for (std::size_t k = 1; k < res.rows.size(); ++k) {
    CHECK(res.rows[k].comm_rounds >= res.rows[k - 1].comm_rounds);
    CHECK(res.rows[k].samples >= res.rows[k - 1].samples);
  }
}

TEST_CASE("markov runner is deterministic in the seed") {
  const CongestionConfig cfg = small_congestion();
  MarkovPGConfig run;
  run.strategy = Strategy::naive_is;
  run.episodes = 60;
  run.interval = 30;
  run.samples_per_probe = 3;
  run.eta = 0.4;
  run.seed = 5;
  const MarkovPGResult a = run_congestion_pg(cfg, run);
  const MarkovPGResult b = run_congestion_pg(cfg, run);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    CHECK(a.rows[k].reward == b.rows[k].reward);
    CHECK(a.rows[k].gap_estimate == b.rows[k].gap_estimate);
  }
  CHECK(a.state_trace == b.state_trace);
  run.seed = 6;
  const MarkovPGResult c = run_congestion_pg(cfg, run);
  bool any_diff = false;
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    if (a.rows[k].reward != c.rows[k].reward) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("markov runner rejects inconsistent configs") {
  const CongestionConfig cfg = small_congestion();
  MarkovPGConfig run;
  run.strategy = Strategy::bpp;
  run.bases = 40;
  run.interval = 30;
  CHECK_THROWS_AS(run_congestion_pg(cfg, run), std::invalid_argument);
  run.bases = 6;
  run.episodes = 0;
  CHECK_THROWS_AS(run_congestion_pg(cfg, run), std::invalid_argument);
}
