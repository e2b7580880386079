#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "commrl/game.hpp"
#include "commrl/mcg.hpp"

using namespace commrl;

TEST_CASE("random cooperative games share one reward table that is also the potential", "[game-models]") {
  const PotentialGameModel game = make_random_cooperative_game(3, {4, 5, 6}, 0.0, 0.2, 99);
  REQUIRE(game.joint_count() == 120);
  REQUIRE(game.rewards.size() == 3);
  for (double v : game.rewards[0]) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 0.2);
  }
  REQUIRE(game.rewards[1] == game.rewards[0]);
  REQUIRE(game.rewards[2] == game.rewards[0]);
  REQUIRE(game.potential == game.rewards[0]);
  REQUIRE(game.big_m() == 1.0);  // max{0.2, 0.2} is clamped up to 1

  const PotentialCheck check = verify_potential(game);
  REQUIRE(check.ok);
  REQUIRE(check.max_violation == 0.0);

  const PotentialGameModel same = make_random_cooperative_game(3, {4, 5, 6}, 0.0, 0.2, 99);
  REQUIRE(same.rewards[0] == game.rewards[0]);
  const PotentialGameModel other = make_random_cooperative_game(3, {4, 5, 6}, 0.0, 0.2, 100);
  REQUIRE(other.rewards[0] != game.rewards[0]);

  REQUIRE_THROWS_AS(make_random_cooperative_game(1, {4}, 0.0, 0.2, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(make_random_cooperative_game(2, {4, 4}, 0.3, 0.2, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(make_random_cooperative_game(2, {4, 4}, -0.1, 0.2, 1), std::invalid_argument);
}

TEST_CASE("congestion stage games pay each agent per same-facility neighbor", "[game-models]") {
  CongestionConfig cfg;  // defaults: n=8, weights (0.1, 0.2, 0.3, 0.4)
  const PotentialGameModel safe = make_congestion_stage_game(cfg, CongestionState::safe);
  const ActionProfile five_on_a{0, 0, 0, 0, 0, 1, 2, 3};
  REQUIRE(safe.reward(0, five_on_a) == Catch::Approx(0.4));   // 0.1 * 4 neighbors
  REQUIRE(safe.reward(5, five_on_a) == Catch::Approx(0.0));   // alone on B
  REQUIRE(safe.potential_at(five_on_a) == Catch::Approx(1.0));  // 0.1 * 5*4/2
  REQUIRE(safe.r_max == Catch::Approx(2.8));
  REQUIRE(safe.phi_max == Catch::Approx(11.2));

  const PotentialGameModel distancing = make_congestion_stage_game(cfg, CongestionState::distancing);
  REQUIRE(distancing.reward(0, five_on_a) == Catch::Approx(0.2));  // weights halved
  REQUIRE(distancing.potential_at(five_on_a) == Catch::Approx(0.5));

  CongestionConfig pair;
  pair.n = 2;
  pair.weights_safe = {0.1, 0.2};
  const PotentialGameModel duo = make_congestion_stage_game(pair, CongestionState::safe);
  REQUIRE(duo.reward(0, ActionProfile{0, 1}) == 0.0);  // different facilities pay nothing
  REQUIRE(duo.reward(0, ActionProfile{1, 1}) == Catch::Approx(0.2));

  CongestionConfig bad = cfg;
  bad.weights_safe = {0.1, 0.1, 0.3, 0.4};
  REQUIRE_THROWS_AS(make_congestion_stage_game(bad, CongestionState::safe), std::invalid_argument);
  bad = cfg;
  bad.distancing_multiplier = 0.0;
  REQUIRE_THROWS_AS(make_congestion_stage_game(bad, CongestionState::safe), std::invalid_argument);
}

TEST_CASE("congestion stage games admit the facility-count potential exactly", "[game-models]") {
  CongestionConfig cfg;
  cfg.n = 4;  // 256 joint actions, quick exhaustive check
  for (CongestionState s : {CongestionState::safe, CongestionState::distancing}) {
    const PotentialGameModel game = make_congestion_stage_game(cfg, s);
    const PotentialCheck check = verify_potential(game, 1e-9);
    REQUIRE(check.ok);
  }
}

TEST_CASE("perturbing one potential entry is detected", "[game-models]") {
  CongestionConfig cfg;
  cfg.n = 4;
  PotentialGameModel game = make_congestion_stage_game(cfg, CongestionState::safe);
  game.potential[0] += 0.1;
  const PotentialCheck check = verify_potential(game, 1e-9);
  REQUIRE_FALSE(check.ok);
  REQUIRE(check.max_violation >= 0.1 - 1e-9);
}

TEST_CASE("state transitions follow majority and even-spread rules", "[game-models]") {
  CongestionConfig cfg;  // n = 8
  const ActionProfile majority{0, 0, 0, 0, 0, 1, 2, 3};
  REQUIRE(congestion_transition(cfg, majority, CongestionState::safe) == CongestionState::distancing);
  REQUIRE(congestion_transition(cfg, majority, CongestionState::distancing) == CongestionState::distancing);

  const ActionProfile even{0, 0, 1, 1, 2, 2, 3, 3};
  REQUIRE(congestion_transition(cfg, even, CongestionState::distancing) == CongestionState::safe);

  const ActionProfile split{0, 0, 0, 0, 1, 1, 1, 1};  // counts (4,4,0,0): no majority, not even
  REQUIRE(congestion_transition(cfg, split, CongestionState::safe) == CongestionState::safe);
  REQUIRE(congestion_transition(cfg, split, CongestionState::distancing) == CongestionState::distancing);
}

TEST_CASE("reward sampling is unbiased through each noise channel", "[game-models]") {
  PotentialGameModel game;
  game.n = 2;
  game.action_sizes = {1, 1};
  game.rewards = {{0.1}, {0.13}};
  game.r_max = 0.2;
  game.phi_max = 0.2;

  SECTION("exact noise returns the table value") {
    game.noise.kind = NoiseKind::exact;
    Rng rng(1);
    REQUIRE(sample_reward(game, 1, ActionProfile{0, 0}, rng) == 0.13);
  }
  SECTION("bernoulli-scaled noise takes values in {0, r_max} with the right mean") {
    game.noise.kind = NoiseKind::bernoulli_scaled;
    Rng rng(2);
    double total = 0.0;
    constexpr int kDraws = 1000000;
    for (int i = 0; i < kDraws; ++i) {
      const double r = sample_reward(game, 0, ActionProfile{0, 0}, rng);
      REQUIRE((r == 0.0 || r == 0.2));
      total += r;
    }
    REQUIRE(total / kDraws == Catch::Approx(0.1).margin(0.001));
  }
  SECTION("zero mean reward never pays out") {
    game.rewards[0][0] = 0.0;
    game.noise.kind = NoiseKind::bernoulli_scaled;
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) REQUIRE(sample_reward(game, 0, ActionProfile{0, 0}, rng) == 0.0);
  }
  SECTION("custom noise passes through and is range-checked") {
    game.noise.kind = NoiseKind::custom_bounded;
    game.noise.custom = [](double r, double, Rng&) { return r; };
    Rng rng(4);
    REQUIRE(sample_reward(game, 0, ActionProfile{0, 0}, rng) == 0.1);
    game.noise.custom = [](double, double r_max, Rng&) { return r_max + 1.0; };
    REQUIRE_THROWS_AS(sample_reward(game, 0, ActionProfile{0, 0}, rng), std::runtime_error);
  }
}

TEST_CASE("model validation rejects malformed tables", "[game-models]") {
  PotentialGameModel game;
  game.n = 2;
  game.action_sizes = {2, 2};
  game.rewards = {{0.1, 0.2, 0.3, 0.4}, {0.1, 0.2, 0.3, 0.4}};
  game.r_max = 0.4;
  game.phi_max = 0.4;
  game.noise.kind = NoiseKind::exact;
  REQUIRE_NOTHROW(game.validate());

  PotentialGameModel bad = game;
  bad.rewards[0][2] = 0.5;  // above r_max
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = game;
  bad.rewards[1].pop_back();
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = game;
  bad.potential = {0.0, 0.0};  // wrong joint size
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("congestion MCG normalizes the mean stage reward and moves deterministically", "[game-models]") {
  CongestionConfig cfg;
  cfg.n = 4;
  const MCGModel mcg = make_congestion_mcg(cfg, 3);
  REQUIRE_NOTHROW(mcg.validate());
  REQUIRE(mcg.num_states == 2);
  REQUIRE(mcg.initial_state == 0);
  REQUIRE(mcg.horizon == 3);

  const ActionProfile all_top{3, 3, 3, 3};
  REQUIRE(mcg.reward(0, 0, all_top) == Catch::Approx(1.0));  // mean 1.2 over scale 1.2
  const auto& row = mcg.transition_row(1, 0, all_top);
  REQUIRE(row[0] == 0.0);
  REQUIRE(row[1] == 1.0);  // strict majority moves to distancing

  const ActionProfile spread{0, 1, 2, 3};
  REQUIRE(mcg.transition_row(0, 1, spread)[0] == 1.0);  // even spread returns to safe

  Rng rng(5);
  REQUIRE(sample_transition(mcg, 0, 0, all_top, rng) == 1);
}

TEST_CASE("table-built MCGs are validated for stochasticity", "[game-models]") {
  std::vector<std::vector<std::vector<double>>> rewards{{{0.5, 0.5, 0.5, 0.5}}};
  std::vector<std::vector<std::vector<std::vector<double>>>> transitions{
      {{{1.0}, {1.0}, {1.0}, {1.0}}}};
  REQUIRE_NOTHROW(make_mcg_from_tables(2, {2, 2}, 1, 1, 0, rewards, transitions));

  auto bad_transitions = transitions;
  bad_transitions[0][0][2] = {0.9};  // row sums to 0.9
  REQUIRE_THROWS_AS(make_mcg_from_tables(2, {2, 2}, 1, 1, 0, rewards, bad_transitions),
                    std::invalid_argument);

  auto bad_rewards = rewards;
  bad_rewards[0][0][1] = 1.5;  // outside [0, 1]
  REQUIRE_THROWS_AS(make_mcg_from_tables(2, {2, 2}, 1, 1, 0, bad_rewards, transitions),
                    std::invalid_argument);
}
