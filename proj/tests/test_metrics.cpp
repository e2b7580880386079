#include <catch2/catch_amalgamated.hpp>

#include <stdexcept>

#include "commrl/metrics.hpp"

using namespace commrl;
using Catch::Approx;

TEST_CASE("metrics CSV has the fixed schema and supports empty cells") {
  std::vector<MetricsRow> rows(2);
  rows[0].episode = 0;
  rows[0].reward = 0.1;
  rows[0].potential = 1.0 / 3.0;
  rows[0].gap_estimate = 0.25;
  rows[0].comm_rounds = 3;
  rows[0].samples = 100;
  rows[1].episode = 1;
  rows[1].reward = 0.30000000000000004;  // 0.1 + 0.2: trailing noise must not leak
  rows[1].comm_rounds = 3;
  rows[1].samples = 100;

  const std::string text = format_metrics_csv(rows);
  CHECK(text ==
        "episode,reward,potential,gap_estimate,comm_rounds,samples\n"
        "0,0.1,0.333333333333,0.25,3,100\n"
        "1,0.3,,,3,100\n");

  const std::vector<MetricsRow> back = parse_metrics_csv(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].episode == 0);
  CHECK(back[0].reward == Approx(0.1));
  REQUIRE(back[0].potential.has_value());
  CHECK(*back[0].potential == Approx(1.0 / 3.0));
  REQUIRE(back[0].gap_estimate.has_value());
  CHECK(*back[0].gap_estimate == Approx(0.25));
  CHECK(back[0].comm_rounds == 3);
  CHECK(back[0].samples == 100);
  CHECK_FALSE(back[1].potential.has_value());
  CHECK_FALSE(back[1].gap_estimate.has_value());
}

TEST_CASE("metrics CSV parser rejects malformed input") {
  CHECK_THROWS_AS(parse_metrics_csv(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_metrics_csv("episode,reward\n"), std::invalid_argument);
  CHECK_THROWS_AS(
      parse_metrics_csv("episode,reward,potential,gap_estimate,comm_rounds,samples\n1,2,3\n"),
      std::invalid_argument);
}

TEST_CASE("12-significant-digit formatting round-trips cleanly") {
  CHECK(format_sig12(0.1) == "0.1");
  CHECK(format_sig12(1.0) == "1");
  CHECK(format_sig12(-2.5e-7) == "-2.5e-07");
  CHECK(format_sig12(1234567.25) == "1234567.25");
}

TEST_CASE("tail mean reward averages the last window") {
  std::vector<MetricsRow> rows(4);
  for (int k = 0; k < 4; ++k) {
    rows[static_cast<std::size_t>(k)].episode = k;
    rows[static_cast<std::size_t>(k)].reward = static_cast<double>(k);
  }
  CHECK(tail_mean_reward(rows, 2) == Approx(2.5));
  CHECK(tail_mean_reward(rows, 0) == Approx(1.5));   // whole run
  CHECK(tail_mean_reward(rows, 10) == Approx(1.5));  // clamped to the run
  CHECK_THROWS_AS(tail_mean_reward({}, 2), std::invalid_argument);
}
