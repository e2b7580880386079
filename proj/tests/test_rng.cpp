#include <catch2/catch_amalgamated.hpp>

#include "commrl/rng.hpp"

using namespace commrl;

TEST_CASE("identical seeds reproduce identical streams", "[rng]") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
  Rng c(43);
  bool all_equal = true;
  Rng a2(42);
  for (int i = 0; i < 64; ++i) all_equal = all_equal && (a2.next_u64() == c.next_u64());
  REQUIRE_FALSE(all_equal);
}

TEST_CASE("unit draws live in [0,1) and average near one half", "[rng]") {
  Rng rng(7);
  double total = 0.0;
  constexpr int kDraws = 100000;
  for (int i = 0; i < kDraws; ++i) {
    const double u = rng.next_unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    total += u;
  }
  REQUIRE(total / kDraws == Catch::Approx(0.5).margin(0.01));
}

TEST_CASE("categorical draws follow the weights and skip zero-weight entries", "[rng]") {
  Rng rng(11);
  const ProbVec weights{1.0, 0.0, 3.0};
  int counts[3] = {0, 0, 0};
  constexpr int kDraws = 100000;
  for (int i = 0; i < kDraws; ++i) ++counts[rng.categorical(weights)];
  REQUIRE(counts[1] == 0);
  REQUIRE(static_cast<double>(counts[0]) / kDraws == Catch::Approx(0.25).margin(0.01));
  REQUIRE(static_cast<double>(counts[2]) / kDraws == Catch::Approx(0.75).margin(0.01));

  REQUIRE_THROWS_AS(rng.categorical(ProbVec{0.0, 0.0}), std::invalid_argument);
  REQUIRE_THROWS_AS(rng.categorical(ProbVec{1.0, -0.5}), std::invalid_argument);
}

TEST_CASE("seed derivation is a pure function of (master, tag, index)", "[rng]") {
  REQUIRE(derive_seed(1, "cell", 0) == derive_seed(1, "cell", 0));
  REQUIRE(derive_seed(1, "cell", 0) != derive_seed(1, "cell", 1));
  REQUIRE(derive_seed(1, "cell", 0) != derive_seed(1, "other", 0));
  REQUIRE(derive_seed(1, "cell", 0) != derive_seed(2, "cell", 0));

  Rng parent(99);
  const Rng before = parent.split("child", 3);
  for (int i = 0; i < 10; ++i) parent.next_u64();
  const Rng after = parent.split("child", 3);
  REQUIRE(before.seed() == after.seed());  // splits ignore how much the parent has drawn
}

TEST_CASE("uniform range draws respect bounds", "[rng]") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-2.0, 3.0);
    REQUIRE(v >= -2.0);
    REQUIRE(v < 3.0);
  }
  REQUIRE_THROWS_AS(rng.uniform(1.0, 0.0), std::invalid_argument);
}
