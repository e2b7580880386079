#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "commrl/core.hpp"

namespace commrl {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// Derives an independent stream seed from (master, tag, index). Counter-based so that
/// adding tags or indices never perturbs the streams of existing cells.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index) {
  std::uint64_t x = detail::splitmix64(master ^ detail::fnv1a(tag));
  return detail::splitmix64(x ^ detail::splitmix64(index));
}

/// Deterministic random source. The engine (mt19937_64) and every distribution used here are
/// pinned bit-for-bit, so identical seeds give identical draws on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(detail::splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    require_arg(lo <= hi && std::isfinite(lo) && std::isfinite(hi), "bad uniform range");
    return lo + (hi - lo) * next_unit();
  }

  bool bernoulli(double p) { return next_unit() < p; }

  /// Categorical draw proportional to `weights` (need not be normalized). Consumes exactly
  /// one uniform regardless of outcome.
  int categorical(const ProbVec& weights) {
    double total = 0.0;
    for (double w : weights) {
      require_arg(w >= 0.0 && std::isfinite(w), "categorical weights must be finite and non-negative");
      total += w;
    }
    require_arg(total > 0.0, "categorical weights sum to zero");
    double u = next_unit() * total;
    double acc = 0.0;
    int last_positive = -1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      acc += weights[i];
      last_positive = static_cast<int>(i);
      if (u < acc) return last_positive;
    }
    return last_positive;  // u landed on the rounding slack past the final cumulative sum
  }

  /// Independent child stream; a function of the parent seed only, not of draws made so far.
  Rng split(std::string_view tag, std::uint64_t index) const { return Rng(derive_seed(seed_, tag, index)); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace commrl
