#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "commrl/core.hpp"
#include "commrl/rng.hpp"

namespace commrl {

namespace detail {
inline std::atomic<std::uint64_t>& prob_clamp_counter() {
  static std::atomic<std::uint64_t> count{0};
  return count;
}
}  // namespace detail

/// Number of times a probability below 1e-300 was clamped to zero during normalization.
inline std::uint64_t prob_clamp_events() { return detail::prob_clamp_counter().load(); }

/// Normalizes `p` in place to sum to one. Entries below 1e-300 are clamped to zero first
/// (the clamp is counted, see prob_clamp_events). Throws if the mass is not positive.
inline void normalize(ProbVec& p) {
  double total = 0.0;
  for (double& v : p) {
    require_arg(std::isfinite(v) && v >= 0.0, "probabilities must be finite and non-negative");
    if (v > 0.0 && v < kProbClamp) {
      v = 0.0;
      detail::prob_clamp_counter().fetch_add(1, std::memory_order_relaxed);
    }
    total += v;
  }
  require_arg(total > 0.0, "cannot normalize a zero vector");
  for (double& v : p) v /= total;
}

/// Independent (product) policy: one categorical distribution per agent.
struct ProductPolicy {
  std::vector<ProbVec> agents;

  int n() const { return static_cast<int>(agents.size()); }
  const ProbVec& operator[](int i) const { return agents[static_cast<std::size_t>(i)]; }
  ProbVec& operator[](int i) { return agents[static_cast<std::size_t>(i)]; }

  std::vector<int> action_sizes() const {
    std::vector<int> sizes;
    sizes.reserve(agents.size());
    for (const auto& row : agents) sizes.push_back(static_cast<int>(row.size()));
    return sizes;
  }

  static ProductPolicy uniform(const std::vector<int>& sizes) {
    ProductPolicy pi;
    pi.agents.reserve(sizes.size());
    for (int k : sizes) {
      require_arg(k >= 1, "agent needs at least one action");
      pi.agents.emplace_back(static_cast<std::size_t>(k), 1.0 / static_cast<double>(k));
    }
    return pi;
  }

  void validate(double tol = 1e-9) const {
    require_arg(!agents.empty(), "policy must cover at least one agent");
    for (const auto& row : agents) {
      require_arg(!row.empty(), "agent distribution must be non-empty");
      double total = 0.0;
      for (double v : row) {
        require_arg(std::isfinite(v) && v >= 0.0, "policy entries must be finite and non-negative");
        total += v;
      }
      require_arg(std::abs(total - 1.0) <= tol, "agent distribution must sum to one");
    }
  }
};

/// Max over agents of the L-infinity distance between the per-agent distributions.
inline double linf_distance(const ProductPolicy& a, const ProductPolicy& b) {
  require_arg(a.n() == b.n(), "policy arity mismatch");
  double worst = 0.0;
  for (int i = 0; i < a.n(); ++i) {
    require_arg(a[i].size() == b[i].size(), "action count mismatch");
    for (std::size_t j = 0; j < a[i].size(); ++j) worst = std::max(worst, std::abs(a[i][j] - b[i][j]));
  }
  return worst;
}

/// One multiplicative-weights step: out(a) proportional to p(a) * exp(eta * values(a)).
/// Computed in log space with max subtraction; zero-probability actions stay at zero.
inline ProbVec npg_step(const ProbVec& p, const ProbVec& values, double eta) {
  require_arg(p.size() == values.size(), "value vector arity mismatch");
  require_arg(std::isfinite(eta), "eta must be finite");
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> logw(p.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < p.size(); ++i) {
    require_arg(std::isfinite(values[i]), "values must be finite");
    require_arg(std::isfinite(p[i]) && p[i] >= 0.0, "probabilities must be finite and non-negative");
    if (p[i] > 0.0) {
      logw[i] = std::log(p[i]) + eta * values[i];
      best = std::max(best, logw[i]);
    }
  }
  require_arg(std::isfinite(best), "input distribution has no mass");
  ProbVec out(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (std::isfinite(logw[i])) out[i] = std::exp(logw[i] - best);
  }
  normalize(out);
  return out;
}

/// Applies npg_step to every agent of a product policy.
inline ProductPolicy npg_step(const ProductPolicy& pi, const std::vector<ProbVec>& marginals, double eta) {
  require_arg(static_cast<int>(marginals.size()) == pi.n(), "marginal set arity mismatch");
  ProductPolicy out;
  out.agents.reserve(pi.agents.size());
  for (int i = 0; i < pi.n(); ++i) out.agents.push_back(npg_step(pi[i], marginals[static_cast<std::size_t>(i)], eta));
  return out;
}

/// Predicted policy t_prime steps ahead of `anchor` under frozen marginal values:
/// out(a) proportional to anchor(a) * exp(eta * t_prime * values(a)).
inline ProbVec predict_base_policy(const ProbVec& anchor, const ProbVec& values, double eta, long t_prime) {
  require_arg(t_prime >= 0, "prediction offset must be non-negative");
  return npg_step(anchor, values, eta * static_cast<double>(t_prime));
}

inline ProductPolicy predict_base_policy(const ProductPolicy& anchor, const std::vector<ProbVec>& marginals,
                                         double eta, long t_prime) {
  require_arg(t_prime >= 0, "prediction offset must be non-negative");
  return npg_step(anchor, marginals, eta * static_cast<double>(t_prime));
}

/// Epsilon-flooring: actions whose probability is at most eps/|A| are raised to exactly
/// eps/|A|, the rest are scaled by (1 - eps*|floored|/|A|), and the result is renormalized.
inline ProbVec floor_and_mix(const ProbVec& p, double eps) {
  require_arg(eps > 0.0 && eps < 1.0, "flooring epsilon must lie in (0,1)");
  const std::size_t arity = p.size();
  require_arg(arity >= 1, "distribution must be non-empty");
  double total = 0.0;
  for (double v : p) {
    require_arg(std::isfinite(v) && v >= 0.0, "probabilities must be finite and non-negative");
    total += v;
  }
  require_arg(std::abs(total - 1.0) <= 1e-6, "floor_and_mix expects a normalized distribution");
  const double floor_value = eps / static_cast<double>(arity);
  std::size_t floored = 0;
  for (double v : p) {
    if (v <= floor_value) ++floored;
  }
  const double scale = 1.0 - eps * static_cast<double>(floored) / static_cast<double>(arity);
  ProbVec out(arity);
  for (std::size_t i = 0; i < arity; ++i) out[i] = (p[i] <= floor_value) ? floor_value : scale * p[i];
  normalize(out);
  return out;
}

inline ProductPolicy floor_and_mix(const ProductPolicy& pi, double eps) {
  ProductPolicy out;
  out.agents.reserve(pi.agents.size());
  for (const auto& row : pi.agents) out.agents.push_back(floor_and_mix(row, eps));
  return out;
}

/// Total variation distance between two distributions over the same action set.
inline double tv_distance(const ProbVec& p, const ProbVec& q) {
  require_arg(p.size() == q.size(), "distribution arity mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return 0.5 * acc;
}

/// KL divergence KL(p || q); throws if p puts mass where q has none.
inline double kl_divergence(const ProbVec& p, const ProbVec& q) {
  require_arg(p.size() == q.size(), "distribution arity mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) throw std::domain_error("KL divergence undefined: q lacks support where p has mass");
    acc += p[i] * std::log(p[i] / q[i]);
  }
  return acc;
}

/// Sum over agents of per-agent KL divergences.
inline double product_kl(const ProductPolicy& p, const ProductPolicy& q) {
  require_arg(p.n() == q.n(), "policy arity mismatch");
  double acc = 0.0;
  for (int i = 0; i < p.n(); ++i) acc += kl_divergence(p[i], q[i]);
  return acc;
}

/// Draws one joint action, one categorical draw per agent in agent order.
inline ActionProfile sample_profile(const ProductPolicy& pi, Rng& rng) {
  ActionProfile a(static_cast<std::size_t>(pi.n()));
  for (int i = 0; i < pi.n(); ++i) a[static_cast<std::size_t>(i)] = rng.categorical(pi[i]);
  return a;
}

/// A run of prediction offsets [offset_begin, offset_end] served by one representative policy.
struct BaseEntry {
  long offset_begin = 0;
  long offset_end = 0;  // inclusive
  ProductPolicy policy;
};

/// Merges a sequence of predicted policies (indexed by offset 0..T) into entries. An offset
/// joins the current entry while its policy stays within `tol` (per-agent L-infinity) of the
/// entry's representative, which is the first policy of the run; this keeps every entry's
/// diameter bounded by tol instead of letting small steps chain into a large drift.
inline std::vector<BaseEntry> dedup_policies(const std::vector<ProductPolicy>& seq, double tol) {
  require_arg(tol >= 0.0, "dedup tolerance must be non-negative");
  std::vector<BaseEntry> entries;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    if (!entries.empty() && linf_distance(entries.back().policy, seq[k]) <= tol) {
      entries.back().offset_end = static_cast<long>(k);
    } else {
      entries.push_back(BaseEntry{static_cast<long>(k), static_cast<long>(k), seq[k]});
    }
  }
  return entries;
}

}  // namespace commrl
