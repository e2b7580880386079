#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace commrl {

/// Joint action: one action index per agent.
using ActionProfile = std::vector<int>;

/// Per-action probability (or value) vector for a single agent.
using ProbVec = std::vector<double>;

inline constexpr double kProbClamp = 1e-300;  // probabilities below this are treated as zero

inline void require_arg(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline void require_state(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

/// Number of joint actions for the given per-agent arities; throws if it would overflow `cap`.
inline std::size_t joint_action_count(const std::vector<int>& action_sizes) {
  require_arg(!action_sizes.empty(), "action_sizes must be non-empty");
  std::size_t total = 1;
  for (int k : action_sizes) {
    require_arg(k >= 1, "every agent needs at least one action");
    require_arg(total <= std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(k),
                "joint action space overflows size_t");
    total *= static_cast<std::size_t>(k);
  }
  return total;
}

/// Row-major flat index of a joint action (agent 0 most significant).
inline std::size_t flat_index(const std::vector<int>& action_sizes, const ActionProfile& a) {
  require_arg(a.size() == action_sizes.size(), "profile arity mismatch");
  std::size_t idx = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    require_arg(a[i] >= 0 && a[i] < action_sizes[i], "action index out of range");
    idx = idx * static_cast<std::size_t>(action_sizes[i]) + static_cast<std::size_t>(a[i]);
  }
  return idx;
}

/// Calls `fn(profile)` for every joint action in row-major order.
template <typename Fn>
inline void for_each_profile(const std::vector<int>& action_sizes, Fn&& fn) {
  ActionProfile a(action_sizes.size(), 0);
  while (true) {
    fn(const_cast<const ActionProfile&>(a));
    int i = static_cast<int>(a.size()) - 1;
    while (i >= 0) {
      if (++a[i] < action_sizes[i]) break;
      a[i] = 0;
      --i;
    }
    if (i < 0) return;
  }
}

}  // namespace commrl
