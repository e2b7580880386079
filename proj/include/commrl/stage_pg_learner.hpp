#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "commrl/core.hpp"
#include "commrl/ledger.hpp"
#include "commrl/pg_solver.hpp"
#include "commrl/product_policy.hpp"
#include "commrl/rng.hpp"

namespace commrl {

/// Incremental potential-game learner driven by state visits.
///
/// Each visit to the learner's state consumes one pending probe: a (agent, action) pair that
/// is pinned while every other agent samples from the current policy. Once every pair has
/// been probed `probes_per_estimate` times, the buffered values form an on-policy estimate of
/// the per-action rewards, the policy takes one mirror-ascent step, and one communication
/// round is recorded (agents share the filled batch). Iterations are organized in doubling
/// stages: stage j runs n * 2^j iterations from a fresh uniform policy, and the learner's
/// published output is the best (smallest first-order gap) iterate of the last finished
/// stage.
class StagePgLearner {
 public:
  StagePgLearner(int n, std::vector<int> action_sizes, int probes_per_estimate,
                 double eta_override, double m_stage)
      : n_(n),
        action_sizes_(std::move(action_sizes)),
        probes_per_estimate_(probes_per_estimate),
        eta_override_(eta_override),
        pi_(ProductPolicy::uniform(action_sizes_)) {
    require_arg(n_ >= 2, "learner needs at least two agents");
    require_arg(probes_per_estimate_ >= 1, "probes_per_estimate must be >= 1");
    reset_accumulators();
    refill_queue();
    set_eta(m_stage);
  }

  /// Builds the joint action for the next pending probe. Must be followed by end_visit.
  ActionProfile begin_visit(Rng& rng) {
    require_state(!in_visit_, "begin_visit called twice without end_visit");
    require_state(head_ < queue_.size(), "probe queue unexpectedly empty");
    in_visit_ = true;
    const auto [agent, action] = queue_[head_];
    ActionProfile profile(static_cast<std::size_t>(n_), 0);
    for (int j = 0; j < n_; ++j) {
      profile[static_cast<std::size_t>(j)] =
          (j == agent) ? action : rng.categorical(pi_.agents[static_cast<std::size_t>(j)]);
    }
    return profile;
  }

  /// Records the observed composite reward for the probe issued by begin_visit. When the
  /// batch completes this advances the policy and logs one communication round.
  void end_visit(double value, long episode, double m_stage, CommLedger& ledger) {
    require_state(in_visit_, "end_visit called without begin_visit");
    in_visit_ = false;
    const auto [agent, action] = queue_[head_];
    ++head_;
    acc_sum_[static_cast<std::size_t>(agent)][static_cast<std::size_t>(action)] += value;
    acc_cnt_[static_cast<std::size_t>(agent)][static_cast<std::size_t>(action)] += 1;
    if (head_ == queue_.size()) finish_iteration(episode, m_stage, ledger);
  }

  /// The policy this learner currently publishes for its state.
  const ProductPolicy& output() const { return has_completed_stage_ ? completed_output_ : pi_; }

  const ProductPolicy& working_policy() const { return pi_; }
  int stage() const { return stage_; }
  long iterations_in_stage() const { return iter_in_stage_; }
  long total_iterations() const { return total_iterations_; }
  double eta() const { return eta_; }

  /// Probes consumed per policy iteration.
  std::uint64_t probes_per_iteration() const { return queue_.size(); }

 private:
  void set_eta(double m_stage) {
    if (eta_override_ > 0.0) {
      eta_ = eta_override_;
    } else {
      const double m = std::max(1.0, m_stage);
      eta_ = 1.0 / (2.0 * static_cast<double>(n_) * m);
    }
  }

  void reset_accumulators() {
    acc_sum_.assign(static_cast<std::size_t>(n_), {});
    acc_cnt_.assign(static_cast<std::size_t>(n_), {});
    for (int i = 0; i < n_; ++i) {
      acc_sum_[static_cast<std::size_t>(i)].assign(
          static_cast<std::size_t>(action_sizes_[static_cast<std::size_t>(i)]), 0.0);
      acc_cnt_[static_cast<std::size_t>(i)].assign(
          static_cast<std::size_t>(action_sizes_[static_cast<std::size_t>(i)]), 0);
    }
  }

  void refill_queue() {
    queue_.clear();
    head_ = 0;
    for (int i = 0; i < n_; ++i) {
      for (int a = 0; a < action_sizes_[static_cast<std::size_t>(i)]; ++a) {
        for (int k = 0; k < probes_per_estimate_; ++k) queue_.emplace_back(i, a);
      }
    }
  }

  void finish_iteration(long episode, double m_stage, CommLedger& ledger) {
    std::vector<ProbVec> ell(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) {
      ell[static_cast<std::size_t>(i)].resize(
          static_cast<std::size_t>(action_sizes_[static_cast<std::size_t>(i)]));
      for (int a = 0; a < action_sizes_[static_cast<std::size_t>(i)]; ++a) {
        const long cnt = acc_cnt_[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
        require_state(cnt == probes_per_estimate_, "probe accounting out of sync");
        ell[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] =
            acc_sum_[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] /
            static_cast<double>(cnt);
      }
    }
    const ProductPolicy next = npg_step(pi_, ell, eta_);
    const double g = estimate_nash_gap(ell, next, pi_);
    if (g < stage_best_gap_) {
      stage_best_gap_ = g;
      stage_best_policy_ = pi_;
    }
    pi_ = next;
    ++iter_in_stage_;
    ++total_iterations_;
    ledger.record_round(episode, 1, queue_.size());

    if (iter_in_stage_ >= static_cast<long>(n_) * (1L << stage_)) {
      completed_output_ = stage_best_policy_;
      has_completed_stage_ = true;
      ++stage_;
      iter_in_stage_ = 0;
      pi_ = ProductPolicy::uniform(action_sizes_);
      stage_best_gap_ = std::numeric_limits<double>::infinity();
      set_eta(m_stage);
    }
    reset_accumulators();
    refill_queue();
  }

  int n_;
  std::vector<int> action_sizes_;
  int probes_per_estimate_;
  double eta_override_;
  double eta_ = 0.0;

  ProductPolicy pi_;
  int stage_ = 1;
  long iter_in_stage_ = 0;
  long total_iterations_ = 0;
  double stage_best_gap_ = std::numeric_limits<double>::infinity();
  ProductPolicy stage_best_policy_;
  ProductPolicy completed_output_;
  bool has_completed_stage_ = false;

  std::vector<std::pair<int, int>> queue_;  // pending (agent, action) probes
  std::size_t head_ = 0;
  bool in_visit_ = false;

  std::vector<ProbVec> acc_sum_;
  std::vector<std::vector<long>> acc_cnt_;
};

}  // namespace commrl
