#pragma once

#include <cstdint>
#include <vector>

namespace commrl {

/// One communication round: when it happened, how many base policies were involved, and how
/// many samples the round itself collected.
struct RoundRecord {
  long episode = 0;
  int bases = 0;
  std::uint64_t samples_collected = 0;
};

/// Audit trail of communication cost: every round and every sample is recorded here so tests
/// can reconcile totals against closed-form counts.
struct CommLedger {
  std::uint64_t rounds = 0;
  std::uint64_t samples = 0;
  std::vector<RoundRecord> log;

  void add_samples(std::uint64_t count) { samples += count; }

  void record_round(long episode, int bases, std::uint64_t samples_collected) {
    ++rounds;
    log.push_back(RoundRecord{episode, bases, samples_collected});
  }

  void merge(const CommLedger& other) {
    rounds += other.rounds;
    samples += other.samples;
    log.insert(log.end(), other.log.begin(), other.log.end());
  }
};

}  // namespace commrl
