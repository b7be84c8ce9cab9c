#pragma once

#include <map>
#include <string>
#include <vector>

#include "matchnet/mechanisms.hpp"
#include "matchnet/prefs.hpp"

// Brute-force reference implementations. Everything here is written with
// plain loops and shares no code with metrics, so tests can pit the two
// against each other.

namespace matchnet::oracle {

inline constexpr int kMaxMarketSide = 5;

enum class BlockingKind { MutualEnvy, WorkerIRViolation, FirmIRViolation };

std::string to_string(BlockingKind kind);

struct BlockingPair {
  int worker = 0;
  int firm = 0;
  BlockingKind kind = BlockingKind::MutualEnvy;

  bool operator==(const BlockingPair&) const = default;
};

/// Every matching of an n x m market, the empty one included.
/// Throws EnumerationOverflow if n or m exceeds kMaxMarketSide.
std::vector<DeterministicMatching> enumerate_matchings(int n, int m);

/// All pairs that block `matching` under `profile`: unmatched pairs who
/// both prefer each other to their current outcome, and matched pairs where
/// one side finds the other unacceptable.
std::vector<BlockingPair> find_blocking_pairs(const DeterministicMatching& matching,
                                              const PreferenceProfile& profile);

/// Largest first-order stochastic dominance gain per agent, over every
/// permutation of the opposite side and the outside option (orders that
/// differ only after the outside option are all tried) and every acceptable
/// threshold of the true order. Throws EnumerationOverflow if an agent has
/// more than `cap` permutable items.
std::map<AgentId, double> fosd_audit(const Mechanism& mech,
                                     const PreferenceProfile& profile,
                                     int cap = 8);

/// Stable and individually rational matchings, found by filtering
/// enumerate_matchings.
std::vector<DeterministicMatching> exhaustive_stable_set(
    const PreferenceProfile& profile);

}  // namespace matchnet::oracle
