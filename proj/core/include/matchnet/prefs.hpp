#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "matchnet/rng.hpp"

namespace matchnet {

enum class Side { Worker, Firm };

inline Side opposite(Side side) {
  return side == Side::Worker ? Side::Firm : Side::Worker;
}

struct AgentId {
  Side side = Side::Worker;
  int index = 0;

  auto operator<=>(const AgentId&) const = default;
};

std::string to_string(const AgentId& agent);

/// Marker for the outside option (being unmatched) inside rankings and
/// partner arrays.
inline constexpr int kUnmatched = -1;

/// Strict ranking over the opposite side plus the outside option.
///
/// Partners are 0-based indices of the opposite side; kUnmatched stands for
/// the outside option. Everything ranked after kUnmatched is unacceptable.
class PreferenceOrder {
 public:
  PreferenceOrder() = default;

  /// Throws ValidationError unless `ranking` is a permutation of
  /// {0, ..., size-1} together with exactly one kUnmatched.
  explicit PreferenceOrder(std::vector<int> ranking);

  /// 0, 1, ..., size-1, then the outside option.
  static PreferenceOrder identity(int size);

  std::span<const int> ranking() const { return ranking_; }

  /// Number of agents on the opposite side.
  int size() const { return static_cast<int>(ranking_.size()) - 1; }

  /// 0-based position of `partner` (kUnmatched allowed).
  int rank_of(int partner) const {
    return partner == kUnmatched ? rank_.back() : rank_[partner];
  }

  bool acceptable(int partner) const {
    return rank_of(partner) < rank_.back();
  }

  /// True iff `a` is ranked strictly above `b`. Either may be kUnmatched.
  bool prefers(int a, int b) const { return rank_of(a) < rank_of(b); }

  int num_acceptable() const { return rank_.back(); }

  /// Acceptable partners, most preferred first.
  std::span<const int> acceptable_partners() const {
    return std::span<const int>(ranking_).first(rank_.back());
  }

  bool operator==(const PreferenceOrder& other) const {
    return ranking_ == other.ranking_;
  }

 private:
  std::vector<int> ranking_;
  std::vector<int> rank_;  // rank_[size] holds the position of kUnmatched
};

/// Reported preferences of a whole market with n workers and m firms.
struct PreferenceProfile {
  int n = 0;
  int m = 0;
  std::vector<PreferenceOrder> workers;
  std::vector<PreferenceOrder> firms;

  /// Throws ValidationError on inconsistent sizes.
  void validate() const;

  const PreferenceOrder& order(AgentId agent) const {
    return agent.side == Side::Worker ? workers.at(agent.index)
                                      : firms.at(agent.index);
  }

  /// Copy of this profile with `agent`'s order replaced by `report`.
  PreferenceProfile with_report(AgentId agent, PreferenceOrder report) const;

  bool operator==(const PreferenceProfile&) const = default;
};

/// Evenly spaced utility encoding of a profile.
///
/// p(w, f) is worker w's utility for firm f, q(w, f) is firm f's utility for
/// worker w. Acceptable partners get positive values, unacceptable ones
/// negative, and the outside option is the implicit zero.
struct EncodedProfile {
  Eigen::MatrixXd p;
  Eigen::MatrixXd q;
};

/// Utilities one order assigns to the opposite side: the p row of a worker
/// or the q column of a firm. Entries are multiples of 1/size.
Eigen::VectorXd encode_order(const PreferenceOrder& order);

EncodedProfile encode(const PreferenceProfile& profile);

// --- Sampling --------------------------------------------------------------

enum class Correlation { Uncorrelated, Correlated };

struct DistributionConfig {
  Correlation kind = Correlation::Uncorrelated;
  double p_corr = 0.0;
  double p_trunc = 0.2;
  int n = 4;
  int m = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Uniformly random full order over `size` partners with the outside option
/// last; with probability `p_trunc` the outside option is then moved to a
/// uniformly chosen position in [0, size), keeping the relative order of the
/// partners.
PreferenceOrder sample_order(int size, double p_trunc, CounterRng& rng);

PreferenceProfile sample_profile(const DistributionConfig& cfg,
                                 CounterRng& rng);

/// Profiles `first`, ..., `first + count - 1` of the stream defined by
/// cfg.seed. Profile i always comes from its own split stream, so any slice
/// of the sequence can be regenerated independently.
std::vector<PreferenceProfile> sample_profiles(const DistributionConfig& cfg,
                                               std::size_t count,
                                               std::uint64_t first = 0);

// --- Misreports ------------------------------------------------------------

inline constexpr int kDefaultEnumerationCap = 6;

/// Every strict order over `size` partners plus the outside option, in
/// lexicographic order of the rankings (kUnmatched sorts last). Throws
/// EnumerationOverflow when size + 1 > cap.
std::vector<PreferenceOrder> enumerate_misreports(
    Side side, int size, int cap = kDefaultEnumerationCap);

}  // namespace matchnet
