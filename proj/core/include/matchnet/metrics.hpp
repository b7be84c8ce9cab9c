#pragma once

#include <span>
#include <string>
#include <vector>

#include "matchnet/mechanisms.hpp"
#include "matchnet/prefs.hpp"

namespace matchnet {

// All metrics take the encoding of the true profile. Dimensions of r and enc
// must agree; mismatches raise ValidationError.

/// Product of firm f's envy mass towards w and worker w's envy mass towards
/// f under r. Zero iff (w, f) causes no justified envy of the first kind.
double stv_pair(const RandomizedMatching& r, const EncodedProfile& enc, int w,
                int f);

/// (1/2)(1/m + 1/n) * sum of stv_pair over all pairs.
double stv_profile(const RandomizedMatching& r, const EncodedProfile& enc);

/// Probability mass placed on pairs that one side finds unacceptable,
/// weighted by how far below the outside option the partner is ranked.
double irv_profile(const RandomizedMatching& r, const EncodedProfile& enc);

/// Threshold sets for stochastic-dominance comparisons. Weak uses
/// {j : j ranked at or above the threshold}; Strict drops the threshold
/// itself and is kept only for auditing.
enum class Inclusion { Weak, Strict };

/// Probability that `agent` is matched to a partner in the threshold set of
/// `threshold` under `order`. Throws ValidationError if the threshold is not
/// acceptable under `order`.
double cumulative_prob(const RandomizedMatching& r, const PreferenceOrder& order,
                       AgentId agent, int threshold,
                       Inclusion inclusion = Inclusion::Weak);

/// Best cumulative-probability gain of `report` over `truth` across all
/// thresholds acceptable under `true_order`, floored at 0.
double fosd_gain(const RandomizedMatching& truth,
                 const RandomizedMatching& report,
                 const PreferenceOrder& true_order, AgentId agent,
                 Inclusion inclusion = Inclusion::Weak);

/// Largest fosd_gain over every possible report of `agent`.
double regret_agent(const Mechanism& mech, const PreferenceProfile& profile,
                    AgentId agent, Inclusion inclusion = Inclusion::Weak,
                    int cap = kDefaultEnumerationCap);

/// regret_agent for all workers followed by all firms, sharing one batched
/// evaluation of every misreport.
std::vector<double> agent_regrets(const Mechanism& mech,
                                  const PreferenceProfile& profile,
                                  Inclusion inclusion = Inclusion::Weak,
                                  int cap = kDefaultEnumerationCap);

/// (1/2)(mean worker regret + mean firm regret).
double regret_profile(const Mechanism& mech, const PreferenceProfile& profile,
                      Inclusion inclusion = Inclusion::Weak,
                      int cap = kDefaultEnumerationCap);

/// Expected encoded utility per agent: sum r(w,f) (p + q) / (n + m).
double welfare_profile(const RandomizedMatching& r, const EncodedProfile& enc);

/// Best agreement with worker- or firm-proposing DA: average of r over the
/// pairs of the DA matching, maximised over the two DA variants that match
/// at least one pair. 1 when both DA matchings are empty.
double similarity(const RandomizedMatching& r, const PreferenceProfile& profile);

struct EntropyResult {
  double value = 0.0;
  /// Set when n <= 1 or m <= 1, where the normalising logarithm vanishes.
  bool degenerate = false;
};

/// Normalized per-agent entropy of r including the unmatched margins.
EntropyResult entropy(const RandomizedMatching& r);

/// Upper bound of entropy() for an n x m market.
double entropy_upper_bound(int n, int m);

struct EvalReport {
  double stv = 0.0;
  double rgt = 0.0;
  double irv = 0.0;
  double welfare_per_agent = 0.0;
  double sim = 0.0;
  double entropy = 0.0;
  long long profiles_evaluated = 0;
};

/// Per-profile metrics of `mech` averaged over `profiles`. Errors carry the
/// index of the failing profile.
EvalReport evaluate(const Mechanism& mech,
                    std::span<const PreferenceProfile> profiles,
                    int cap = kDefaultEnumerationCap);

}  // namespace matchnet
