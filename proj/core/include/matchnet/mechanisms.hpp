#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "matchnet/prefs.hpp"
#include "matchnet/rng.hpp"

namespace matchnet {

/// One-to-one matching; kUnmatched marks agents without a partner.
class DeterministicMatching {
 public:
  DeterministicMatching() = default;
  DeterministicMatching(int n, int m);

  int n() const { return static_cast<int>(worker_partner_.size()); }
  int m() const { return static_cast<int>(firm_partner_.size()); }

  int partner_of_worker(int w) const { return worker_partner_.at(w); }
  int partner_of_firm(int f) const { return firm_partner_.at(f); }
  int partner_of(AgentId agent) const {
    return agent.side == Side::Worker ? partner_of_worker(agent.index)
                                      : partner_of_firm(agent.index);
  }

  /// Throws ValidationError if either agent is already matched.
  void add_pair(int w, int f);

  bool contains(int w, int f) const { return worker_partner_.at(w) == f; }

  /// (worker, firm) pairs ordered by worker index.
  std::vector<std::pair<int, int>> pairs() const;
  int num_pairs() const;

  /// 0/1 marginal matrix.
  Eigen::MatrixXd to_marginals() const;

  bool operator==(const DeterministicMatching&) const = default;

 private:
  std::vector<int> worker_partner_;
  std::vector<int> firm_partner_;
};

/// Sidecar line: "w:f" tokens (1-based) in worker order, "w:_" if unmatched.
std::string format_matching(const DeterministicMatching& matching);

/// Marginal match probabilities of a randomized matching.
struct RandomizedMatching {
  static constexpr double kTolerance = 1e-9;

  Eigen::MatrixXd r;

  int n() const { return static_cast<int>(r.rows()); }
  int m() const { return static_cast<int>(r.cols()); }

  /// Probability that worker w stays unmatched.
  double worker_unmatched(int w) const { return 1.0 - r.row(w).sum(); }
  /// Probability that firm f stays unmatched.
  double firm_unmatched(int f) const { return 1.0 - r.col(f).sum(); }

  /// Entries in [0, 1] and every row and column sum at most one, both up to
  /// `tol`. Throws ValidationError describing the first violation.
  void validate(double tol = kTolerance) const;
};

/// A mechanism maps reported profiles to randomized matchings.
class Mechanism {
 public:
  virtual ~Mechanism() = default;

  virtual RandomizedMatching evaluate(const PreferenceProfile& profile) const = 0;

  /// Batched evaluation. The default loops over evaluate().
  virtual std::vector<RandomizedMatching> evaluate_batch(
      std::span<const PreferenceProfile> profiles) const;

  virtual std::string label() const = 0;
};

// --- Deferred acceptance ----------------------------------------------------

enum class Proposing { Workers, Firms };

/// Deferred acceptance with the given side proposing. Proposers are processed
/// in ascending index order within each round.
DeterministicMatching da(const PreferenceProfile& profile, Proposing proposing);

// --- Serial dictatorship ----------------------------------------------------

/// Serial dictatorship for one priority order over all n + m agents: each
/// dictator that is still free takes its best free acceptable partner.
DeterministicMatching serial_dictatorship_round(
    const PreferenceProfile& profile, std::span<const AgentId> priority);

inline constexpr int kDefaultRsdCap = 8;

/// Exact RSD marginals by averaging over all (n + m)! priority orders.
/// Throws EnumerationOverflow if n + m > cap; use rsd_monte_carlo instead.
RandomizedMatching rsd_exact(const PreferenceProfile& profile,
                             int cap = kDefaultRsdCap);

/// Empirical RSD marginals over `samples` uniformly drawn priority orders.
RandomizedMatching rsd_monte_carlo(const PreferenceProfile& profile,
                                   std::int64_t samples, CounterRng& rng);

// --- Birkhoff-von Neumann ---------------------------------------------------

struct BvnComponent {
  double weight = 0.0;
  DeterministicMatching matching;
};

struct BvnDecomposition {
  std::vector<BvnComponent> components;

  /// Weighted sum of the component indicator matrices.
  Eigen::MatrixXd reconstruct(int n, int m) const;
};

/// Convex combination of (partial) matchings whose marginals equal r.
/// Throws ValidationError if r is not weakly doubly stochastic.
BvnDecomposition bvn_decompose(const RandomizedMatching& r);

/// Upper bound on the number of components bvn_decompose returns.
inline int bvn_component_bound(int n, int m) { return n * m + n + m + 1; }

// --- Baselines behind the Mechanism interface -------------------------------

enum class BaselineKind { WDA, FDA, RSD };

struct RsdOptions {
  int exact_cap = kDefaultRsdCap;
  std::int64_t monte_carlo_samples = 100000;
  std::uint64_t seed = 0;
};

/// DA variants return the 0/1 marginals of the DA matching. RSD is exact up
/// to the enumeration cap and Monte Carlo above it.
std::unique_ptr<Mechanism> lift_mechanism(BaselineKind kind,
                                          RsdOptions rsd = {});

/// Parses "wda", "fda" or "rsd".
BaselineKind parse_baseline(const std::string& label);
std::string to_string(BaselineKind kind);

}  // namespace matchnet
