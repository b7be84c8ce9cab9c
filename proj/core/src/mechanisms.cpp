#include "matchnet/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "matchnet/error.hpp"

namespace matchnet {

DeterministicMatching::DeterministicMatching(int n, int m)
    : worker_partner_(static_cast<std::size_t>(n), kUnmatched),
      firm_partner_(static_cast<std::size_t>(m), kUnmatched) {}

void DeterministicMatching::add_pair(int w, int f) {
  if (worker_partner_.at(w) != kUnmatched || firm_partner_.at(f) != kUnmatched) {
    throw ValidationError("agent matched twice in a matching");
  }
  worker_partner_[w] = f;
  firm_partner_[f] = w;
}

std::vector<std::pair<int, int>> DeterministicMatching::pairs() const {
  std::vector<std::pair<int, int>> out;
  for (int w = 0; w < n(); ++w) {
    if (worker_partner_[w] != kUnmatched) out.emplace_back(w, worker_partner_[w]);
  }
  return out;
}

int DeterministicMatching::num_pairs() const {
  return static_cast<int>(std::count_if(worker_partner_.begin(),
                                        worker_partner_.end(),
                                        [](int f) { return f != kUnmatched; }));
}

Eigen::MatrixXd DeterministicMatching::to_marginals() const {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n(), m());
  for (const auto& [w, f] : pairs()) r(w, f) = 1.0;
  return r;
}

std::string format_matching(const DeterministicMatching& matching) {
  std::string out;
  for (int w = 0; w < matching.n(); ++w) {
    if (w > 0) out += ' ';
    out += std::to_string(w + 1);
    out += ':';
    const int f = matching.partner_of_worker(w);
    out += f == kUnmatched ? std::string("_") : std::to_string(f + 1);
  }
  return out;
}

void RandomizedMatching::validate(double tol) const {
  if (!r.allFinite()) {
    throw ValidationError("randomized matching has non-finite entries");
  }
  for (int w = 0; w < n(); ++w) {
    for (int f = 0; f < m(); ++f) {
      if (r(w, f) < -tol || r(w, f) > 1.0 + tol) {
        throw ValidationError("marginal r(" + std::to_string(w + 1) + "," +
                              std::to_string(f + 1) + ") outside [0, 1]");
      }
    }
  }
  for (int w = 0; w < n(); ++w) {
    if (worker_unmatched(w) < -tol) {
      throw ValidationError("row sum of worker " + std::to_string(w + 1) +
                            " exceeds one");
    }
  }
  for (int f = 0; f < m(); ++f) {
    if (firm_unmatched(f) < -tol) {
      throw ValidationError("column sum of firm " + std::to_string(f + 1) +
                            " exceeds one");
    }
  }
}

std::vector<RandomizedMatching> Mechanism::evaluate_batch(
    std::span<const PreferenceProfile> profiles) const {
  std::vector<RandomizedMatching> out;
  out.reserve(profiles.size());
  for (const auto& profile : profiles) out.push_back(evaluate(profile));
  return out;
}

DeterministicMatching da(const PreferenceProfile& profile,
                         Proposing proposing) {
  const bool workers_propose = proposing == Proposing::Workers;
  const auto& proposers = workers_propose ? profile.workers : profile.firms;
  const auto& receivers = workers_propose ? profile.firms : profile.workers;
  const int num_proposers = static_cast<int>(proposers.size());
  const int num_receivers = static_cast<int>(receivers.size());

  // next[i]: position in proposer i's ranking of its next proposal.
  std::vector<int> next(num_proposers, 0);
  std::vector<int> held(num_receivers, kUnmatched);
  std::vector<bool> engaged(num_proposers, false);

  bool proposals_made = true;
  while (proposals_made) {
    proposals_made = false;
    std::vector<std::vector<int>> offers(num_receivers);
    for (int i = 0; i < num_proposers; ++i) {
      if (engaged[i]) continue;
      const auto ranking = proposers[i].ranking();
      const int target = ranking[next[i]];
      if (target == kUnmatched) continue;  // remaining list exhausted
      offers[target].push_back(i);
      proposals_made = true;
    }
    for (int j = 0; j < num_receivers; ++j) {
      if (offers[j].empty()) continue;
      const auto& order = receivers[j];
      int best = held[j];
      for (int i : offers[j]) {
        if (order.prefers(i, best)) best = i;
      }
      for (int i : offers[j]) {
        if (i == best) {
          engaged[i] = true;
        } else {
          ++next[i];
        }
      }
      if (best != held[j]) {
        if (held[j] != kUnmatched) {
          engaged[held[j]] = false;
          ++next[held[j]];
        }
        held[j] = best;
      }
    }
  }

  DeterministicMatching out(profile.n, profile.m);
  for (int j = 0; j < num_receivers; ++j) {
    if (held[j] == kUnmatched) continue;
    if (workers_propose) {
      out.add_pair(held[j], j);
    } else {
      out.add_pair(j, held[j]);
    }
  }
  return out;
}

DeterministicMatching serial_dictatorship_round(
    const PreferenceProfile& profile, std::span<const AgentId> priority) {
  if (static_cast<int>(priority.size()) != profile.n + profile.m) {
    throw ValidationError("priority order must list all n + m agents");
  }
  DeterministicMatching out(profile.n, profile.m);
  for (const AgentId& dictator : priority) {
    if (out.partner_of(dictator) != kUnmatched) continue;
    const auto& order = profile.order(dictator);
    for (int partner : order.acceptable_partners()) {
      const bool partner_free =
          dictator.side == Side::Worker
              ? out.partner_of_firm(partner) == kUnmatched
              : out.partner_of_worker(partner) == kUnmatched;
      if (!partner_free) continue;
      if (dictator.side == Side::Worker) {
        out.add_pair(dictator.index, partner);
      } else {
        out.add_pair(partner, dictator.index);
      }
      break;
    }
  }
  return out;
}

namespace {

std::vector<AgentId> all_agents(int n, int m) {
  std::vector<AgentId> agents;
  for (int w = 0; w < n; ++w) agents.push_back({Side::Worker, w});
  for (int f = 0; f < m; ++f) agents.push_back({Side::Firm, f});
  return agents;
}

}  // namespace

namespace {

// Exact RSD by recursion over the next effective dictator. Under a uniform
// priority order the first not-yet-seen agent that is still free is uniform
// over the free agents that have not acted, so each branch carries
// probability 1/|candidates| and agents already matched are skipped. This
// yields the same marginals as averaging all (n + m)! orders.
struct RsdSearch {
  const PreferenceProfile& profile;
  std::vector<int> worker_partner;
  std::vector<int> firm_partner;
  std::vector<char> acted;  // workers then firms
  Eigen::MatrixXd marginals;

  explicit RsdSearch(const PreferenceProfile& p)
      : profile(p),
        worker_partner(static_cast<std::size_t>(p.n), kUnmatched),
        firm_partner(static_cast<std::size_t>(p.m), kUnmatched),
        acted(static_cast<std::size_t>(p.n + p.m), 0),
        marginals(Eigen::MatrixXd::Zero(p.n, p.m)) {}

  bool is_free(int slot) const {
    return slot < profile.n ? worker_partner[slot] == kUnmatched
                            : firm_partner[slot - profile.n] == kUnmatched;
  }

  void run(double prob) {
    int candidates[64];
    int count = 0;
    for (int slot = 0; slot < profile.n + profile.m; ++slot) {
      if (!acted[slot] && is_free(slot)) candidates[count++] = slot;
    }
    if (count == 0) {
      for (int w = 0; w < profile.n; ++w) {
        if (worker_partner[w] != kUnmatched) marginals(w, worker_partner[w]) += prob;
      }
      return;
    }
    const double branch = prob / count;
    for (int k = 0; k < count; ++k) {
      const int slot = candidates[k];
      const bool is_worker = slot < profile.n;
      const int index = is_worker ? slot : slot - profile.n;
      const auto& order = is_worker ? profile.workers[index] : profile.firms[index];
      int choice = kUnmatched;
      for (int partner : order.acceptable_partners()) {
        const bool free = is_worker ? firm_partner[partner] == kUnmatched
                                    : worker_partner[partner] == kUnmatched;
        if (free) {
          choice = partner;
          break;
        }
      }
      if (choice == kUnmatched) {
        acted[slot] = 1;
        run(branch);
        acted[slot] = 0;
        continue;
      }
      const int w = is_worker ? index : choice;
      const int f = is_worker ? choice : index;
      worker_partner[w] = f;
      firm_partner[f] = w;
      run(branch);
      worker_partner[w] = kUnmatched;
      firm_partner[f] = kUnmatched;
    }
  }
};

}  // namespace

RandomizedMatching rsd_exact(const PreferenceProfile& profile, int cap) {
  profile.validate();
  const int total = profile.n + profile.m;
  if (total > cap || total > 64) {
    throw EnumerationOverflow(
        "exact RSD over " + std::to_string(total) +
        " agents exceeds the enumeration cap of " + std::to_string(cap) +
        "; use rsd_monte_carlo");
  }
  RsdSearch search(profile);
  search.run(1.0);
  return {search.marginals};
}

RandomizedMatching rsd_monte_carlo(const PreferenceProfile& profile,
                                   std::int64_t samples, CounterRng& rng) {
  profile.validate();
  if (samples < 1) {
    throw ValidationError("rsd_monte_carlo needs at least one sample");
  }
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts =
      Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(
          profile.n, profile.m);
  auto priority = all_agents(profile.n, profile.m);
  for (std::int64_t s = 0; s < samples; ++s) {
    rng.shuffle(std::span<AgentId>(priority));
    const auto matching = serial_dictatorship_round(profile, priority);
    for (int w = 0; w < profile.n; ++w) {
      const int f = matching.partner_of_worker(w);
      if (f != kUnmatched) ++counts(w, f);
    }
  }
  Eigen::MatrixXd r = counts.cast<double>() / static_cast<double>(samples);
  return {r.cwiseMax(0.0).cwiseMin(1.0)};
}

Eigen::MatrixXd BvnDecomposition::reconstruct(int n, int m) const {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, m);
  for (const auto& component : components) {
    for (const auto& [w, f] : component.matching.pairs()) {
      r(w, f) += component.weight;
    }
  }
  return r;
}

namespace {

constexpr double kBvnZero = 1e-14;

// Kuhn's augmenting-path matching on the positive support of a square
// matrix. Returns column assigned to each row, or empty if no perfect
// matching exists.
bool try_augment(const Eigen::MatrixXd& a, int row, std::vector<int>& col_owner,
                 std::vector<bool>& visited) {
  for (int c = 0; c < a.cols(); ++c) {
    if (a(row, c) <= kBvnZero || visited[c]) continue;
    visited[c] = true;
    if (col_owner[c] == -1 || try_augment(a, col_owner[c], col_owner, visited)) {
      col_owner[c] = row;
      return true;
    }
  }
  return false;
}

std::vector<int> perfect_matching(const Eigen::MatrixXd& a) {
  const int size = static_cast<int>(a.rows());
  std::vector<int> col_owner(size, -1);
  for (int row = 0; row < size; ++row) {
    std::vector<bool> visited(size, false);
    if (!try_augment(a, row, col_owner, visited)) return {};
  }
  std::vector<int> row_to_col(size, -1);
  for (int c = 0; c < size; ++c) row_to_col[col_owner[c]] = c;
  return row_to_col;
}

}  // namespace

BvnDecomposition bvn_decompose(const RandomizedMatching& input) {
  input.validate();
  const int n = input.n();
  const int m = input.m();
  Eigen::MatrixXd r = input.r.cwiseMax(0.0).cwiseMin(1.0);
  Eigen::VectorXd worker_slack(n);
  Eigen::VectorXd firm_slack(m);
  for (int w = 0; w < n; ++w) worker_slack(w) = std::max(0.0, 1.0 - r.row(w).sum());
  for (int f = 0; f < m; ++f) firm_slack(f) = std::max(0.0, 1.0 - r.col(f).sum());

  // Square (n + m) augmentation: rows are workers then firm dummies, columns
  // are firms then worker dummies. The dummy-dummy block carries r^T.
  const int size = n + m;
  auto augmented = [&] {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size, size);
    a.topLeftCorner(n, m) = r;
    a.bottomRightCorner(m, n) = r.transpose();
    for (int w = 0; w < n; ++w) a(w, m + w) = worker_slack(w);
    for (int f = 0; f < m; ++f) a(n + f, f) = firm_slack(f);
    return a;
  };

  BvnDecomposition out;
  const int bound = bvn_component_bound(n, m);
  while (static_cast<int>(out.components.size()) < bound) {
    const auto row_to_col = perfect_matching(augmented());
    if (row_to_col.empty()) break;

    DeterministicMatching matching(n, m);
    for (int w = 0; w < n; ++w) {
      if (row_to_col[w] < m) matching.add_pair(w, row_to_col[w]);
    }
    // Weight is limited by every entry of the symmetric completion.
    double weight = 1.0;
    for (int w = 0; w < n; ++w) {
      const int f = matching.partner_of_worker(w);
      weight = std::min(weight, f == kUnmatched ? worker_slack(w) : r(w, f));
    }
    for (int f = 0; f < m; ++f) {
      if (matching.partner_of_firm(f) == kUnmatched) {
        weight = std::min(weight, firm_slack(f));
      }
    }
    if (weight <= kBvnZero) break;

    auto reduce = [weight](double& entry) {
      entry -= weight;
      if (entry <= kBvnZero) entry = 0.0;
    };
    for (int w = 0; w < n; ++w) {
      const int f = matching.partner_of_worker(w);
      if (f == kUnmatched) {
        reduce(worker_slack(w));
      } else {
        reduce(r(w, f));
      }
    }
    for (int f = 0; f < m; ++f) {
      if (matching.partner_of_firm(f) == kUnmatched) reduce(firm_slack(f));
    }
    out.components.push_back({weight, std::move(matching)});
  }
  return out;
}

namespace {

class DaMechanism final : public Mechanism {
 public:
  explicit DaMechanism(Proposing proposing) : proposing_(proposing) {}

  RandomizedMatching evaluate(const PreferenceProfile& profile) const override {
    return {da(profile, proposing_).to_marginals()};
  }

  std::string label() const override {
    return proposing_ == Proposing::Workers ? "wda" : "fda";
  }

 private:
  Proposing proposing_;
};

// FNV-1a over the rankings, used to give every profile its own Monte Carlo
// stream so that RSD stays a deterministic function of the reports.
std::uint64_t profile_hash(const PreferenceProfile& profile) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](int value) {
    h ^= static_cast<std::uint64_t>(value + 2);
    h *= 0x100000001b3ULL;
  };
  for (const auto& order : profile.workers) {
    for (int x : order.ranking()) feed(x);
  }
  feed(-2);
  for (const auto& order : profile.firms) {
    for (int x : order.ranking()) feed(x);
  }
  return h;
}

class RsdMechanism final : public Mechanism {
 public:
  explicit RsdMechanism(RsdOptions options) : options_(options) {}

  RandomizedMatching evaluate(const PreferenceProfile& profile) const override {
    if (profile.n + profile.m <= options_.exact_cap) {
      return rsd_exact(profile, options_.exact_cap);
    }
    CounterRng rng = CounterRng(options_.seed).split(profile_hash(profile));
    return rsd_monte_carlo(profile, options_.monte_carlo_samples, rng);
  }

  std::string label() const override { return "rsd"; }

 private:
  RsdOptions options_;
};

}  // namespace

std::unique_ptr<Mechanism> lift_mechanism(BaselineKind kind, RsdOptions rsd) {
  switch (kind) {
    case BaselineKind::WDA:
      return std::make_unique<DaMechanism>(Proposing::Workers);
    case BaselineKind::FDA:
      return std::make_unique<DaMechanism>(Proposing::Firms);
    case BaselineKind::RSD:
      return std::make_unique<RsdMechanism>(rsd);
  }
  throw ValidationError("unknown baseline kind");
}

BaselineKind parse_baseline(const std::string& label) {
  if (label == "wda") return BaselineKind::WDA;
  if (label == "fda") return BaselineKind::FDA;
  if (label == "rsd") return BaselineKind::RSD;
  throw ValidationError("unknown mechanism label '" + label +
                        "' (expected wda, fda or rsd)");
}

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::WDA:
      return "wda";
    case BaselineKind::FDA:
      return "fda";
    case BaselineKind::RSD:
      return "rsd";
  }
  return "?";
}

}  // namespace matchnet
