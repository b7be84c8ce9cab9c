#include "matchnet/oracle.hpp"

#include <algorithm>

#include "matchnet/error.hpp"

namespace matchnet::oracle {

namespace {

// Position of `who` in a ranking, kUnmatched included.
int position(const std::vector<int>& ranking, int who) {
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (ranking[i] == who) return static_cast<int>(i);
  }
  throw ValidationError("agent missing from ranking");
}

std::vector<int> copy_ranking(const PreferenceOrder& order) {
  return std::vector<int>(order.ranking().begin(), order.ranking().end());
}

void extend(int w, int n, int m, DeterministicMatching& current,
            std::vector<DeterministicMatching>& out) {
  if (w == n) {
    out.push_back(current);
    return;
  }
  extend(w + 1, n, m, current, out);
  for (int f = 0; f < m; ++f) {
    if (current.partner_of_firm(f) != kUnmatched) continue;
    DeterministicMatching next = current;
    next.add_pair(w, f);
    extend(w + 1, n, m, next, out);
  }
}

}  // namespace

std::string to_string(BlockingKind kind) {
  switch (kind) {
    case BlockingKind::MutualEnvy:
      return "mutual-envy";
    case BlockingKind::WorkerIRViolation:
      return "worker-ir";
    case BlockingKind::FirmIRViolation:
      return "firm-ir";
  }
  return "unknown";
}

std::vector<DeterministicMatching> enumerate_matchings(int n, int m) {
  if (n < 0 || m < 0) throw ValidationError("market sizes must be non-negative");
  if (n > kMaxMarketSide || m > kMaxMarketSide) {
    throw EnumerationOverflow("matching enumeration limited to " +
                              std::to_string(kMaxMarketSide) + " agents per side");
  }
  std::vector<DeterministicMatching> out;
  DeterministicMatching empty(n, m);
  extend(0, n, m, empty, out);
  return out;
}

std::vector<BlockingPair> find_blocking_pairs(const DeterministicMatching& matching,
                                              const PreferenceProfile& profile) {
  profile.validate();
  if (matching.n() != profile.n || matching.m() != profile.m) {
    throw ValidationError("matching dimensions differ from the profile");
  }
  std::vector<BlockingPair> out;
  for (int w = 0; w < profile.n; ++w) {
    const std::vector<int> wr = copy_ranking(profile.workers[w]);
    for (int f = 0; f < profile.m; ++f) {
      const std::vector<int> fr = copy_ranking(profile.firms[f]);
      const int w_outside = position(wr, kUnmatched);
      const int f_outside = position(fr, kUnmatched);
      if (matching.partner_of_worker(w) == f) {
        if (position(wr, f) > w_outside) {
          out.push_back({w, f, BlockingKind::WorkerIRViolation});
        }
        if (position(fr, w) > f_outside) {
          out.push_back({w, f, BlockingKind::FirmIRViolation});
        }
        continue;
      }
      const bool worker_wants =
          position(wr, f) < position(wr, matching.partner_of_worker(w));
      const bool firm_wants =
          position(fr, w) < position(fr, matching.partner_of_firm(f));
      if (worker_wants && firm_wants) {
        out.push_back({w, f, BlockingKind::MutualEnvy});
      }
    }
  }
  return out;
}

std::map<AgentId, double> fosd_audit(const Mechanism& mech,
                                     const PreferenceProfile& profile, int cap) {
  profile.validate();
  const RandomizedMatching truth = mech.evaluate(profile);

  std::map<AgentId, double> gains;
  std::vector<AgentId> agents;
  for (int w = 0; w < profile.n; ++w) agents.push_back({Side::Worker, w});
  for (int f = 0; f < profile.m; ++f) agents.push_back({Side::Firm, f});

  for (const AgentId& agent : agents) {
    const PreferenceOrder& true_order = profile.order(agent);
    const int size = true_order.size();
    if (size + 1 > cap) {
      throw EnumerationOverflow("fosd_audit: " + std::to_string(size + 1) +
                                " items exceed the cap of " + std::to_string(cap));
    }
    const std::vector<int> truth_ranking = copy_ranking(true_order);
    const int outside = position(truth_ranking, kUnmatched);

    auto prob = [&](const RandomizedMatching& r, int partner) {
      return agent.side == Side::Worker ? r.r(agent.index, partner)
                                        : r.r(partner, agent.index);
    };

    // Items 0..size-1 are partners, `size` stands for the outside option.
    std::vector<int> items(size + 1);
    for (int i = 0; i <= size; ++i) items[i] = i;
    double best = 0.0;
    do {
      std::vector<int> ranking(items);
      for (int& x : ranking) {
        if (x == size) x = kUnmatched;
      }
      const PreferenceProfile reported =
          profile.with_report(agent, PreferenceOrder(ranking));
      const RandomizedMatching lie = mech.evaluate(reported);
      for (int k = 0; k < outside; ++k) {
        double gain = 0.0;
        for (int j = 0; j <= k; ++j) {
          gain += prob(lie, truth_ranking[j]) - prob(truth, truth_ranking[j]);
        }
        if (gain > best) best = gain;
      }
    } while (std::next_permutation(items.begin(), items.end()));
    gains[agent] = best;
  }
  return gains;
}

std::vector<DeterministicMatching> exhaustive_stable_set(
    const PreferenceProfile& profile) {
  profile.validate();
  std::vector<DeterministicMatching> out;
  for (const auto& matching : enumerate_matchings(profile.n, profile.m)) {
    if (find_blocking_pairs(matching, profile).empty()) out.push_back(matching);
  }
  return out;
}

}  // namespace matchnet::oracle
