#include "matchnet/prefs.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "matchnet/error.hpp"

namespace matchnet {

std::string to_string(const AgentId& agent) {
  return (agent.side == Side::Worker ? "w" : "f") +
         std::to_string(agent.index + 1);
}

PreferenceOrder::PreferenceOrder(std::vector<int> ranking)
    : ranking_(std::move(ranking)) {
  if (ranking_.empty()) {
    throw ValidationError("preference order must contain the outside option");
  }
  const int size = static_cast<int>(ranking_.size()) - 1;
  rank_.assign(static_cast<std::size_t>(size) + 1, -1);
  for (int pos = 0; pos < static_cast<int>(ranking_.size()); ++pos) {
    const int partner = ranking_[pos];
    if (partner < kUnmatched || partner >= size) {
      throw ValidationError("preference order entry " +
                            std::to_string(partner) + " out of range for " +
                            std::to_string(size) + " partners");
    }
    auto& slot = partner == kUnmatched ? rank_.back() : rank_[partner];
    if (slot != -1) {
      throw ValidationError("preference order lists an entry twice");
    }
    slot = pos;
  }
}

PreferenceOrder PreferenceOrder::identity(int size) {
  std::vector<int> ranking(static_cast<std::size_t>(size) + 1);
  std::iota(ranking.begin(), ranking.end() - 1, 0);
  ranking.back() = kUnmatched;
  return PreferenceOrder(std::move(ranking));
}

void PreferenceProfile::validate() const {
  if (n < 1 || m < 1) {
    throw ValidationError("market sizes must be positive");
  }
  if (static_cast<int>(workers.size()) != n ||
      static_cast<int>(firms.size()) != m) {
    throw ValidationError("profile has the wrong number of agents");
  }
  for (const auto& order : workers) {
    if (order.size() != m) {
      throw ValidationError("worker order does not rank all firms");
    }
  }
  for (const auto& order : firms) {
    if (order.size() != n) {
      throw ValidationError("firm order does not rank all workers");
    }
  }
}

PreferenceProfile PreferenceProfile::with_report(AgentId agent,
                                                 PreferenceOrder report) const {
  PreferenceProfile out = *this;
  auto& slot = agent.side == Side::Worker ? out.workers.at(agent.index)
                                          : out.firms.at(agent.index);
  if (report.size() != slot.size()) {
    throw ValidationError("misreport has the wrong length for " +
                          to_string(agent));
  }
  slot = std::move(report);
  return out;
}

Eigen::VectorXd encode_order(const PreferenceOrder& order) {
  const int size = order.size();
  Eigen::VectorXd out(size);
  for (int j = 0; j < size; ++j) {
    int count = order.prefers(j, kUnmatched) ? 1 : 0;
    for (int other = 0; other < size; ++other) {
      count += order.prefers(j, other) ? 1 : 0;
      count -= order.prefers(kUnmatched, other) ? 1 : 0;
    }
    out(j) = static_cast<double>(count) / size;
  }
  return out;
}

EncodedProfile encode(const PreferenceProfile& profile) {
  EncodedProfile enc{Eigen::MatrixXd(profile.n, profile.m),
                     Eigen::MatrixXd(profile.n, profile.m)};
  for (int w = 0; w < profile.n; ++w) {
    enc.p.row(w) = encode_order(profile.workers[w]).transpose();
  }
  for (int f = 0; f < profile.m; ++f) {
    enc.q.col(f) = encode_order(profile.firms[f]);
  }
  return enc;
}

void DistributionConfig::validate() const {
  if (n < 1 || m < 1) {
    throw ValidationError("market sizes must be positive");
  }
  if (!(p_corr >= 0.0 && p_corr <= 1.0)) {
    throw ValidationError("p_corr must lie in [0, 1]");
  }
  if (!(p_trunc >= 0.0 && p_trunc <= 1.0)) {
    throw ValidationError("p_trunc must lie in [0, 1]");
  }
  if (kind == Correlation::Uncorrelated && p_corr != 0.0) {
    throw ValidationError("p_corr must be 0 for uncorrelated preferences");
  }
}

PreferenceOrder sample_order(int size, double p_trunc, CounterRng& rng) {
  std::vector<int> partners(static_cast<std::size_t>(size));
  std::iota(partners.begin(), partners.end(), 0);
  rng.shuffle(std::span<int>(partners));
  // The truncation coin and position are always drawn so that the number of
  // draws per order does not depend on the outcome.
  const bool truncate = rng.bernoulli(p_trunc);
  const auto cut = static_cast<std::ptrdiff_t>(rng.uniform_int(size));
  std::vector<int> ranking;
  ranking.reserve(partners.size() + 1);
  if (truncate) {
    ranking.assign(partners.begin(), partners.begin() + cut);
    ranking.push_back(kUnmatched);
    ranking.insert(ranking.end(), partners.begin() + cut, partners.end());
  } else {
    ranking = std::move(partners);
    ranking.push_back(kUnmatched);
  }
  return PreferenceOrder(std::move(ranking));
}

PreferenceProfile sample_profile(const DistributionConfig& cfg,
                                 CounterRng& rng) {
  PreferenceProfile profile;
  profile.n = cfg.n;
  profile.m = cfg.m;
  profile.workers.reserve(cfg.n);
  profile.firms.reserve(cfg.m);
  for (int w = 0; w < cfg.n; ++w) {
    profile.workers.push_back(sample_order(cfg.m, cfg.p_trunc, rng));
  }
  for (int f = 0; f < cfg.m; ++f) {
    profile.firms.push_back(sample_order(cfg.n, cfg.p_trunc, rng));
  }
  if (cfg.kind == Correlation::Correlated) {
    const PreferenceOrder common_worker = sample_order(cfg.m, cfg.p_trunc, rng);
    const PreferenceOrder common_firm = sample_order(cfg.n, cfg.p_trunc, rng);
    for (auto& order : profile.workers) {
      if (rng.bernoulli(cfg.p_corr)) order = common_worker;
    }
    for (auto& order : profile.firms) {
      if (rng.bernoulli(cfg.p_corr)) order = common_firm;
    }
  }
  return profile;
}

std::vector<PreferenceProfile> sample_profiles(const DistributionConfig& cfg,
                                               std::size_t count,
                                               std::uint64_t first) {
  cfg.validate();
  const CounterRng root(cfg.seed);
  std::vector<PreferenceProfile> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    CounterRng stream = root.split(first + i);
    out.push_back(sample_profile(cfg, stream));
  }
  return out;
}

std::vector<PreferenceOrder> enumerate_misreports(Side side, int size,
                                                  int cap) {
  if (size < 0) {
    throw ValidationError("negative market size");
  }
  if (size + 1 > cap) {
    std::ostringstream msg;
    msg << "enumerating " << (side == Side::Worker ? "worker" : "firm")
        << " misreports over " << size << " partners exceeds the cap of "
        << cap << " ranked entries";
    throw EnumerationOverflow(msg.str());
  }
  // Permute 0..size where `size` plays the outside option so that it sorts
  // after every real partner.
  std::vector<int> perm(static_cast<std::size_t>(size) + 1);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<PreferenceOrder> out;
  do {
    std::vector<int> ranking(perm);
    for (int& entry : ranking) {
      if (entry == size) entry = kUnmatched;
    }
    out.emplace_back(std::move(ranking));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

}  // namespace matchnet
