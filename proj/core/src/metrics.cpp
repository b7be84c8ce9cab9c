#include "matchnet/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "matchnet/error.hpp"

namespace matchnet {
namespace {

void check_dims(const RandomizedMatching& r, const EncodedProfile& enc) {
  if (r.r.rows() != enc.p.rows() || r.r.cols() != enc.p.cols() ||
      enc.q.rows() != enc.p.rows() || enc.q.cols() != enc.p.cols()) {
    throw ValidationError("matching and encoded profile have different shapes");
  }
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace

double stv_pair(const RandomizedMatching& r, const EncodedProfile& enc, int w,
                int f) {
  check_dims(r, enc);
  const int n = r.n();
  const int m = r.m();
  if (w < 0 || w >= n || f < 0 || f >= m) {
    throw ValidationError("stv_pair index out of range");
  }
  double firm_envy = r.firm_unmatched(f) * relu(enc.q(w, f));
  for (int other = 0; other < n; ++other) {
    firm_envy += r.r(other, f) * relu(enc.q(w, f) - enc.q(other, f));
  }
  double worker_envy = r.worker_unmatched(w) * relu(enc.p(w, f));
  for (int other = 0; other < m; ++other) {
    worker_envy += r.r(w, other) * relu(enc.p(w, f) - enc.p(w, other));
  }
  return firm_envy * worker_envy;
}

double stv_profile(const RandomizedMatching& r, const EncodedProfile& enc) {
  check_dims(r, enc);
  double total = 0.0;
  for (int w = 0; w < r.n(); ++w) {
    for (int f = 0; f < r.m(); ++f) total += stv_pair(r, enc, w, f);
  }
  return 0.5 * (1.0 / r.m() + 1.0 / r.n()) * total;
}

double irv_profile(const RandomizedMatching& r, const EncodedProfile& enc) {
  check_dims(r, enc);
  double firm_side = 0.0;
  double worker_side = 0.0;
  for (int w = 0; w < r.n(); ++w) {
    for (int f = 0; f < r.m(); ++f) {
      firm_side += r.r(w, f) * relu(-enc.q(w, f));
      worker_side += r.r(w, f) * relu(-enc.p(w, f));
    }
  }
  return firm_side / (2.0 * r.m()) + worker_side / (2.0 * r.n());
}

namespace {

double match_prob(const RandomizedMatching& r, AgentId agent, int partner) {
  return agent.side == Side::Worker ? r.r(agent.index, partner)
                                    : r.r(partner, agent.index);
}

}  // namespace

double cumulative_prob(const RandomizedMatching& r, const PreferenceOrder& order,
                       AgentId agent, int threshold, Inclusion inclusion) {
  if (threshold == kUnmatched || !order.acceptable(threshold)) {
    throw ValidationError("cumulative_prob threshold must be acceptable");
  }
  const int last = order.rank_of(threshold) + (inclusion == Inclusion::Weak ? 1 : 0);
  double total = 0.0;
  for (int pos = 0; pos < last; ++pos) {
    total += match_prob(r, agent, order.ranking()[pos]);
  }
  return total;
}

double fosd_gain(const RandomizedMatching& truth,
                 const RandomizedMatching& report,
                 const PreferenceOrder& true_order, AgentId agent,
                 Inclusion inclusion) {
  // Prefix sums along the true ranking; each acceptable threshold closes one
  // prefix (weak) or the prefix before it (strict).
  double best = 0.0;
  double diff = 0.0;
  for (int partner : true_order.acceptable_partners()) {
    const double before = diff;
    diff += match_prob(report, agent, partner) - match_prob(truth, agent, partner);
    best = std::max(best, inclusion == Inclusion::Weak ? diff : before);
  }
  return best;
}

namespace {

struct ProfileRegrets {
  RandomizedMatching truth;
  std::vector<double> per_agent;  // workers then firms
};

ProfileRegrets compute_regrets(const Mechanism& mech,
                               const PreferenceProfile& profile,
                               Inclusion inclusion, int cap) {
  profile.validate();
  const auto worker_reports = enumerate_misreports(Side::Worker, profile.m, cap);
  const auto firm_reports = enumerate_misreports(Side::Firm, profile.n, cap);

  std::vector<PreferenceProfile> batch;
  batch.reserve(1 + profile.n * worker_reports.size() +
                profile.m * firm_reports.size());
  batch.push_back(profile);
  std::vector<AgentId> agents;
  for (int w = 0; w < profile.n; ++w) agents.push_back({Side::Worker, w});
  for (int f = 0; f < profile.m; ++f) agents.push_back({Side::Firm, f});
  for (const AgentId& agent : agents) {
    const auto& reports =
        agent.side == Side::Worker ? worker_reports : firm_reports;
    for (const auto& report : reports) {
      batch.push_back(profile.with_report(agent, report));
    }
  }
  auto outputs = mech.evaluate_batch(batch);

  ProfileRegrets out{outputs.front(), {}};
  std::size_t row = 1;
  for (const AgentId& agent : agents) {
    const auto& reports =
        agent.side == Side::Worker ? worker_reports : firm_reports;
    const auto& true_order = profile.order(agent);
    double best = 0.0;
    for (std::size_t k = 0; k < reports.size(); ++k, ++row) {
      best = std::max(best, fosd_gain(out.truth, outputs[row], true_order,
                                      agent, inclusion));
    }
    out.per_agent.push_back(best);
  }
  return out;
}

double average_regret(const std::vector<double>& per_agent, int n, int m) {
  double workers = 0.0;
  double firms = 0.0;
  for (int w = 0; w < n; ++w) workers += per_agent[w];
  for (int f = 0; f < m; ++f) firms += per_agent[n + f];
  return 0.5 * (workers / n + firms / m);
}

}  // namespace

double regret_agent(const Mechanism& mech, const PreferenceProfile& profile,
                    AgentId agent, Inclusion inclusion, int cap) {
  profile.validate();
  const int size = agent.side == Side::Worker ? profile.m : profile.n;
  const auto reports = enumerate_misreports(agent.side, size, cap);
  std::vector<PreferenceProfile> batch;
  batch.reserve(reports.size() + 1);
  batch.push_back(profile);
  for (const auto& report : reports) {
    batch.push_back(profile.with_report(agent, report));
  }
  const auto outputs = mech.evaluate_batch(batch);
  double best = 0.0;
  for (std::size_t k = 1; k < outputs.size(); ++k) {
    best = std::max(best, fosd_gain(outputs.front(), outputs[k],
                                    profile.order(agent), agent, inclusion));
  }
  return best;
}

std::vector<double> agent_regrets(const Mechanism& mech,
                                  const PreferenceProfile& profile,
                                  Inclusion inclusion, int cap) {
  return compute_regrets(mech, profile, inclusion, cap).per_agent;
}

double regret_profile(const Mechanism& mech, const PreferenceProfile& profile,
                      Inclusion inclusion, int cap) {
  const auto regrets = compute_regrets(mech, profile, inclusion, cap);
  return average_regret(regrets.per_agent, profile.n, profile.m);
}

double welfare_profile(const RandomizedMatching& r, const EncodedProfile& enc) {
  check_dims(r, enc);
  return (r.r.cwiseProduct(enc.p + enc.q)).sum() / (r.n() + r.m());
}

double similarity(const RandomizedMatching& r, const PreferenceProfile& profile) {
  if (r.n() != profile.n || r.m() != profile.m) {
    throw ValidationError("matching and profile have different shapes");
  }
  double best = -1.0;
  for (Proposing side : {Proposing::Workers, Proposing::Firms}) {
    const auto pairs = da(profile, side).pairs();
    if (pairs.empty()) continue;
    double agreement = 0.0;
    for (const auto& [w, f] : pairs) agreement += r.r(w, f);
    best = std::max(best, agreement / static_cast<double>(pairs.size()));
  }
  return best < 0.0 ? 1.0 : best;
}

namespace {

double plogp(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

}  // namespace

EntropyResult entropy(const RandomizedMatching& r) {
  const int n = r.n();
  const int m = r.m();
  if (n <= 1 || m <= 1) return {0.0, true};
  double workers = 0.0;
  for (int w = 0; w < n; ++w) {
    for (int f = 0; f < m; ++f) workers += plogp(r.r(w, f));
    workers += plogp(std::max(0.0, r.worker_unmatched(w)));
  }
  double firms = 0.0;
  for (int f = 0; f < m; ++f) {
    for (int w = 0; w < n; ++w) firms += plogp(r.r(w, f));
    firms += plogp(std::max(0.0, r.firm_unmatched(f)));
  }
  const double value = -workers / (2.0 * n * std::log2(m)) -
                       firms / (2.0 * m * std::log2(n));
  return {std::max(0.0, value), false};
}

double entropy_upper_bound(int n, int m) {
  return 0.5 * (std::log2(m + 1.0) / std::log2(m) +
                std::log2(n + 1.0) / std::log2(n));
}

EvalReport evaluate(const Mechanism& mech,
                    std::span<const PreferenceProfile> profiles, int cap) {
  if (profiles.empty()) {
    throw ValidationError("evaluate needs at least one profile");
  }
  EvalReport sum;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto& profile = profiles[i];
    try {
      const auto enc = encode(profile);
      const auto regrets = compute_regrets(mech, profile, Inclusion::Weak, cap);
      const auto& r = regrets.truth;
      r.validate();
      sum.stv += stv_profile(r, enc);
      sum.irv += irv_profile(r, enc);
      sum.rgt += average_regret(regrets.per_agent, profile.n, profile.m);
      sum.welfare_per_agent += welfare_profile(r, enc);
      sum.sim += similarity(r, profile);
      sum.entropy += entropy(r).value;
    } catch (const Error& e) {
      const std::string what = "profile " + std::to_string(i) + ": " + e.what();
      switch (e.kind()) {
        case ErrorKind::Validation:
          throw ValidationError(what);
        case ErrorKind::Numeric:
          throw NumericError(what);
        case ErrorKind::Io:
          throw IoError(what);
      }
      throw;
    }
  }
  const double count = static_cast<double>(profiles.size());
  sum.stv /= count;
  sum.rgt /= count;
  sum.irv /= count;
  sum.welfare_per_agent /= count;
  sum.sim /= count;
  sum.entropy /= count;
  sum.profiles_evaluated = static_cast<long long>(profiles.size());
  return sum;
}

}  // namespace matchnet
