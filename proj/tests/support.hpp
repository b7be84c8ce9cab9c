#pragma once

// Shared fixtures and naive reference implementations for the test suites.
// Nothing here calls into the library's mechanism or metric code.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "matchnet/prefs.hpp"
#include "matchnet/profile_io.hpp"

namespace testing_support {

using matchnet::PreferenceProfile;

// Three workers and three firms; the standard worked example.
inline PreferenceProfile example1() {
  return matchnet::parse_profile(
      "f2,f3,f1,_;f2,f1,f3,_;f1,f3,f2,_|w1,w2,w3,_;w2,w3,w1,_;w3,w1,w2,_");
}

// Position of `who` in a ranking given as a plain vector (-1 is the outside
// option).
inline int pos(const std::vector<int>& ranking, int who) {
  return static_cast<int>(std::find(ranking.begin(), ranking.end(), who) -
                          ranking.begin());
}

inline std::vector<int> ranking_of(const matchnet::PreferenceOrder& o) {
  return {o.ranking().begin(), o.ranking().end()};
}

// Serial dictatorship over agents 0..n-1 (workers) and n..n+m-1 (firms).
inline Eigen::MatrixXd naive_sd(const PreferenceProfile& p,
                                const std::vector<int>& priority) {
  std::vector<int> wp(p.n, -1), fp(p.m, -1);
  std::vector<bool> w_done(p.n, false), f_done(p.m, false);
  for (int a : priority) {
    if (a < p.n) {
      if (wp[a] != -1) continue;
      const auto r = ranking_of(p.workers[a]);
      for (int f : r) {
        if (f == -1) break;
        if (fp[f] == -1) {
          wp[a] = f;
          fp[f] = a;
          break;
        }
      }
    } else {
      const int f = a - p.n;
      if (fp[f] != -1) continue;
      const auto r = ranking_of(p.firms[f]);
      for (int w : r) {
        if (w == -1) break;
        if (wp[w] == -1) {
          wp[w] = f;
          fp[f] = w;
          break;
        }
      }
    }
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p.n, p.m);
  for (int w = 0; w < p.n; ++w) {
    if (wp[w] != -1) out(w, wp[w]) = 1.0;
  }
  return out;
}

// RSD marginals by averaging every priority order.
inline Eigen::MatrixXd brute_force_rsd(const PreferenceProfile& p) {
  std::vector<int> order(p.n + p.m);
  std::iota(order.begin(), order.end(), 0);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(p.n, p.m);
  long long count = 0;
  do {
    sum += naive_sd(p, order);
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  return sum / static_cast<double>(count);
}

// Evenly spaced utility of `target` under `ranking` over `size` partners,
// written straight from the counting definition.
inline double naive_utility(const std::vector<int>& ranking, int target, int size) {
  const int tp = pos(ranking, target);
  const int bp = pos(ranking, -1);
  double u = tp < bp ? 1.0 : 0.0;
  for (int j = 0; j < size; ++j) {
    if (tp < pos(ranking, j)) u += 1.0;
    if (bp < pos(ranking, j)) u -= 1.0;
  }
  return u / size;
}

// Stability violation of one pair computed with explicit loops over the
// encoded utilities.
inline double naive_stv_pair(const PreferenceProfile& p, const Eigen::MatrixXd& r,
                             int w, int f) {
  auto pw = [&](int firm) { return naive_utility(ranking_of(p.workers[w]), firm, p.m); };
  auto qf = [&](int worker) { return naive_utility(ranking_of(p.firms[f]), worker, p.n); };
  double firm_side = 0.0;
  double f_free = 1.0;
  for (int o = 0; o < p.n; ++o) {
    f_free -= r(o, f);
    firm_side += r(o, f) * std::max(0.0, qf(w) - qf(o));
  }
  firm_side += f_free * std::max(0.0, qf(w));
  double worker_side = 0.0;
  double w_free = 1.0;
  for (int o = 0; o < p.m; ++o) {
    w_free -= r(w, o);
    worker_side += r(w, o) * std::max(0.0, pw(f) - pw(o));
  }
  worker_side += w_free * std::max(0.0, pw(f));
  return firm_side * worker_side;
}

}  // namespace testing_support
