#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "matchnet/error.hpp"
#include "matchnet/prefs.hpp"
#include "matchnet/profile_io.hpp"
#include "matchnet/rng.hpp"
#include "support.hpp"

using namespace matchnet;

TEST(Encoding, WorkedExamplesAreExact) {
  // f2 > f1 > _ > f3 over three firms.
  Eigen::VectorXd p = encode_order(PreferenceOrder({1, 0, kUnmatched, 2}));
  EXPECT_EQ(p(1), 2.0 / 3.0);
  EXPECT_EQ(p(0), 1.0 / 3.0);
  EXPECT_EQ(p(2), -1.0 / 3.0);

  // Four firms, two acceptable.
  Eigen::VectorXd p4 = encode_order(PreferenceOrder({0, 1, kUnmatched, 2, 3}));
  EXPECT_EQ(p4(0), 2.0 / 4.0);
  EXPECT_EQ(p4(1), 1.0 / 4.0);
  EXPECT_EQ(p4(2), -1.0 / 4.0);
  EXPECT_EQ(p4(3), -2.0 / 4.0);

  // A firm ranking w2 > w1 > w3 > _.
  Eigen::VectorXd q = encode_order(PreferenceOrder({1, 0, 2, kUnmatched}));
  EXPECT_EQ(q(0), 2.0 / 3.0);
  EXPECT_EQ(q(1), 1.0);
  EXPECT_EQ(q(2), 1.0 / 3.0);
}

TEST(Encoding, MatchesCountingDefinitionOnRandomOrders) {
  CounterRng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int size = 1 + static_cast<int>(rng.uniform_int(5));
    const PreferenceOrder o = sample_order(size, 0.5, rng);
    const Eigen::VectorXd enc = encode_order(o);
    const auto ranking = testing_support::ranking_of(o);
    for (int j = 0; j < size; ++j) {
      EXPECT_NEAR(enc(j), testing_support::naive_utility(ranking, j, size), 1e-15);
      EXPECT_EQ(enc(j) > 0.0, o.acceptable(j));
    }
  }
}

TEST(Encoding, ProfileLayout) {
  const auto profile = testing_support::example1();
  const EncodedProfile enc = encode(profile);
  ASSERT_EQ(enc.p.rows(), 3);
  ASSERT_EQ(enc.q.cols(), 3);
  // w1: f2 > f3 > f1.
  EXPECT_DOUBLE_EQ(enc.p(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(enc.p(0, 0), 1.0 / 3.0);
  // f2: w2 > w3 > w1, stored as a column.
  EXPECT_DOUBLE_EQ(enc.q(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(enc.q(0, 1), 1.0 / 3.0);
}

TEST(PreferenceOrder, RejectsMalformedRankings) {
  EXPECT_THROW(PreferenceOrder({0, 1}), ValidationError);
  EXPECT_THROW(PreferenceOrder({0, 0, kUnmatched}), ValidationError);
  EXPECT_THROW(PreferenceOrder({0, 3, kUnmatched}), ValidationError);
  EXPECT_THROW(PreferenceOrder({kUnmatched, kUnmatched}), ValidationError);
  EXPECT_NO_THROW(PreferenceOrder({kUnmatched}));
}

TEST(PreferenceOrder, Queries) {
  const PreferenceOrder o({2, 0, kUnmatched, 1});
  EXPECT_EQ(o.size(), 3);
  EXPECT_EQ(o.num_acceptable(), 2);
  EXPECT_TRUE(o.acceptable(2));
  EXPECT_FALSE(o.acceptable(1));
  EXPECT_TRUE(o.prefers(0, kUnmatched));
  EXPECT_TRUE(o.prefers(kUnmatched, 1));
  EXPECT_EQ(o.rank_of(kUnmatched), 2);
  EXPECT_EQ(PreferenceOrder::identity(2), PreferenceOrder({0, 1, kUnmatched}));
}

TEST(Sampling, SameSeedSameProfiles) {
  DistributionConfig cfg;
  cfg.seed = 5;
  const auto a = sample_profiles(cfg, 50);
  const auto b = sample_profiles(cfg, 50);
  EXPECT_EQ(a, b);
  // Slices regenerate independently.
  const auto tail = sample_profiles(cfg, 10, 40);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(tail[i], a[40 + i]);
  cfg.seed = 6;
  EXPECT_NE(sample_profiles(cfg, 50), a);
}

TEST(Sampling, TruncationRateWithinThreeSigma) {
  DistributionConfig cfg{Correlation::Uncorrelated, 0.0, 0.2, 4, 4, 3};
  const int count = 20000;
  const auto profiles = sample_profiles(cfg, count);
  long long truncated = 0, total = 0;
  for (const auto& p : profiles) {
    for (const auto* side : {&p.workers, &p.firms}) {
      for (const auto& o : *side) {
        ++total;
        if (o.num_acceptable() < o.size()) ++truncated;
      }
    }
  }
  const double rate = static_cast<double>(truncated) / total;
  const double sigma = std::sqrt(0.2 * 0.8 / total);
  EXPECT_NEAR(rate, 0.2, 3 * sigma);
}

TEST(Sampling, TruncationPositionIsUniform) {
  CounterRng rng(17);
  std::map<int, int> counts;
  const int draws = 40000;
  for (int i = 0; i < draws; ++i) counts[sample_order(3, 1.0, rng).num_acceptable()]++;
  ASSERT_EQ(counts.size(), 3u);  // 0, 1 or 2 acceptable partners
  for (const auto& [k, c] : counts) {
    EXPECT_NEAR(static_cast<double>(c) / draws, 1.0 / 3.0, 0.015) << k;
  }
}

TEST(Sampling, FullOrdersAreUniform) {
  CounterRng rng(3);
  std::map<std::vector<int>, int> counts;
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) {
    counts[testing_support::ranking_of(sample_order(3, 0.0, rng))]++;
  }
  ASSERT_EQ(counts.size(), 6u);
  for (const auto& [r, c] : counts) {
    EXPECT_EQ(r.back(), kUnmatched);
    EXPECT_NEAR(static_cast<double>(c) / draws, 1.0 / 6.0, 0.01);
  }
}

TEST(Sampling, CorrelatedProfilesShareTheModalOrder) {
  DistributionConfig cfg{Correlation::Correlated, 0.75, 0.0, 4, 4, 9};
  const auto profiles = sample_profiles(cfg, 4000);
  double share = 0.0;
  for (const auto& p : profiles) {
    std::size_t best = 0;
    for (const auto& o : p.workers) {
      best = std::max<std::size_t>(best, std::count(p.workers.begin(), p.workers.end(), o));
    }
    share += static_cast<double>(best) / p.n;
  }
  EXPECT_GE(share / profiles.size(), 0.75);
}

TEST(Sampling, RejectsBadConfigs) {
  DistributionConfig cfg;
  cfg.p_trunc = 1.5;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = DistributionConfig{};
  cfg.n = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = DistributionConfig{};
  cfg.p_corr = -0.1;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Misreports, FullEnumeration) {
  const auto reports = enumerate_misreports(Side::Worker, 3);
  EXPECT_EQ(reports.size(), 24u);
  std::set<std::vector<int>> unique;
  for (const auto& r : reports) unique.insert(testing_support::ranking_of(r));
  EXPECT_EQ(unique.size(), 24u);
  EXPECT_EQ(reports.front(), PreferenceOrder::identity(3));
  EXPECT_THROW(enumerate_misreports(Side::Firm, 6), EnumerationOverflow);
  EXPECT_NO_THROW(enumerate_misreports(Side::Firm, 6, 7));
}

TEST(ProfileIo, RoundTrip) {
  DistributionConfig cfg{Correlation::Uncorrelated, 0.0, 0.5, 3, 4, 2};
  const auto profiles = sample_profiles(cfg, 30);
  const auto path = std::filesystem::temp_directory_path() / "matchnet_io_roundtrip.txt";
  write_profiles(path, profiles, "test header");
  EXPECT_EQ(read_profiles(path), profiles);
  std::filesystem::remove(path);
  for (const auto& p : profiles) EXPECT_EQ(parse_profile(format_profile(p)), p);
}

TEST(ProfileIo, ErrorsNameTheLine) {
  const auto path = std::filesystem::temp_directory_path() / "matchnet_io_bad.txt";
  {
    std::ofstream out(path);
    out << "# comment\n\nf1,_|w1,_\nf1,f1,_|w1,_\n";
  }
  try {
    read_profiles(path);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(":4:"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
  EXPECT_THROW(read_profiles("/nonexistent/profiles.txt"), IoError);
  EXPECT_THROW(parse_profile("f1,_"), ValidationError);
  EXPECT_THROW(parse_profile("f2,_|w1,_"), ValidationError);
}

TEST(Rng, SplitStreamsAreStableAndDistinct) {
  CounterRng root(42);
  CounterRng a = root.split(3);
  root.next_u64();
  CounterRng b = root.split(3);
  EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(root.split(4).next_u64(), root.split(3).next_u64());
  CounterRng u(1);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_LT(u.uniform_int(7), 7u);
    const double x = u.uniform();
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
}
