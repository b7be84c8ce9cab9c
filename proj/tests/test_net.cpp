#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "matchnet/error.hpp"
#include "matchnet/metrics.hpp"
#include "matchnet/net.hpp"
#include "support.hpp"

using namespace matchnet;

namespace {

std::vector<PreferenceProfile> profiles(int n, int m, std::size_t count, std::uint64_t seed,
                                        double p_trunc = 0.4) {
  return sample_profiles(DistributionConfig{Correlation::Uncorrelated, 0.0, p_trunc, n, m, seed},
                         count);
}

}  // namespace

TEST(Network, DimsAndParameterCount) {
  NetworkDims d{3, 2, 2, 5};
  EXPECT_EQ(d.input_width(), 12);
  EXPECT_EQ(d.output_width(), 4 * 2 + 3 * 3);
  const auto params = init_params(d, 0);
  ASSERT_EQ(params.layers.size(), 3u);
  EXPECT_EQ(params.num_parameters(), (12 * 5 + 5) + (5 * 5 + 5) + (5 * 17 + 17));
  EXPECT_THROW((NetworkDims{0, 2, 1, 4}.validate()), ValidationError);
  EXPECT_THROW(params.validate(NetworkDims{3, 3, 2, 5}), ValidationError);
}

TEST(Network, InitIsSeededAndBounded) {
  NetworkDims d{3, 3, 2, 16};
  const auto a = init_params(d, 7), b = init_params(d, 7), c = init_params(d, 8);
  EXPECT_EQ(a.flatten(), b.flatten());
  EXPECT_NE(a.flatten(), c.flatten());
  const double bound = 1.0 / std::sqrt(static_cast<double>(d.input_width()));
  EXPECT_LE(a.layers[0].weight.cwiseAbs().maxCoeff(), bound);
  EXPECT_TRUE(a.layers[0].bias.isZero());
  EXPECT_TRUE(init_params(d, 7, true).flatten().isZero());
}

TEST(Network, FlattenRoundTrip) {
  NetworkDims d{2, 3, 1, 4};
  auto params = init_params(d, 1);
  const Eigen::VectorXd flat = params.flatten();
  auto other = params.zeros_like();
  other.assign_flat(flat);
  EXPECT_EQ(other.flatten(), flat);
  EXPECT_EQ(flat(0), params.layers[0].weight(0, 0));
  EXPECT_EQ(flat(1), params.layers[0].weight(0, 1));
  EXPECT_THROW(other.assign_flat(Eigen::VectorXd::Zero(3)), ValidationError);
}

TEST(Network, MaskMarksUnacceptablePairs) {
  const auto p = parse_profile("f1,_,f2;f2,f1,_|w1,w2,_;_,w2,w1");
  const MaskMatrix mask = build_mask(p);
  ASSERT_EQ(mask.rows(), 3);
  EXPECT_EQ(mask(0, 0), 1.0);
  EXPECT_EQ(mask(0, 1), 0.0);  // w1 rejects f2
  EXPECT_EQ(mask(1, 1), 0.0);  // f2 rejects everyone
  EXPECT_EQ(mask(1, 0), 1.0);
  EXPECT_EQ(mask(2, 0), 1.0);
  EXPECT_EQ(mask(0, 2), 1.0);
}

TEST(Network, ZeroParametersGiveUniformMarginals) {
  NetworkDims d{4, 4, 4, 32};
  const auto params = init_params(d, 0, true);
  const auto p = profiles(4, 4, 1, 3, 0.0).front();
  const auto r = forward(params, d, encode(p), build_mask(p));
  for (int w = 0; w < 4; ++w) {
    for (int f = 0; f < 4; ++f) EXPECT_NEAR(r.r(w, f), 0.2, 1e-12);
  }
}

TEST(Network, OutputsAreFeasibleAndRespectTheMask) {
  NetworkDims d{3, 4, 2, 16};
  const auto data = profiles(3, 4, 300, 5);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    NetMechanism net(init_params(d, seed), d);
    const auto outs = net.evaluate_batch(data);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& r = outs[i];
      EXPECT_GE(r.r.minCoeff(), 0.0);
      EXPECT_LE(r.r.rowwise().sum().maxCoeff(), 1.0 + 1e-12);
      EXPECT_LE(r.r.colwise().sum().maxCoeff(), 1.0 + 1e-12);
      const MaskMatrix mask = build_mask(data[i]);
      for (int w = 0; w < 3; ++w) {
        for (int f = 0; f < 4; ++f) {
          if (mask(w, f) == 0.0) EXPECT_EQ(r.r(w, f), 0.0);
        }
      }
      EXPECT_EQ(irv_profile(r, encode(data[i])), 0.0);
    }
  }
}

TEST(Network, BatchAgreesWithSingleForward) {
  NetworkDims d{3, 3, 2, 8};
  const auto params = init_params(d, 2);
  const auto data = profiles(3, 3, 20, 6);
  NetMechanism net(params, d);
  const auto batch = net.evaluate_batch(data);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto single = forward(params, d, encode(data[i]), build_mask(data[i]));
    EXPECT_LE((single.r - batch[i].r).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Network, NonFiniteActivationIsNumericError) {
  NetworkDims d{2, 2, 1, 4};
  auto params = init_params(d, 0);
  params.layers[0].bias(0) = 1e308;
  params.layers[0].bias(1) = 1e308;
  const auto data = profiles(2, 2, 1, 1);
  EXPECT_THROW(forward_batch(params, d, make_inputs(d, data)), NumericError);
}

TEST(Checkpoint, RoundTripAtFloatPrecision) {
  NetworkDims d{3, 3, 2, 8};
  Checkpoint ck{d, 0.3, 99, init_params(d, 4)};
  const auto path = std::filesystem::temp_directory_path() / "matchnet_ckpt_test.mtch";
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(back.dims, d);
  EXPECT_NEAR(back.lambda, 0.3, 1e-9);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_LE((back.params.flatten() - ck.params.flatten()).cwiseAbs().maxCoeff(), 1e-7);
  // Saving the loaded weights reproduces the file byte for byte.
  const auto again = std::filesystem::temp_directory_path() / "matchnet_ckpt_test2.mtch";
  save_checkpoint(again, back);
  std::ifstream a(path, std::ios::binary), b(again, std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}),
            std::string(std::istreambuf_iterator<char>(b), {}));
  std::filesystem::remove(path);
  std::filesystem::remove(again);
}

TEST(Checkpoint, RejectsBadFiles) {
  const auto path = std::filesystem::temp_directory_path() / "matchnet_ckpt_bad.mtch";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE and some bytes";
  }
  EXPECT_THROW(load_checkpoint(path), ValidationError);
  {
    std::ofstream out(path, std::ios::binary);
    out << "MTCH";
  }
  EXPECT_THROW(load_checkpoint(path), IoError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.mtch"), IoError);
}
