#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "matchnet/autodiff.hpp"
#include "matchnet/net.hpp"
#include "matchnet/prefs.hpp"

namespace matchnet {

struct TrainConfig {
  double lambda = 0.5;
  int batch_size = 1024;
  long long iterations = 50000;
  double base_lr = 0.005;
  std::vector<long long> lr_milestones{10000, 25000};
  NetworkDims dims;
  DistributionConfig dist;
  double weight_decay = 0.01;
  long long eval_every = 1000;
  int test_size = 204800;
  /// Seeds parameter initialisation and every sampled profile.
  std::uint64_t seed = 0;
  int enumeration_cap = kDefaultEnumerationCap;
  std::filesystem::path checkpoint_path;  // empty: no checkpoints
  std::filesystem::path log_path;         // empty: no CSV log

  /// Full-scale settings for 4x4 uncorrelated preferences.
  static TrainConfig paper_uncorrelated();
  /// Full-scale settings for 4x4 correlated preferences.
  static TrainConfig paper_correlated(double p_corr);
  /// Small settings that train in minutes on one core (3x3 uncorrelated).
  static TrainConfig desk();

  void validate() const;
};

/// The misreport of `agent` that most increases a cumulative match
/// probability, with the threshold partner at which the gain is realised.
/// When no report gains anything, `report` is the truth, `gain` is 0 and
/// `threshold` is kUnmatched.
struct DefeatingReport {
  AgentId agent;
  PreferenceOrder report;
  double gain = 0.0;
  int threshold = kUnmatched;
};

/// Exhaustive search over the reports of `agent` at the current parameters.
/// Ties go to the report that comes first in enumeration order.
DefeatingReport find_defeating_report(const NetworkParams& params,
                                      const NetworkDims& dims,
                                      const PreferenceProfile& profile,
                                      AgentId agent,
                                      int cap = kDefaultEnumerationCap);

/// Defeating reports for every agent (workers, then firms) of every profile.
std::vector<std::vector<DefeatingReport>> resolve_defeating_reports(
    const NetworkParams& params, const NetworkDims& dims,
    std::span<const PreferenceProfile> profiles,
    int cap = kDefaultEnumerationCap);

struct LossVars {
  ad::Var loss;
  ad::Var stv;  // mean stability violation over the batch
  ad::Var rgt;  // mean regret surrogate over the batch
  std::vector<ad::Var> weights;  // one per layer
  std::vector<ad::Var> biases;
};

/// Records lambda * stv + (1 - lambda) * regret on `tape`. The regret of an
/// agent is the cumulative-probability gain of its defeating report at the
/// recorded threshold, floored at zero; report and threshold are constants.
LossVars record_loss(ad::Tape& tape, const NetworkParams& params,
                     const NetworkDims& dims,
                     std::span<const PreferenceProfile> profiles,
                     const std::vector<std::vector<DefeatingReport>>& reports,
                     double lambda);

struct LossResult {
  double loss = 0.0;
  double stv = 0.0;
  double rgt = 0.0;
  /// Gradient in NetworkParams::flatten() order.
  Eigen::VectorXd grad;
};

/// Resolves defeating reports at `params`, records the loss and runs the
/// backward pass.
LossResult loss_minibatch(const NetworkParams& params, const NetworkDims& dims,
                          std::span<const PreferenceProfile> profiles,
                          double lambda, int cap = kDefaultEnumerationCap);

struct TrainLogRow {
  long long iter = 0;
  double loss = 0.0;  // mean minibatch loss since the previous row
  double stv = 0.0;   // held-out
  double rgt = 0.0;   // held-out
  double lr = 0.0;
};

struct TrainResult {
  NetworkParams params;
  std::vector<TrainLogRow> log;
  std::vector<double> losses;  // minibatch loss per iteration
};

/// Held-out stability violation and regret at `params`.
struct HeldOutMetrics {
  double stv = 0.0;
  double rgt = 0.0;
};

HeldOutMetrics heldout_metrics(const NetworkParams& params,
                               const NetworkDims& dims,
                               std::span<const PreferenceProfile> profiles,
                               int cap = kDefaultEnumerationCap);

/// Profiles used for held-out evaluation during training.
std::vector<PreferenceProfile> heldout_profiles(const TrainConfig& config);

/// Adam training on freshly sampled minibatches. Writes the log and
/// checkpoints (every eval_every iterations and at the end) when the
/// corresponding paths are set. A numeric failure aborts training and
/// leaves the last written checkpoint untouched.
TrainResult train(const TrainConfig& config);

}  // namespace matchnet
