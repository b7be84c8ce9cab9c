#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "matchnet/mechanisms.hpp"
#include "matchnet/prefs.hpp"

namespace matchnet {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kLeakySlope = 0.01;

struct NetworkDims {
  int n = 4;
  int m = 4;
  int hidden_layers = 4;  // R
  int hidden_units = 256;  // J

  int input_width() const { return 2 * n * m; }
  int score_width() const { return (n + 1) * m; }        // s, (n+1) x m
  int score_prime_width() const { return n * (m + 1); }  // s', n x (m+1)
  int output_width() const { return score_width() + score_prime_width(); }

  void validate() const;
  bool operator==(const NetworkDims&) const = default;
};

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::RowVectorXd bias;
};

/// Hidden layers followed by the output layer.
struct NetworkParams {
  std::vector<Layer> layers;

  std::size_t num_parameters() const;

  /// Shapes agree with `dims` and all entries are finite.
  void validate(const NetworkDims& dims) const;

  /// Same shapes, all zeros.
  NetworkParams zeros_like() const;

  /// All weights and biases, layer by layer (weights row-major first).
  Eigen::VectorXd flatten() const;
  /// Inverse of flatten(); the vector length must equal num_parameters().
  void assign_flat(const Eigen::VectorXd& flat);
};

/// (n+1) x (m+1) 0/1 mask. Entry (w, f) is zero iff the pair is unacceptable
/// to w or to f; the last row and last column (outside option) are ones.
using MaskMatrix = Eigen::MatrixXd;

MaskMatrix build_mask(const PreferenceProfile& profile);

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases. With
/// `zero` set every parameter is 0.
NetworkParams init_params(const NetworkDims& dims, std::uint64_t seed,
                          bool zero = false);

// --- Batched evaluation -----------------------------------------------------

/// Network inputs for a batch of profiles, one row per profile.
///
/// x holds p then q, both row-major (index w * m + f). score_mask and
/// score_prime_mask are the mask restricted to the shapes of s and s',
/// flattened row-major.
struct NetInputs {
  RowMatrix x;
  RowMatrix score_mask;
  RowMatrix score_prime_mask;

  Eigen::Index rows() const { return x.rows(); }
};

NetInputs make_inputs(const NetworkDims& dims,
                      std::span<const PreferenceProfile> profiles);

/// Writes the encoding and mask of one profile into row `row` of `inputs`.
void fill_inputs(const NetworkDims& dims, const EncodedProfile& enc,
                 const MaskMatrix& mask, NetInputs& inputs, Eigen::Index row);

/// Marginals for every row of `inputs`, flattened row-major (w * m + f).
/// Throws NumericError naming the layer where a non-finite value appeared.
RowMatrix forward_batch(const NetworkParams& params, const NetworkDims& dims,
                        const NetInputs& inputs);

/// Forward pass for a single profile.
RandomizedMatching forward(const NetworkParams& params, const NetworkDims& dims,
                           const EncodedProfile& enc, const MaskMatrix& mask);

RandomizedMatching unflatten_row(const RowMatrix& flat, Eigen::Index row,
                                 int n, int m);

/// Learned mechanism behind the common Mechanism interface.
class NetMechanism final : public Mechanism {
 public:
  NetMechanism(NetworkParams params, NetworkDims dims, std::string label = "net");

  RandomizedMatching evaluate(const PreferenceProfile& profile) const override;
  std::vector<RandomizedMatching> evaluate_batch(
      std::span<const PreferenceProfile> profiles) const override;
  std::string label() const override { return label_; }

  const NetworkParams& params() const { return params_; }
  const NetworkDims& dims() const { return dims_; }

 private:
  NetworkParams params_;
  NetworkDims dims_;
  std::string label_;
};

// --- Checkpoints -------------------------------------------------------------
//
// Little-endian binary: "MTCH", u32 version (1), u32 n, m, R, J,
// u32 round(lambda * 1e6), u64 seed, then for each layer the weights
// (row-major f32) followed by the biases (f32).

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetworkDims dims;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  NetworkParams params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws IoError on unreadable or truncated files and ValidationError on a
/// bad magic or an unknown version.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace matchnet
