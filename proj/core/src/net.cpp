#include "matchnet/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "matchnet/detail/activations.hpp"
#include "matchnet/error.hpp"
#include "matchnet/rng.hpp"

namespace matchnet {

void NetworkDims::validate() const {
  if (n < 1 || m < 1) throw ValidationError("market sizes must be positive");
  if (hidden_layers < 1) throw ValidationError("need at least one hidden layer");
  if (hidden_units < 1) throw ValidationError("need at least one hidden unit");
}

std::size_t NetworkParams::num_parameters() const {
  std::size_t total = 0;
  for (const auto& layer : layers) {
    total += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  }
  return total;
}

void NetworkParams::validate(const NetworkDims& dims) const {
  dims.validate();
  if (static_cast<int>(layers.size()) != dims.hidden_layers + 1) {
    throw ValidationError("parameter layer count does not match dims");
  }
  int fan_in = dims.input_width();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const int fan_out = l + 1 == layers.size() ? dims.output_width() : dims.hidden_units;
    const auto& layer = layers[l];
    if (layer.weight.rows() != fan_out || layer.weight.cols() != fan_in ||
        layer.bias.size() != fan_out) {
      throw ValidationError("layer " + std::to_string(l) +
                            " has the wrong shape for the network dims");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw ValidationError("layer " + std::to_string(l) +
                            " has non-finite parameters");
    }
    fan_in = fan_out;
  }
}

NetworkParams NetworkParams::zeros_like() const {
  NetworkParams out;
  for (const auto& layer : layers) {
    out.layers.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                          Eigen::RowVectorXd::Zero(layer.bias.size())});
  }
  return out;
}

Eigen::VectorXd NetworkParams::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(num_parameters()));
  Eigen::Index k = 0;
  for (const auto& layer : layers) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) flat(k++) = layer.weight(i, j);
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) flat(k++) = layer.bias(i);
  }
  return flat;
}

void NetworkParams::assign_flat(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(num_parameters())) {
    throw ValidationError("flat parameter vector has the wrong length");
  }
  Eigen::Index k = 0;
  for (auto& layer : layers) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) layer.weight(i, j) = flat(k++);
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = flat(k++);
  }
}

MaskMatrix build_mask(const PreferenceProfile& profile) {
  MaskMatrix mask = MaskMatrix::Ones(profile.n + 1, profile.m + 1);
  for (int w = 0; w < profile.n; ++w) {
    for (int f = 0; f < profile.m; ++f) {
      const bool ok = profile.workers[w].acceptable(f) &&
                      profile.firms[f].acceptable(w);
      mask(w, f) = ok ? 1.0 : 0.0;
    }
  }
  return mask;
}

NetworkParams init_params(const NetworkDims& dims, std::uint64_t seed,
                          bool zero) {
  dims.validate();
  NetworkParams params;
  const CounterRng root(seed);
  int fan_in = dims.input_width();
  for (int l = 0; l <= dims.hidden_layers; ++l) {
    const int fan_out = l == dims.hidden_layers ? dims.output_width() : dims.hidden_units;
    Layer layer{Eigen::MatrixXd::Zero(fan_out, fan_in),
                Eigen::RowVectorXd::Zero(fan_out)};
    if (!zero) {
      CounterRng rng = root.split(static_cast<std::uint64_t>(l));
      const double bound = std::sqrt(1.0 / fan_in);
      for (int i = 0; i < fan_out; ++i) {
        for (int j = 0; j < fan_in; ++j) {
          layer.weight(i, j) = bound * (2.0 * rng.uniform() - 1.0);
        }
      }
    }
    params.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return params;
}

NetInputs make_inputs(const NetworkDims& dims,
                      std::span<const PreferenceProfile> profiles) {
  const auto rows = static_cast<Eigen::Index>(profiles.size());
  NetInputs inputs{RowMatrix(rows, dims.input_width()),
                   RowMatrix(rows, dims.score_width()),
                   RowMatrix(rows, dims.score_prime_width())};
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& profile = profiles[static_cast<std::size_t>(i)];
    if (profile.n != dims.n || profile.m != dims.m) {
      throw ValidationError("profile is " + std::to_string(profile.n) + "x" +
                            std::to_string(profile.m) + " but the network expects " +
                            std::to_string(dims.n) + "x" + std::to_string(dims.m));
    }
    fill_inputs(dims, encode(profile), build_mask(profile), inputs, i);
  }
  return inputs;
}

void fill_inputs(const NetworkDims& dims, const EncodedProfile& enc,
                 const MaskMatrix& mask, NetInputs& inputs, Eigen::Index row) {
  const int n = dims.n;
  const int m = dims.m;
  for (int w = 0; w < n; ++w) {
    for (int f = 0; f < m; ++f) {
      inputs.x(row, w * m + f) = enc.p(w, f);
      inputs.x(row, n * m + w * m + f) = enc.q(w, f);
    }
  }
  for (int w = 0; w <= n; ++w) {
    for (int f = 0; f < m; ++f) inputs.score_mask(row, w * m + f) = mask(w, f);
  }
  for (int w = 0; w < n; ++w) {
    for (int f = 0; f <= m; ++f) {
      inputs.score_prime_mask(row, w * (m + 1) + f) = mask(w, f);
    }
  }
}

RowMatrix forward_batch(const NetworkParams& params, const NetworkDims& dims,
                        const NetInputs& inputs) {
  const int n = dims.n;
  const int m = dims.m;
  const Eigen::Index rows = inputs.rows();
  if (inputs.x.cols() != dims.input_width()) {
    throw ValidationError("input width does not match network dims");
  }

  RowMatrix h = inputs.x;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    RowMatrix z = h * layer.weight.transpose();
    z.rowwise() += layer.bias;
    if (l + 1 < params.layers.size()) {
      detail::leaky_relu_inplace(z, kLeakySlope);
    }
    if (!detail::all_finite(z)) {
      throw NumericError("non-finite activation in layer " + std::to_string(l));
    }
    h = std::move(z);
  }

  const int sw = dims.score_width();
  RowMatrix r(rows, n * m);
  std::vector<double> s_bar(static_cast<std::size_t>(sw));
  std::vector<double> sp_bar(static_cast<std::size_t>(dims.score_prime_width()));
  const RowMatrix sp = detail::softplus(h);
  std::vector<double> col_sum(static_cast<std::size_t>(m));
  std::vector<double> row_sum(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (int k = 0; k < sw; ++k) s_bar[k] = sp(i, k) * inputs.score_mask(i, k);
    for (int k = 0; k < dims.score_prime_width(); ++k) {
      sp_bar[k] = sp(i, sw + k) * inputs.score_prime_mask(i, k);
    }
    for (int f = 0; f < m; ++f) {
      double total = 0.0;
      for (int v = 0; v <= n; ++v) total += s_bar[v * m + f];
      col_sum[f] = total;
    }
    for (int w = 0; w < n; ++w) {
      double total = 0.0;
      for (int g = 0; g <= m; ++g) total += sp_bar[w * (m + 1) + g];
      row_sum[w] = total;
    }
    for (int w = 0; w < n; ++w) {
      for (int f = 0; f < m; ++f) {
        const double a = s_bar[w * m + f] / col_sum[f];
        const double b = sp_bar[w * (m + 1) + f] / row_sum[w];
        r(i, w * m + f) = a <= b ? a : b;
      }
    }
  }
  if (!detail::all_finite(r)) {
    throw NumericError("non-finite marginal in the normalization layer");
  }
  return r;
}

RandomizedMatching unflatten_row(const RowMatrix& flat, Eigen::Index row, int n,
                                 int m) {
  RandomizedMatching out{Eigen::MatrixXd(n, m)};
  for (int w = 0; w < n; ++w) {
    for (int f = 0; f < m; ++f) out.r(w, f) = flat(row, w * m + f);
  }
  return out;
}

RandomizedMatching forward(const NetworkParams& params, const NetworkDims& dims,
                           const EncodedProfile& enc, const MaskMatrix& mask) {
  if (enc.p.rows() != dims.n || enc.p.cols() != dims.m ||
      mask.rows() != dims.n + 1 || mask.cols() != dims.m + 1) {
    throw ValidationError("forward: input shapes do not match network dims");
  }
  NetInputs inputs{RowMatrix(1, dims.input_width()),
                   RowMatrix(1, dims.score_width()),
                   RowMatrix(1, dims.score_prime_width())};
  fill_inputs(dims, enc, mask, inputs, 0);
  return unflatten_row(forward_batch(params, dims, inputs), 0, dims.n, dims.m);
}

NetMechanism::NetMechanism(NetworkParams params, NetworkDims dims,
                           std::string label)
    : params_(std::move(params)), dims_(dims), label_(std::move(label)) {
  params_.validate(dims_);
}

RandomizedMatching NetMechanism::evaluate(const PreferenceProfile& profile) const {
  return evaluate_batch(std::span<const PreferenceProfile>(&profile, 1)).front();
}

std::vector<RandomizedMatching> NetMechanism::evaluate_batch(
    std::span<const PreferenceProfile> profiles) const {
  const auto flat = forward_batch(params_, dims_, make_inputs(dims_, profiles));
  std::vector<RandomizedMatching> out;
  out.reserve(profiles.size());
  for (Eigen::Index i = 0; i < flat.rows(); ++i) {
    out.push_back(unflatten_row(flat, i, dims_.n, dims_.m));
  }
  return out;
}

// --- Checkpoints -------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'M', 'T', 'C', 'H'};

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw IoError("checkpoint is truncated");
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  }
  return static_cast<T>(value);
}

void put_f32(std::ostream& out, double value) {
  put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
}

double get_f32(std::istream& in) {
  return static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(in)));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  ckpt.params.validate(ckpt.dims);
  if (!(ckpt.lambda >= 0.0 && ckpt.lambda <= 1.0)) {
    throw ValidationError("checkpoint lambda must lie in [0, 1]");
  }
  // Write to a sibling file and rename so a crash never leaves a partial
  // checkpoint behind.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(kMagic, 4);
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.dims.n));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.dims.m));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.dims.hidden_layers));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.dims.hidden_units));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(std::lround(ckpt.lambda * 1e6)));
    put_le<std::uint64_t>(out, ckpt.seed);
    for (const auto& layer : ckpt.params.layers) {
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
        for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) put_f32(out, layer.weight(i, j));
      }
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) put_f32(out, layer.bias(i));
    }
    if (!out) throw IoError("error while writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in) throw IoError("checkpoint is truncated");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw ValidationError(path.string() + " is not a matchnet checkpoint");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.dims.n = static_cast<int>(get_le<std::uint32_t>(in));
  ckpt.dims.m = static_cast<int>(get_le<std::uint32_t>(in));
  ckpt.dims.hidden_layers = static_cast<int>(get_le<std::uint32_t>(in));
  ckpt.dims.hidden_units = static_cast<int>(get_le<std::uint32_t>(in));
  ckpt.lambda = get_le<std::uint32_t>(in) / 1e6;
  ckpt.seed = get_le<std::uint64_t>(in);
  ckpt.dims.validate();
  if (ckpt.dims.n > 64 || ckpt.dims.m > 64 || ckpt.dims.hidden_units > (1 << 16) ||
      ckpt.dims.hidden_layers > 1024) {
    throw ValidationError("checkpoint header has implausible dimensions");
  }
  ckpt.params = init_params(ckpt.dims, 0, /*zero=*/true);
  for (auto& layer : ckpt.params.layers) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) layer.weight(i, j) = get_f32(in);
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = get_f32(in);
  }
  return ckpt;
}

}  // namespace matchnet
