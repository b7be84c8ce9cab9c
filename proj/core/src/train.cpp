#include "matchnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "matchnet/error.hpp"
#include "matchnet/metrics.hpp"

namespace matchnet {

// --- Configuration -----------------------------------------------------------

TrainConfig TrainConfig::paper_uncorrelated() {
  TrainConfig cfg;
  cfg.dims = NetworkDims{4, 4, 4, 256};
  cfg.dist = DistributionConfig{Correlation::Uncorrelated, 0.0, 0.2, 4, 4, 0};
  cfg.batch_size = 1024;
  cfg.iterations = 50000;
  cfg.base_lr = 0.005;
  cfg.lr_milestones = {10000, 25000};
  cfg.test_size = 204800;
  cfg.eval_every = 1000;
  return cfg;
}

TrainConfig TrainConfig::paper_correlated(double p_corr) {
  TrainConfig cfg = paper_uncorrelated();
  cfg.dist.kind = Correlation::Correlated;
  cfg.dist.p_corr = p_corr;
  cfg.base_lr = 0.002;
  return cfg;
}

TrainConfig TrainConfig::desk() {
  TrainConfig cfg;
  cfg.dims = NetworkDims{3, 3, 4, 64};
  cfg.dist = DistributionConfig{Correlation::Uncorrelated, 0.0, 0.2, 3, 3, 0};
  cfg.batch_size = 128;
  cfg.iterations = 2000;
  cfg.base_lr = 0.005;
  cfg.lr_milestones = {400, 1000};
  cfg.test_size = 2048;
  cfg.eval_every = 500;
  return cfg;
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ValidationError("lambda must lie in [0, 1]");
  }
  if (batch_size < 1) throw ValidationError("batch_size must be positive");
  if (iterations < 0) throw ValidationError("iterations must be non-negative");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) {
    throw ValidationError("base_lr must be positive");
  }
  if (!std::is_sorted(lr_milestones.begin(), lr_milestones.end())) {
    throw ValidationError("lr_milestones must be sorted ascending");
  }
  if (!(weight_decay >= 0.0)) {
    throw ValidationError("weight_decay must be non-negative");
  }
  if (eval_every < 1) throw ValidationError("eval_every must be positive");
  if (test_size < 1) throw ValidationError("test_size must be positive");
  dims.validate();
  dist.validate();
  if (dist.n != dims.n || dist.m != dims.m) {
    throw ValidationError("distribution and network market sizes differ");
  }
}

// --- Defeating reports -------------------------------------------------------

namespace {

inline int flat_index(AgentId agent, int partner, int m) {
  return agent.side == Side::Worker ? agent.index * m + partner
                                    : partner * m + agent.index;
}

struct ReportTable {
  std::vector<PreferenceOrder> orders;
  std::vector<Eigen::VectorXd> encodings;
};

ReportTable make_table(Side side, int size, int cap) {
  ReportTable table{enumerate_misreports(side, size, cap), {}};
  for (const auto& order : table.orders) table.encodings.push_back(encode_order(order));
  return table;
}

std::vector<AgentId> agents_of(int n, int m) {
  std::vector<AgentId> agents;
  for (int w = 0; w < n; ++w) agents.push_back({Side::Worker, w});
  for (int f = 0; f < m; ++f) agents.push_back({Side::Firm, f});
  return agents;
}

// Patches the copy of a truthful row so that `agent` reports `report`.
void patch_row(const NetworkDims& dims, const PreferenceProfile& profile,
               AgentId agent, const PreferenceOrder& report,
               const Eigen::VectorXd& report_enc, NetInputs& in,
               Eigen::Index row) {
  const int n = dims.n;
  const int m = dims.m;
  if (agent.side == Side::Worker) {
    const int w = agent.index;
    for (int f = 0; f < m; ++f) {
      in.x(row, w * m + f) = report_enc(f);
      const double ok =
          report.acceptable(f) && profile.firms[f].acceptable(w) ? 1.0 : 0.0;
      in.score_mask(row, w * m + f) = ok;
      in.score_prime_mask(row, w * (m + 1) + f) = ok;
    }
  } else {
    const int f = agent.index;
    for (int w = 0; w < n; ++w) {
      in.x(row, n * m + w * m + f) = report_enc(w);
      const double ok =
          profile.workers[w].acceptable(f) && report.acceptable(w) ? 1.0 : 0.0;
      in.score_mask(row, w * m + f) = ok;
      in.score_prime_mask(row, w * (m + 1) + f) = ok;
    }
  }
}

struct SearchResult {
  std::vector<std::vector<DefeatingReport>> reports;
  RowMatrix truth;  // truthful marginals, one row per profile
};

constexpr Eigen::Index kMaxRowsPerChunk = 16384;

SearchResult search_reports(const NetworkParams& params, const NetworkDims& dims,
                            std::span<const PreferenceProfile> profiles,
                            int cap) {
  const int n = dims.n;
  const int m = dims.m;
  const ReportTable worker_table = make_table(Side::Worker, m, cap);
  const ReportTable firm_table = make_table(Side::Firm, n, cap);
  const auto agents = agents_of(n, m);
  const Eigen::Index rows_per_profile =
      1 + n * static_cast<Eigen::Index>(worker_table.orders.size()) +
      m * static_cast<Eigen::Index>(firm_table.orders.size());
  const auto profiles_per_chunk = static_cast<std::size_t>(
      std::max<Eigen::Index>(1, kMaxRowsPerChunk / rows_per_profile));

  SearchResult result;
  result.reports.resize(profiles.size());
  result.truth.resize(static_cast<Eigen::Index>(profiles.size()), n * m);

  for (std::size_t begin = 0; begin < profiles.size(); begin += profiles_per_chunk) {
    const std::size_t end = std::min(profiles.size(), begin + profiles_per_chunk);
    const auto rows = static_cast<Eigen::Index>(end - begin) * rows_per_profile;
    NetInputs in{RowMatrix(rows, dims.input_width()),
                 RowMatrix(rows, dims.score_width()),
                 RowMatrix(rows, dims.score_prime_width())};
    Eigen::Index row = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& profile = profiles[i];
      if (profile.n != n || profile.m != m) {
        throw ValidationError("profile size does not match the network");
      }
      const Eigen::Index base = row;
      fill_inputs(dims, encode(profile), build_mask(profile), in, base);
      ++row;
      for (const AgentId& agent : agents) {
        const auto& table = agent.side == Side::Worker ? worker_table : firm_table;
        for (std::size_t k = 0; k < table.orders.size(); ++k, ++row) {
          in.x.row(row) = in.x.row(base);
          in.score_mask.row(row) = in.score_mask.row(base);
          in.score_prime_mask.row(row) = in.score_prime_mask.row(base);
          patch_row(dims, profile, agent, table.orders[k], table.encodings[k], in, row);
        }
      }
    }
    const RowMatrix out = forward_batch(params, dims, in);

    row = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& profile = profiles[i];
      const Eigen::Index base = row++;
      result.truth.row(static_cast<Eigen::Index>(i)) = out.row(base);
      auto& per_agent = result.reports[i];
      per_agent.reserve(agents.size());
      for (const AgentId& agent : agents) {
        const auto& table = agent.side == Side::Worker ? worker_table : firm_table;
        const auto& truth_order = profile.order(agent);
        DefeatingReport best{agent, truth_order, 0.0, kUnmatched};
        for (std::size_t k = 0; k < table.orders.size(); ++k, ++row) {
          double diff = 0.0;
          for (int partner : truth_order.acceptable_partners()) {
            const int idx = flat_index(agent, partner, m);
            diff += out(row, idx) - out(base, idx);
            if (diff > best.gain) {
              best.gain = diff;
              best.threshold = partner;
              best.report = table.orders[k];
            }
          }
        }
        per_agent.push_back(std::move(best));
      }
    }
  }
  return result;
}

}  // namespace

DefeatingReport find_defeating_report(const NetworkParams& params,
                                      const NetworkDims& dims,
                                      const PreferenceProfile& profile,
                                      AgentId agent, int cap) {
  const auto result = search_reports(
      params, dims, std::span<const PreferenceProfile>(&profile, 1), cap);
  const auto& reports = result.reports.front();
  const std::size_t slot = agent.side == Side::Worker
                               ? static_cast<std::size_t>(agent.index)
                               : static_cast<std::size_t>(profile.n + agent.index);
  return reports.at(slot);
}

std::vector<std::vector<DefeatingReport>> resolve_defeating_reports(
    const NetworkParams& params, const NetworkDims& dims,
    std::span<const PreferenceProfile> profiles, int cap) {
  return search_reports(params, dims, profiles, cap).reports;
}

HeldOutMetrics heldout_metrics(const NetworkParams& params,
                               const NetworkDims& dims,
                               std::span<const PreferenceProfile> profiles,
                               int cap) {
  if (profiles.empty()) throw ValidationError("empty held-out set");
  const auto result = search_reports(params, dims, profiles, cap);
  HeldOutMetrics out;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto& profile = profiles[i];
    const auto r = unflatten_row(result.truth, static_cast<Eigen::Index>(i),
                                 profile.n, profile.m);
    out.stv += stv_profile(r, encode(profile));
    double workers = 0.0;
    double firms = 0.0;
    for (const auto& report : result.reports[i]) {
      (report.agent.side == Side::Worker ? workers : firms) += report.gain;
    }
    out.rgt += 0.5 * (workers / profile.n + firms / profile.m);
  }
  out.stv /= static_cast<double>(profiles.size());
  out.rgt /= static_cast<double>(profiles.size());
  return out;
}

// --- Loss --------------------------------------------------------------------

namespace {

ad::Matrix to_row_major(const Eigen::MatrixXd& m) { return ad::Matrix(m); }

double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace

LossVars record_loss(ad::Tape& tape, const NetworkParams& params,
                     const NetworkDims& dims,
                     std::span<const PreferenceProfile> profiles,
                     const std::vector<std::vector<DefeatingReport>>& reports,
                     double lambda) {
  params.validate(dims);
  if (profiles.empty()) throw ValidationError("loss needs at least one profile");
  if (reports.size() != profiles.size()) {
    throw ValidationError("one list of defeating reports per profile required");
  }
  const int n = dims.n;
  const int m = dims.m;
  const int nm = n * m;
  const auto batch = static_cast<int>(profiles.size());

  // Rows: truthful profiles first, then one row per report with positive gain.
  std::vector<PreferenceProfile> rows(profiles.begin(), profiles.end());
  struct Anchor {
    int truth_row;
    int report_row;
    const DefeatingReport* report;
  };
  std::vector<Anchor> anchors;
  for (int b = 0; b < batch; ++b) {
    for (const auto& report : reports[b]) {
      if (report.gain <= 0.0) continue;
      anchors.push_back({b, static_cast<int>(rows.size()), &report});
      rows.push_back(profiles[b].with_report(report.agent, report.report));
    }
  }
  const NetInputs in = make_inputs(dims, rows);

  LossVars vars;
  ad::Var h = tape.constant(in.x);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    vars.weights.push_back(tape.leaf(to_row_major(params.layers[l].weight)));
    vars.biases.push_back(tape.leaf(ad::Matrix(params.layers[l].bias)));
    h = tape.add_row_bias(tape.matmul_t(h, vars.weights.back()), vars.biases.back());
    if (l + 1 < params.layers.size()) h = tape.leaky_relu(h, kLeakySlope);
  }

  // Normalisation head.
  const int sw = dims.score_width();
  ad::Matrix mask(in.rows(), dims.output_width());
  mask << in.score_mask, in.score_prime_mask;
  const ad::Var scores = tape.mul_const(tape.softplus(h), std::move(mask));

  ad::ColumnMap num_s{dims.output_width(), nm, {}};
  ad::ColumnMap den_s{dims.output_width(), nm, {}};
  ad::ColumnMap num_sp{dims.output_width(), nm, {}};
  ad::ColumnMap den_sp{dims.output_width(), nm, {}};
  for (int w = 0; w < n; ++w) {
    for (int f = 0; f < m; ++f) {
      const int out = w * m + f;
      num_s.terms.push_back({out, w * m + f, 1.0});
      for (int v = 0; v <= n; ++v) den_s.terms.push_back({out, v * m + f, 1.0});
      num_sp.terms.push_back({out, sw + w * (m + 1) + f, 1.0});
      for (int g = 0; g <= m; ++g) den_sp.terms.push_back({out, sw + w * (m + 1) + g, 1.0});
    }
  }
  const ad::Var col_norm = tape.div(tape.linear(scores, num_s), tape.linear(scores, den_s));
  const ad::Var row_norm = tape.div(tape.linear(scores, num_sp), tape.linear(scores, den_sp));
  const ad::Var r = tape.min(col_norm, row_norm);

  // Stability violation on the truthful rows. Both envy masses are affine
  // in r with coefficients fixed by the true encoding.
  ad::SparseMap firm_env{batch, nm, {}, ad::Matrix::Zero(batch, nm)};
  ad::SparseMap worker_env{batch, nm, {}, ad::Matrix::Zero(batch, nm)};
  for (int b = 0; b < batch; ++b) {
    const auto enc = encode(profiles[b]);
    for (int w = 0; w < n; ++w) {
      for (int f = 0; f < m; ++f) {
        const int out = w * m + f;
        // g_bot_f * max(q, 0) = max(q, 0) - sum_w' r(w', f) * max(q, 0)
        const double qpos = relu(enc.q(w, f));
        firm_env.offset(b, out) = qpos;
        for (int v = 0; v < n; ++v) {
          const double coef = relu(enc.q(w, f) - enc.q(v, f)) - qpos;
          if (coef != 0.0) firm_env.terms.push_back({b, out, b, v * m + f, coef});
        }
        const double ppos = relu(enc.p(w, f));
        worker_env.offset(b, out) = ppos;
        for (int g = 0; g < m; ++g) {
          const double coef = relu(enc.p(w, f) - enc.p(w, g)) - ppos;
          if (coef != 0.0) worker_env.terms.push_back({b, out, b, w * m + g, coef});
        }
      }
    }
  }
  const ad::Var pair_stv = tape.mul(tape.linear(r, firm_env), tape.linear(r, worker_env));
  vars.stv = tape.scale(tape.sum(pair_stv), 0.5 * (1.0 / m + 1.0 / n) / batch);

  // Regret surrogate: gain of each fixed defeating report at its threshold.
  if (anchors.empty()) {
    vars.rgt = tape.constant(ad::Matrix::Zero(1, 1));
  } else {
    const auto k = static_cast<int>(anchors.size());
    ad::SparseMap gains{k, 1, {}, {}};
    ad::SparseMap weights{1, 1, {}, {}};
    for (int a = 0; a < k; ++a) {
      const auto& anchor = anchors[a];
      const DefeatingReport& rep = *anchor.report;
      const auto& truth_order = profiles[anchor.truth_row].order(rep.agent);
      for (int partner : truth_order.acceptable_partners()) {
        const int idx = flat_index(rep.agent, partner, m);
        gains.terms.push_back({a, 0, anchor.report_row, idx, 1.0});
        gains.terms.push_back({a, 0, anchor.truth_row, idx, -1.0});
        if (partner == rep.threshold) break;
      }
      const double side = rep.agent.side == Side::Worker ? n : m;
      weights.terms.push_back({0, 0, a, 0, 0.5 / side / batch});
    }
    vars.rgt = tape.linear(tape.relu(tape.linear(r, gains)), weights);
  }

  vars.loss = tape.add(tape.scale(vars.stv, lambda), tape.scale(vars.rgt, 1.0 - lambda));
  return vars;
}

LossResult loss_minibatch(const NetworkParams& params, const NetworkDims& dims,
                          std::span<const PreferenceProfile> profiles,
                          double lambda, int cap) {
  const auto reports = resolve_defeating_reports(params, dims, profiles, cap);
  ad::Tape tape;
  const LossVars vars = record_loss(tape, params, dims, profiles, reports, lambda);
  tape.backward(vars.loss);

  LossResult out;
  out.loss = tape.scalar(vars.loss);
  out.stv = tape.scalar(vars.stv);
  out.rgt = tape.scalar(vars.rgt);
  out.grad.resize(static_cast<Eigen::Index>(params.num_parameters()));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& gw = tape.grad(vars.weights[l]);
    for (Eigen::Index i = 0; i < gw.rows(); ++i) {
      for (Eigen::Index j = 0; j < gw.cols(); ++j) out.grad(k++) = gw(i, j);
    }
    const auto& gb = tape.grad(vars.biases[l]);
    for (Eigen::Index j = 0; j < gb.cols(); ++j) out.grad(k++) = gb(0, j);
  }
  return out;
}

// --- Training loop -----------------------------------------------------------

namespace {

// Held-out profiles live far away from the training indices of the same
// stream, so the two sets never overlap.
constexpr std::uint64_t kHeldOutOffset = 1ULL << 62;

DistributionConfig data_config(const TrainConfig& config) {
  DistributionConfig dist = config.dist;
  dist.seed = config.seed;
  return dist;
}

}  // namespace

std::vector<PreferenceProfile> heldout_profiles(const TrainConfig& config) {
  return sample_profiles(data_config(config),
                         static_cast<std::size_t>(config.test_size), kHeldOutOffset);
}

TrainResult train(const TrainConfig& config) {
  config.validate();
  TrainResult result;
  result.params = init_params(config.dims, config.seed);
  if (config.iterations == 0) {
    if (!config.checkpoint_path.empty()) {
      save_checkpoint(config.checkpoint_path,
                      {config.dims, config.lambda, config.seed, result.params});
    }
    return result;
  }

  const DistributionConfig dist = data_config(config);
  const auto heldout = heldout_profiles(config);

  std::ofstream log;
  if (!config.log_path.empty()) {
    log.open(config.log_path, std::ios::trunc);
    if (!log) throw IoError("cannot open training log " + config.log_path.string());
    log << "iter,loss,stv,rgt,lr\n" << std::flush;
  }

  ad::OptimizerState opt;
  opt.config.weight_decay = config.weight_decay;
  Eigen::VectorXd flat = result.params.flatten();
  double loss_since_log = 0.0;
  long long steps_since_log = 0;

  for (long long iter = 0; iter < config.iterations; ++iter) {
    const auto batch = sample_profiles(
        dist, static_cast<std::size_t>(config.batch_size),
        static_cast<std::uint64_t>(iter) * static_cast<std::uint64_t>(config.batch_size));
    const double lr = ad::lr_schedule(config.base_lr, iter, config.lr_milestones);
    const LossResult step = loss_minibatch(result.params, config.dims, batch,
                                           config.lambda, config.enumeration_cap);
    if (!std::isfinite(step.loss)) {
      throw NumericError("non-finite training loss at iteration " + std::to_string(iter));
    }
    ad::adam_step(opt, flat, step.grad, lr);
    result.params.assign_flat(flat);
    result.losses.push_back(step.loss);
    loss_since_log += step.loss;
    ++steps_since_log;

    const long long done = iter + 1;
    if (done % config.eval_every == 0 || done == config.iterations) {
      const auto metrics = heldout_metrics(result.params, config.dims, heldout,
                                           config.enumeration_cap);
      TrainLogRow row{done, loss_since_log / static_cast<double>(steps_since_log),
                      metrics.stv, metrics.rgt, lr};
      result.log.push_back(row);
      loss_since_log = 0.0;
      steps_since_log = 0;
      if (log.is_open()) {
        log << std::setprecision(17) << row.iter << ',' << row.loss << ','
            << row.stv << ',' << row.rgt << ',' << row.lr << '\n'
            << std::flush;
      }
      if (!config.checkpoint_path.empty()) {
        save_checkpoint(config.checkpoint_path,
                        {config.dims, config.lambda, config.seed, result.params});
      }
    }
  }
  return result;
}

}  // namespace matchnet
