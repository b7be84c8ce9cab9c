#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "matchnet/error.hpp"
#include "matchnet/metrics.hpp"
#include "matchnet/net.hpp"
#include "matchnet/oracle.hpp"
#include "matchnet/profile_io.hpp"
#include "matchnet/rng.hpp"

namespace matchnet::tools {

namespace {

class EmptyMechanism final : public Mechanism {
 public:
  RandomizedMatching evaluate(const PreferenceProfile& profile) const override {
    return {Eigen::MatrixXd::Zero(profile.n, profile.m)};
  }
  std::string label() const override { return "empty"; }
};

std::string lambda_tag(double lambda) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", lambda);
  return buf;
}

std::vector<PreferenceProfile> read_nonempty(const std::filesystem::path& path) {
  auto profiles = read_profiles(path);
  if (profiles.empty()) {
    throw ValidationError(path.string() + " contains no profiles");
  }
  return profiles;
}

void check_market(const LoadedMechanism& loaded,
                  const std::vector<PreferenceProfile>& profiles) {
  if (loaded.n == 0) return;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (profiles[i].n != loaded.n || profiles[i].m != loaded.m) {
      throw ValidationError(
          "profile " + std::to_string(i + 1) + " is " + std::to_string(profiles[i].n) +
          "x" + std::to_string(profiles[i].m) + " but the checkpoint was trained on " +
          std::to_string(loaded.n) + "x" + std::to_string(loaded.m) + " markets");
    }
  }
}

std::string agent_name(AgentId agent) { return to_string(agent); }

}  // namespace

LoadedMechanism load_mechanism(const std::string& spec, const RsdOptions& rsd) {
  LoadedMechanism out;
  if (spec == "wda" || spec == "fda" || spec == "rsd") {
    out.mech = lift_mechanism(parse_baseline(spec), rsd);
    out.label = spec;
    return out;
  }
  if (spec == "empty") {
    out.mech = std::make_unique<EmptyMechanism>();
    out.label = spec;
    return out;
  }
  if (!std::filesystem::exists(spec)) {
    throw IoError("'" + spec +
                  "' is neither a mechanism label (wda, fda, rsd, empty) nor a checkpoint");
  }
  Checkpoint ckpt = load_checkpoint(spec);
  out.lambda = ckpt.lambda;
  out.n = ckpt.dims.n;
  out.m = ckpt.dims.m;
  out.label = "net";
  out.mech = std::make_unique<NetMechanism>(std::move(ckpt.params), ckpt.dims, "net");
  return out;
}

GenSummary cmd_gen(const ExperimentConfig& cfg, long long count,
                   const std::filesystem::path& out, std::ostream& log) {
  if (count < 0) throw ValidationError("count must be non-negative");
  DistributionConfig dist = cfg.train.dist;
  dist.seed = cfg.train.seed;
  dist.validate();
  const auto profiles = sample_profiles(dist, static_cast<std::size_t>(count));

  char header[160];
  std::snprintf(header, sizeof header, "n=%d m=%d %s p_corr=%g p_trunc=%g seed=%llu",
                dist.n, dist.m,
                dist.kind == Correlation::Correlated ? "correlated" : "uncorrelated",
                dist.p_corr, dist.p_trunc,
                static_cast<unsigned long long>(dist.seed));
  write_profiles(out, profiles, header);

  GenSummary s;
  s.profiles = count;
  long long orders = 0, truncated = 0;
  double modal_w = 0.0, modal_f = 0.0;
  auto modal_share = [](const std::vector<PreferenceOrder>& orders) {
    std::size_t best = 0;
    for (const auto& a : orders) {
      best = std::max<std::size_t>(
          best, static_cast<std::size_t>(std::count(orders.begin(), orders.end(), a)));
    }
    return orders.empty() ? 0.0 : static_cast<double>(best) / orders.size();
  };
  for (const auto& p : profiles) {
    for (const auto* side : {&p.workers, &p.firms}) {
      for (const auto& o : *side) {
        ++orders;
        if (o.num_acceptable() < o.size()) ++truncated;
      }
    }
    modal_w += modal_share(p.workers);
    modal_f += modal_share(p.firms);
  }
  if (count > 0) {
    s.truncated_fraction = static_cast<double>(truncated) / orders;
    s.modal_worker_fraction = modal_w / count;
    s.modal_firm_fraction = modal_f / count;
  }
  log << "wrote " << count << " profiles to " << out.string() << "\n";
  log << "truncated orders: " << s.truncated_fraction << " (expected "
      << dist.p_trunc << ")\n";
  log << "orders equal to the modal order: workers " << s.modal_worker_fraction
      << ", firms " << s.modal_firm_fraction << "\n";
  return s;
}

void cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
  TrainConfig tc = cfg.train;
  if (tc.checkpoint_path.empty()) tc.checkpoint_path = cfg.out_dir / "model.mtch";
  if (tc.log_path.empty()) tc.log_path = cfg.out_dir / "train_log.csv";
  tc.validate();
  const TrainResult result = train(tc);
  for (const auto& row : result.log) {
    log << "iter " << row.iter << " loss " << row.loss << " stv " << row.stv
        << " rgt " << row.rgt << " lr " << row.lr << "\n";
  }
  log << "checkpoint " << tc.checkpoint_path.string() << "\n";
}

FrontierRow cmd_eval(const std::string& spec, const std::filesystem::path& profiles,
                     const std::filesystem::path& csv_out, const RsdOptions& rsd,
                     int cap, std::ostream& log) {
  const LoadedMechanism loaded = load_mechanism(spec, rsd);
  const auto data = read_nonempty(profiles);
  check_market(loaded, data);
  const FrontierRow row = make_row(loaded.label, loaded.lambda,
                                   evaluate(*loaded.mech, data, cap));
  log << kFrontierHeader << "\n" << format_row(row) << "\n";
  if (!csv_out.empty()) {
    const bool fresh = !std::filesystem::exists(csv_out) ||
                       std::filesystem::file_size(csv_out) == 0;
    std::ofstream out(csv_out, std::ios::app | std::ios::binary);
    if (!out) throw IoError("cannot append to " + csv_out.string());
    if (fresh) out << kFrontierHeader << "\n";
    out << format_row(row) << "\n";
    if (!out) throw IoError("write failed for " + csv_out.string());
  }
  return row;
}

SweepResult cmd_sweep(const ExperimentConfig& cfg, int parallel, bool resume,
                      std::ostream& log) {
  if (cfg.lambdas.empty()) throw ValidationError("the lambda list is empty");
  for (double lambda : cfg.lambdas) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
      throw ValidationError("every lambda must lie in [0, 1]");
    }
  }
  if (parallel < 1) throw ValidationError("--parallel must be at least 1");
  cfg.train.validate();
  std::filesystem::create_directories(cfg.out_dir);

  const auto heldout = heldout_profiles(cfg.train);
  const int cap = cfg.train.enumeration_cap;
  std::mutex log_mutex;
  auto say = [&](const std::string& line) {
    std::lock_guard<std::mutex> lock(log_mutex);
    log << line << "\n";
    log.flush();
  };

  const std::size_t count = cfg.lambdas.size();
  std::vector<std::optional<FrontierRow>> learned(count);
  std::vector<std::string> errors(count);
  std::vector<int> codes(count, 0);

  auto run_one = [&](std::size_t i) {
    const double lambda = cfg.lambdas[i];
    TrainConfig tc = cfg.train;
    tc.lambda = lambda;
    tc.checkpoint_path = cfg.out_dir / ("net_lambda_" + lambda_tag(lambda) + ".mtch");
    tc.log_path = cfg.out_dir / ("train_lambda_" + lambda_tag(lambda) + ".csv");
    try {
      bool reuse = false;
      if (resume && std::filesystem::exists(tc.checkpoint_path)) {
        const Checkpoint old = load_checkpoint(tc.checkpoint_path);
        reuse = old.dims == tc.dims && old.seed == tc.seed &&
                std::lround(old.lambda * 1e6) == std::lround(lambda * 1e6);
      }
      if (!reuse) {
        say("training lambda=" + lambda_tag(lambda));
        train(tc);
      } else {
        say("reusing " + tc.checkpoint_path.string());
      }
      // Always evaluate the stored weights so fresh and resumed sweeps agree.
      Checkpoint ckpt = load_checkpoint(tc.checkpoint_path);
      NetMechanism net(std::move(ckpt.params), ckpt.dims, "net");
      learned[i] = make_row("net", lambda, evaluate(net, heldout, cap));
      say("lambda=" + lambda_tag(lambda) + " " + format_row(*learned[i]));
    } catch (const Error& e) {
      errors[i] = "lambda=" + lambda_tag(lambda) + ": " + e.what();
      codes[i] = static_cast<int>(e.kind());
      say("failed " + errors[i]);
    }
  };

  if (parallel == 1 || count == 1) {
    for (std::size_t i = 0; i < count; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(parallel), count);
    for (std::size_t t = 0; t < k; ++t) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) run_one(i);
      });
    }
    for (auto& w : workers) w.join();
  }

  SweepResult result;
  for (std::size_t i = 0; i < count; ++i) {
    if (learned[i]) result.rows.push_back(*learned[i]);
    if (!errors[i].empty()) {
      result.failures.push_back(errors[i]);
      if (result.exit_code == 0) result.exit_code = codes[i];
    }
  }

  std::map<std::string, FrontierRow> base;
  for (const char* label : {"wda", "fda", "rsd"}) {
    auto mech = lift_mechanism(parse_baseline(label), cfg.rsd);
    base[label] = make_row(label, std::numeric_limits<double>::quiet_NaN(),
                           evaluate(*mech, heldout, cap));
  }
  base["rsd"].stv += base["rsd"].irv;
  FrontierRow best = base["fda"].rgt < base["wda"].rgt ? base["fda"] : base["wda"];
  best.label = "da-best";
  for (const char* label : {"wda", "fda", "rsd"}) result.rows.push_back(base[label]);
  result.rows.push_back(best);

  write_frontier_csv(cfg.out_dir / "frontier.csv", result.rows);
  write_text_file(cfg.out_dir / "frontier.svg", render_frontier_svg(result.rows));
  if (!result.failures.empty()) {
    std::string text;
    for (const auto& f : result.failures) text += f + "\n";
    write_text_file(cfg.out_dir / "sweep_failures.txt", text);
  }
  say("wrote " + (cfg.out_dir / "frontier.csv").string());
  return result;
}

void cmd_baseline(const std::string& label, const std::filesystem::path& profiles,
                  const std::filesystem::path& out, std::uint64_t seed,
                  std::ostream& log) {
  const BaselineKind kind = parse_baseline(label);
  const auto data = read_profiles(profiles);
  std::string text;
  const CounterRng root(seed);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& profile = data[i];
    DeterministicMatching matching;
    if (kind == BaselineKind::RSD) {
      std::vector<AgentId> order;
      for (int w = 0; w < profile.n; ++w) order.push_back({Side::Worker, w});
      for (int f = 0; f < profile.m; ++f) order.push_back({Side::Firm, f});
      CounterRng rng = root.split(i);
      rng.shuffle(std::span<AgentId>(order));
      matching = serial_dictatorship_round(profile, order);
    } else {
      matching = da(profile, kind == BaselineKind::WDA ? Proposing::Workers
                                                        : Proposing::Firms);
    }
    text += format_matching(matching) + "\n";
  }
  write_text_file(out, text);
  log << "wrote " << data.size() << " " << label << " matchings to " << out.string()
      << "\n";
}

int cmd_audit(const std::string& spec, const std::filesystem::path& profiles,
              double tolerance, int cap, const RsdOptions& rsd, std::ostream& out) {
  const LoadedMechanism loaded = load_mechanism(spec, rsd);
  const auto data = read_nonempty(profiles);
  check_market(loaded, data);
  double worst = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& profile = data[i];
    out << "profile " << i + 1 << "\n";
    const auto gains = oracle::fosd_audit(*loaded.mech, profile, cap);
    for (const auto& [agent, gain] : gains) {
      out << "  " << agent_name(agent) << " gain " << gain << "\n";
      worst = std::max(worst, gain);
    }
    const auto bvn = bvn_decompose(loaded.mech->evaluate(profile));
    for (const auto& c : bvn.components) {
      out << "  support " << c.weight << " [" << format_matching(c.matching) << "]";
      const auto blocking = oracle::find_blocking_pairs(c.matching, profile);
      if (blocking.empty()) {
        out << " stable";
      } else {
        out << " blocked by";
        for (const auto& b : blocking) {
          out << " (w" << b.worker + 1 << ",f" << b.firm + 1 << ","
              << oracle::to_string(b.kind) << ")";
        }
      }
      out << "\n";
    }
  }
  const bool ok = worst <= tolerance;
  out << "max gain " << worst << " over " << data.size() << " profiles: "
      << (ok ? "pass" : "fail") << " (tolerance " << tolerance << ")\n";
  return ok ? 0 : 1;
}

void cmd_decompose(const std::string& spec, const std::filesystem::path& profiles,
                   const RsdOptions& rsd, std::ostream& out) {
  const LoadedMechanism loaded = load_mechanism(spec, rsd);
  const auto data = read_nonempty(profiles);
  check_market(loaded, data);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto bvn = bvn_decompose(loaded.mech->evaluate(data[i]));
    out << "# profile " << i + 1 << " (" << bvn.components.size() << " components)\n";
    for (const auto& c : bvn.components) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", c.weight);
      out << buf << " " << format_matching(c.matching) << "\n";
    }
  }
}

}  // namespace matchnet::tools
