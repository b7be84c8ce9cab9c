#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "config.hpp"
#include "matchnet/mechanisms.hpp"
#include "report.hpp"

namespace matchnet::tools {

/// A mechanism named on the command line: `wda`, `fda`, `rsd`, `empty`
/// (nobody is ever matched) or the path of a checkpoint.
struct LoadedMechanism {
  std::unique_ptr<Mechanism> mech;
  std::string label;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  int n = 0;  // 0 when the mechanism works for any market size
  int m = 0;
};

LoadedMechanism load_mechanism(const std::string& spec, const RsdOptions& rsd);

struct GenSummary {
  long long profiles = 0;
  double truncated_fraction = 0.0;    // orders with at least one unacceptable partner
  double modal_worker_fraction = 0.0; // worker orders equal to the profile's modal one
  double modal_firm_fraction = 0.0;
};

GenSummary cmd_gen(const ExperimentConfig& cfg, long long count,
                   const std::filesystem::path& out, std::ostream& log);

/// Trains with cfg.train. Missing checkpoint or log paths default to
/// out_dir/model.mtch and out_dir/train_log.csv.
void cmd_train(const ExperimentConfig& cfg, std::ostream& log);

/// Evaluates one mechanism on a profile file, prints the CSV row and, when
/// `csv_out` is set, appends it there (writing the header to a new file).
FrontierRow cmd_eval(const std::string& spec, const std::filesystem::path& profiles,
                     const std::filesystem::path& csv_out, const RsdOptions& rsd,
                     int cap, std::ostream& log);

struct SweepResult {
  std::vector<FrontierRow> rows;
  std::vector<std::string> failures;
  int exit_code = 0;
};

/// Trains one network per lambda in cfg.lambdas (or loads its checkpoint
/// when `resume` is set and the checkpoint matches), evaluates every network
/// and the baselines on one held-out set and writes frontier.csv and
/// frontier.svg to cfg.out_dir. The rsd row reports stv + irv as its stv.
/// A failing lambda is recorded and the sweep moves on.
SweepResult cmd_sweep(const ExperimentConfig& cfg, int parallel, bool resume,
                      std::ostream& log);

/// Writes one matching per profile in sidecar format. DA variants are
/// deterministic; `rsd` draws one priority order per profile from `seed`.
void cmd_baseline(const std::string& label, const std::filesystem::path& profiles,
                  const std::filesystem::path& out, std::uint64_t seed,
                  std::ostream& log);

/// Per-profile worst FOSD gain of every agent and the blocking pairs of
/// each matching in the decomposed support. Returns 0 iff every gain is at
/// most `tolerance`, 1 otherwise.
int cmd_audit(const std::string& spec, const std::filesystem::path& profiles,
              double tolerance, int cap, const RsdOptions& rsd, std::ostream& out);

/// Prints the decomposition of each profile's marginals into matchings.
void cmd_decompose(const std::string& spec, const std::filesystem::path& profiles,
                   const RsdOptions& rsd, std::ostream& out);

}  // namespace matchnet::tools
