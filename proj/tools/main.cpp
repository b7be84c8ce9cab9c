#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "commands.hpp"
#include "config.hpp"
#include "matchnet/error.hpp"

using namespace matchnet;
using namespace matchnet::tools;

namespace {

ExperimentConfig resolve_config(const std::string& path, const std::string& preset) {
  ExperimentConfig cfg;
  if (!path.empty()) {
    cfg = load_config(path, preset);
  } else if (!preset.empty()) {
    cfg = parse_config("", "<none>", preset);
  }
  apply_env_overrides(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned two-sided matching mechanisms: training, evaluation and audits"};
  app.require_subcommand(1);

  std::string config_path;
  std::string preset;
  std::string out_path;
  std::string out_dir;
  std::string mech_spec;
  std::string profiles_path;
  std::string lambdas;
  long long count = 0;
  int parallel = 1;
  bool resume = false;
  double tolerance = 1e-9;
  int cap = 8;
  std::uint64_t seed = 0;
  double lambda = -1.0;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "key = value config file")
        ->check(CLI::ExistingFile);
    sub->add_option("--preset", preset, "paper-uncorrelated, paper-correlated or desk");
  };

  auto* gen = app.add_subcommand("gen", "sample preference profiles to a file");
  add_config(gen);
  gen->add_option("-n,--count", count, "number of profiles")->required();
  gen->add_option("-o,--out", out_path, "output profile file")->required();

  auto* train_cmd = app.add_subcommand("train", "train one network");
  add_config(train_cmd);
  train_cmd->add_option("--lambda", lambda, "stability weight in [0, 1]");
  train_cmd->add_option("--out-dir", out_dir, "directory for checkpoint and log");

  auto* eval = app.add_subcommand("eval", "evaluate a mechanism on a profile file");
  eval->add_option("mechanism", mech_spec, "wda, fda, rsd, empty or a checkpoint")
      ->required();
  eval->add_option("profiles", profiles_path, "profile file")->required();
  eval->add_option("--csv", out_path, "append the row to this CSV file");
  add_config(eval);

  auto* sweep = app.add_subcommand("sweep", "train over a lambda list and emit the frontier");
  add_config(sweep);
  sweep->add_option("--lambdas", lambdas, "comma-separated lambda list");
  sweep->add_option("--out-dir", out_dir, "output directory");
  sweep->add_option("--parallel", parallel, "concurrent lambda runs")
      ->check(CLI::PositiveNumber);
  sweep->add_flag("--resume", resume, "reuse matching checkpoints in the output directory");

  auto* baseline = app.add_subcommand("baseline", "write baseline matchings as a sidecar file");
  baseline->add_option("mechanism", mech_spec, "wda, fda or rsd")->required();
  baseline->add_option("profiles", profiles_path, "profile file")->required();
  baseline->add_option("-o,--out", out_path, "sidecar output")->required();
  baseline->add_option("--seed", seed, "seed for rsd priority orders");

  auto* audit = app.add_subcommand("audit", "brute-force FOSD audit and blocking pairs");
  audit->add_option("mechanism", mech_spec, "wda, fda, rsd, empty or a checkpoint")
      ->required();
  audit->add_option("profiles", profiles_path, "profile file")->required();
  audit->add_option("--tolerance", tolerance, "largest acceptable gain");
  audit->add_option("--cap", cap, "largest permutable report size");
  add_config(audit);

  auto* decompose = app.add_subcommand("decompose", "print the decomposition into matchings");
  decompose->add_option("mechanism", mech_spec, "wda, fda, rsd, empty or a checkpoint")
      ->required();
  decompose->add_option("profiles", profiles_path, "profile file")->required();
  add_config(decompose);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::Validation);
  }

  try {
    ExperimentConfig cfg = resolve_config(config_path, preset);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (*gen) {
      cmd_gen(cfg, count, out_path, std::cout);
    } else if (*train_cmd) {
      if (lambda >= 0.0 || train_cmd->count("--lambda") > 0) cfg.train.lambda = lambda;
      cmd_train(cfg, std::cout);
    } else if (*eval) {
      cmd_eval(mech_spec, profiles_path, out_path, cfg.rsd, cfg.train.enumeration_cap,
               std::cout);
    } else if (*sweep) {
      if (!lambdas.empty()) cfg.lambdas = parse_real_list(lambdas);
      const SweepResult result = cmd_sweep(cfg, parallel, resume, std::cout);
      for (const auto& f : result.failures) std::cerr << "error: " << f << "\n";
      return result.exit_code;
    } else if (*baseline) {
      cmd_baseline(mech_spec, profiles_path, out_path, seed, std::cout);
    } else if (*audit) {
      return cmd_audit(mech_spec, profiles_path, tolerance, cap, cfg.rsd, std::cout);
    } else if (*decompose) {
      cmd_decompose(mech_spec, profiles_path, cfg.rsd, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::Io);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::Validation);
  }
  return 0;
}
