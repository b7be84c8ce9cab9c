#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "config.hpp"
#include "matchnet/error.hpp"
#include "matchnet/profile_io.hpp"
#include "report.hpp"
#include "support.hpp"

using namespace matchnet;
using namespace matchnet::tools;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "matchnet_tools_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_sweep(const fs::path& out) {
  ExperimentConfig cfg = parse_config(
      "n = 2\nm = 2\nhidden_layers = 1\nhidden_units = 8\n"
      "batch_size = 8\niterations = 6\neval_every = 3\ntest_size = 16\n"
      "lr_milestones = none\nseed = 4\nlambdas = 0, 1\n");
  cfg.out_dir = out;
  return cfg;
}

}  // namespace

TEST(Config, ParsesKeysOverPreset) {
  const auto cfg = parse_config(
      "# comment\n\nlambda = 0.25   # trailing\npreset = paper-correlated\n"
      "p_corr = 0.75\nlr_milestones = 5, 9\nseed = 12\n");
  EXPECT_DOUBLE_EQ(cfg.train.lambda, 0.25);
  EXPECT_EQ(cfg.train.dist.kind, Correlation::Correlated);
  EXPECT_DOUBLE_EQ(cfg.train.dist.p_corr, 0.75);
  EXPECT_DOUBLE_EQ(cfg.train.base_lr, 0.002);
  EXPECT_EQ(cfg.train.batch_size, 1024);
  EXPECT_EQ(cfg.train.lr_milestones, (std::vector<long long>{5, 9}));
  EXPECT_EQ(cfg.train.seed, 12u);
  EXPECT_EQ(cfg.train.dist.seed, 12u);
  EXPECT_EQ(cfg.rsd.seed, 12u);
}

TEST(Config, ErrorsNameTheLine) {
  auto message = [](const std::string& text) {
    try {
      parse_config(text, "cfg");
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("n = 3\nbogus = 1\n").find("cfg:2: unknown key 'bogus'"), std::string::npos);
  EXPECT_NE(message("n = 3\n\nn = 4\n").find("cfg:3: duplicate key"), std::string::npos);
  EXPECT_NE(message("just words\n").find("cfg:1"), std::string::npos);
  EXPECT_NE(message("iterations = ten\n").find("cfg:1"), std::string::npos);
  EXPECT_NE(message("preset = huge\n").find("cfg:1"), std::string::npos);
  EXPECT_NE(message("correlation = maybe\n").find("cfg:1"), std::string::npos);
  EXPECT_THROW(parse_config("preset = desk\n", "cfg", "desk"), ValidationError);
  EXPECT_THROW(load_config("/nonexistent/matchnet.cfg"), IoError);
}

TEST(Config, EnvironmentSeedOverride) {
  ::setenv("MATCH_SEED", "77", 1);
  ExperimentConfig cfg = parse_config("seed = 3\n");
  apply_env_overrides(cfg);
  EXPECT_EQ(cfg.train.seed, 77u);
  EXPECT_EQ(cfg.train.dist.seed, 77u);
  ::setenv("MATCH_SEED", "x1", 1);
  EXPECT_THROW(apply_env_overrides(cfg), ValidationError);
  ::unsetenv("MATCH_SEED");
  EXPECT_FALSE(env_seed().has_value());
}

TEST(Report, CsvRoundTripAndFormat) {
  const auto dir = scratch("csv");
  FrontierRow learned{"net", 0.5, 0.1, 0.2, 0.0, 0.3, 0.4, 0.5, 10};
  FrontierRow base{"wda"};
  base.profiles = 10;
  write_frontier_csv(dir / "f.csv", {learned, base});
  const std::string text = slurp(dir / "f.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), kFrontierHeader);
  EXPECT_NE(text.find("\nwda,,0,0,0,0,0,0,10\n"), std::string::npos) << text;
  EXPECT_NE(text.find("net,0.5,0.10000000000000001,"), std::string::npos) << text;
  const auto back = read_frontier_csv(dir / "f.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].stv, 0.1);
  EXPECT_TRUE(std::isnan(back[1].lambda));
}

TEST(Report, SvgIsSelfContained) {
  std::vector<FrontierRow> rows{{"net", 0.3, 0.05, 0.01}, {"rsd", NAN, 0.09, 0.0},
                                {"da-best", NAN, 0.0, 0.04}, {"a<b", NAN, 0.0, 0.0}};
  const std::string svg = render_frontier_svg(rows);
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(svg.find("href"), std::string::npos);
  EXPECT_NE(svg.find("a&lt;b"), std::string::npos);
  EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
  // Every element opened is closed.
  int open = 0;
  for (std::size_t i = 0; i + 1 < svg.size(); ++i) {
    if (svg[i] != '<' || svg[i + 1] == '?') continue;
    const auto end = svg.find('>', i);
    if (svg[i + 1] == '/') {
      --open;
    } else if (svg[end - 1] != '/') {
      ++open;
    }
  }
  EXPECT_EQ(open, 0);
}

TEST(Commands, GenWritesProfilesAndSummary) {
  const auto dir = scratch("gen");
  ExperimentConfig cfg = parse_config("n = 4\nm = 4\np_trunc = 0.2\nseed = 1\n");
  std::ostringstream log;
  const auto empty = cmd_gen(cfg, 0, dir / "none.txt", log);
  EXPECT_EQ(empty.profiles, 0);
  const std::string text = slurp(dir / "none.txt");
  EXPECT_EQ(text.front(), '#');
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);

  const auto s = cmd_gen(cfg, 5000, dir / "p.txt", log);
  EXPECT_EQ(read_profiles(dir / "p.txt").size(), 5000u);
  const double sigma = std::sqrt(0.2 * 0.8 / (5000 * 8));
  EXPECT_NEAR(s.truncated_fraction, 0.2, 3 * sigma);
}

TEST(Commands, EvalAndAudit) {
  const auto dir = scratch("eval");
  write_profiles(dir / "ex.txt", {testing_support::example1()});
  std::ostringstream log;
  const auto row = cmd_eval("wda", dir / "ex.txt", dir / "rows.csv", {}, 6, log);
  EXPECT_EQ(row.stv, 0.0);
  EXPECT_EQ(row.irv, 0.0);
  cmd_eval("fda", dir / "ex.txt", dir / "rows.csv", {}, 6, log);
  const std::string rows = slurp(dir / "rows.csv");
  EXPECT_EQ(rows.find(kFrontierHeader), 0u);
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 3);

  write_profiles(dir / "empty.txt", {});
  EXPECT_THROW(cmd_eval("wda", dir / "empty.txt", {}, {}, 6, log), ValidationError);
  EXPECT_THROW(cmd_eval("nope", dir / "ex.txt", {}, {}, 6, log), IoError);

  std::ostringstream audit;
  EXPECT_EQ(cmd_audit("wda", dir / "ex.txt", 1e-9, 8, {}, audit), 1);
  EXPECT_NE(audit.str().find("f1 gain 1"), std::string::npos) << audit.str();
  std::ostringstream ok;
  EXPECT_EQ(cmd_audit("rsd", dir / "ex.txt", 1e-9, 8, {}, ok), 0);
  EXPECT_NE(ok.str().find("blocked by"), std::string::npos);
  std::ostringstream constant;
  EXPECT_EQ(cmd_audit("empty", dir / "ex.txt", 1e-9, 8, {}, constant), 0);
}

TEST(Commands, BaselineSidecarAndDecompose) {
  const auto dir = scratch("baseline");
  write_profiles(dir / "ex.txt", {testing_support::example1(), testing_support::example1()});
  std::ostringstream log;
  cmd_baseline("wda", dir / "ex.txt", dir / "wda.txt", 0, log);
  EXPECT_EQ(slurp(dir / "wda.txt"), "1:3 2:2 3:1\n1:3 2:2 3:1\n");
  cmd_baseline("rsd", dir / "ex.txt", dir / "rsd.txt", 5, log);
  cmd_baseline("rsd", dir / "ex.txt", dir / "rsd2.txt", 5, log);
  EXPECT_EQ(slurp(dir / "rsd.txt"), slurp(dir / "rsd2.txt"));
  std::ostringstream out;
  cmd_decompose("rsd", dir / "ex.txt", {}, out);
  EXPECT_NE(out.str().find("# profile 2"), std::string::npos);
}

TEST(Commands, SweepRowsAndReproducibility) {
  const auto a = scratch("sweep_a"), b = scratch("sweep_b");
  std::ostringstream log;
  const auto ra = cmd_sweep(tiny_sweep(a), 1, false, log);
  const auto rb = cmd_sweep(tiny_sweep(b), 2, false, log);
  EXPECT_EQ(ra.exit_code, 0);
  ASSERT_EQ(ra.rows.size(), 6u);
  EXPECT_EQ(ra.rows[0].label, "net");
  EXPECT_EQ(ra.rows[2].label, "wda");
  EXPECT_EQ(ra.rows[3].label, "fda");
  EXPECT_EQ(ra.rows[4].label, "rsd");
  EXPECT_EQ(ra.rows[5].label, "da-best");
  EXPECT_EQ(ra.rows[2].stv, 0.0);
  EXPECT_NEAR(ra.rows[4].rgt, 0.0, 1e-12);
  EXPECT_EQ(slurp(a / "frontier.csv"), slurp(b / "frontier.csv"));
  EXPECT_TRUE(fs::exists(a / "frontier.svg"));

  // Resuming reuses the stored checkpoints and reproduces the same file.
  const auto rc = cmd_sweep(tiny_sweep(a), 1, true, log);
  EXPECT_EQ(rc.rows.size(), 6u);
  EXPECT_NE(log.str().find("reusing"), std::string::npos);
  EXPECT_EQ(slurp(a / "frontier.csv"), slurp(b / "frontier.csv"));
}

TEST(Commands, SweepRejectsBadLambda) {
  auto cfg = tiny_sweep(scratch("sweep_bad"));
  cfg.lambdas = {0.5, 2.0};
  std::ostringstream log;
  EXPECT_THROW(cmd_sweep(cfg, 1, false, log), ValidationError);
}
