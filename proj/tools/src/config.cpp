#include "config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "matchnet/error.hpp"

namespace matchnet::tools {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_real(const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ValidationError("expected a number, got '" + v + "'");
  }
  return out;
}

long long to_int(const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ValidationError("expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ValidationError("expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

int to_small_int(const std::string& v) {
  const long long x = to_int(v);
  if (x < -(1LL << 30) || x > (1LL << 30)) {
    throw ValidationError("integer out of range: " + v);
  }
  return static_cast<int>(x);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ValidationError("empty entry in list '" + text + "'");
    out.push_back(item);
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"n", [](ExperimentConfig& c, const std::string& v) {
         c.train.dims.n = c.train.dist.n = to_small_int(v);
       }},
      {"m", [](ExperimentConfig& c, const std::string& v) {
         c.train.dims.m = c.train.dist.m = to_small_int(v);
       }},
      {"correlation", [](ExperimentConfig& c, const std::string& v) {
         if (v == "uncorrelated") {
           c.train.dist.kind = Correlation::Uncorrelated;
         } else if (v == "correlated") {
           c.train.dist.kind = Correlation::Correlated;
         } else {
           throw ValidationError("correlation must be uncorrelated or correlated");
         }
       }},
      {"p_corr", [](ExperimentConfig& c, const std::string& v) {
         c.train.dist.p_corr = to_real(v);
       }},
      {"p_trunc", [](ExperimentConfig& c, const std::string& v) {
         c.train.dist.p_trunc = to_real(v);
       }},
      {"seed", [](ExperimentConfig& c, const std::string& v) {
         c.train.seed = c.train.dist.seed = to_u64(v);
       }},
      {"lambda", [](ExperimentConfig& c, const std::string& v) {
         c.train.lambda = to_real(v);
       }},
      {"lambdas", [](ExperimentConfig& c, const std::string& v) {
         c.lambdas = parse_real_list(v);
       }},
      {"batch_size", [](ExperimentConfig& c, const std::string& v) {
         c.train.batch_size = to_small_int(v);
       }},
      {"iterations", [](ExperimentConfig& c, const std::string& v) {
         c.train.iterations = to_int(v);
       }},
      {"lr", [](ExperimentConfig& c, const std::string& v) {
         c.train.base_lr = to_real(v);
       }},
      {"lr_milestones", [](ExperimentConfig& c, const std::string& v) {
         c.train.lr_milestones.clear();
         if (trim(v) == "none") return;
         for (const auto& item : split_list(v)) {
           c.train.lr_milestones.push_back(to_int(item));
         }
       }},
      {"hidden_layers", [](ExperimentConfig& c, const std::string& v) {
         c.train.dims.hidden_layers = to_small_int(v);
       }},
      {"hidden_units", [](ExperimentConfig& c, const std::string& v) {
         c.train.dims.hidden_units = to_small_int(v);
       }},
      {"weight_decay", [](ExperimentConfig& c, const std::string& v) {
         c.train.weight_decay = to_real(v);
       }},
      {"eval_every", [](ExperimentConfig& c, const std::string& v) {
         c.train.eval_every = to_int(v);
       }},
      {"test_size", [](ExperimentConfig& c, const std::string& v) {
         c.train.test_size = to_small_int(v);
       }},
      {"enumeration_cap", [](ExperimentConfig& c, const std::string& v) {
         c.train.enumeration_cap = to_small_int(v);
       }},
      {"checkpoint", [](ExperimentConfig& c, const std::string& v) {
         c.train.checkpoint_path = v;
       }},
      {"log", [](ExperimentConfig& c, const std::string& v) {
         c.train.log_path = v;
       }},
      {"out_dir", [](ExperimentConfig& c, const std::string& v) {
         c.out_dir = v;
       }},
      {"rsd_exact_cap", [](ExperimentConfig& c, const std::string& v) {
         c.rsd.exact_cap = to_small_int(v);
       }},
      {"rsd_samples", [](ExperimentConfig& c, const std::string& v) {
         c.rsd.monte_carlo_samples = to_int(v);
       }},
  };
  return table;
}

}  // namespace

Preset parse_preset(const std::string& name) {
  if (name == "paper-uncorrelated") return Preset::PaperUncorrelated;
  if (name == "paper-correlated") return Preset::PaperCorrelated;
  if (name == "desk") return Preset::Desk;
  throw ValidationError("unknown preset '" + name +
                        "' (expected paper-uncorrelated, paper-correlated or desk)");
}

TrainConfig preset_config(Preset preset, double p_corr) {
  switch (preset) {
    case Preset::PaperUncorrelated:
      return TrainConfig::paper_uncorrelated();
    case Preset::PaperCorrelated:
      return TrainConfig::paper_correlated(p_corr);
    case Preset::Desk:
      return TrainConfig::desk();
  }
  return TrainConfig::desk();
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(to_real(item));
  if (out.empty()) throw ValidationError("empty list");
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys{"preset"};
  for (const auto& [key, setter] : setters()) keys.push_back(key);
  return keys;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin,
                              const std::string& preset) {
  struct Entry {
    int line;
    std::string key;
    std::string value;
  };
  std::vector<Entry> entries;
  std::map<std::string, int> seen;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto where = origin + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(where + "expected 'key = value'");
    }
    Entry e{line_no, trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
    if (e.key.empty()) throw ValidationError(where + "missing key");
    if (e.value.empty()) throw ValidationError(where + "missing value for '" + e.key + "'");
    if (e.key != "preset" && !setters().count(e.key)) {
      throw ValidationError(where + "unknown key '" + e.key + "'");
    }
    if (auto it = seen.find(e.key); it != seen.end()) {
      throw ValidationError(where + "duplicate key '" + e.key + "' (first on line " +
                            std::to_string(it->second) + ")");
    }
    seen[e.key] = line_no;
    entries.push_back(std::move(e));
  }

  if (!preset.empty()) {
    if (auto it = seen.find("preset"); it != seen.end()) {
      throw ValidationError(origin + ":" + std::to_string(it->second) +
                            ": preset also given on the command line");
    }
    entries.insert(entries.begin(), Entry{0, "preset", preset});
  }

  ExperimentConfig cfg;
  for (const auto& e : entries) {
    if (e.key != "preset") continue;
    try {
      cfg.train = preset_config(parse_preset(e.value));
    } catch (const ValidationError& err) {
      const std::string where =
          e.line == 0 ? std::string("--preset") : origin + ":" + std::to_string(e.line);
      throw ValidationError(where + ": " + err.what());
    }
  }
  for (const auto& e : entries) {
    if (e.key == "preset") continue;
    try {
      setters().at(e.key)(cfg, e.value);
    } catch (const ValidationError& err) {
      throw ValidationError(origin + ":" + std::to_string(e.line) + ": " + e.key +
                            ": " + err.what());
    }
  }
  cfg.train.dist.seed = cfg.train.seed;
  cfg.rsd.seed = cfg.train.seed;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::string& preset) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string(), preset);
}

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("MATCH_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  try {
    return to_u64(trim(raw));
  } catch (const ValidationError&) {
    throw ValidationError(std::string("MATCH_SEED must be an unsigned integer, got '") +
                          raw + "'");
  }
}

void apply_env_overrides(ExperimentConfig& cfg) {
  if (auto seed = env_seed()) {
    cfg.train.seed = cfg.train.dist.seed = *seed;
    cfg.rsd.seed = *seed;
  }
}

}  // namespace matchnet::tools
