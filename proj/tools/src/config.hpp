#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matchnet/mechanisms.hpp"
#include "matchnet/train.hpp"

namespace matchnet::tools {

/// Everything a subcommand can read from a config file.
struct ExperimentConfig {
  TrainConfig train = TrainConfig::desk();
  std::vector<double> lambdas{0.0, 0.3, 0.5, 0.8, 1.0};
  RsdOptions rsd;
  std::filesystem::path out_dir = ".";
};

enum class Preset { PaperUncorrelated, PaperCorrelated, Desk };

Preset parse_preset(const std::string& name);
TrainConfig preset_config(Preset preset, double p_corr = 0.5);

/// Flat `key = value` lines; `#` starts a comment. Unknown or repeated keys
/// and malformed values are ValidationErrors naming the line. A `preset`
/// key is applied before every other key regardless of where it appears.
/// A non-empty `preset` acts like a preset key in the text; giving both is
/// an error.
ExperimentConfig parse_config(const std::string& text,
                              const std::string& origin = "<config>",
                              const std::string& preset = {});

/// Reads and parses a config file. Throws IoError if it cannot be read.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::string& preset = {});

/// The seed override from MATCH_SEED, if set. Throws ValidationError when the
/// variable is not an unsigned integer.
std::optional<std::uint64_t> env_seed();

/// Applies env_seed() to the training and sampling seeds.
void apply_env_overrides(ExperimentConfig& cfg);

/// Keys accepted by parse_config, for help output.
std::vector<std::string> config_keys();

/// Comma-separated reals such as "0,0.3,1".
std::vector<double> parse_real_list(const std::string& text);

}  // namespace matchnet::tools
