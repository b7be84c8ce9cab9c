#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "matchnet/metrics.hpp"

namespace matchnet::tools {

inline constexpr const char* kFrontierHeader =
    "label,lambda,stv,rgt,irv,welfare,sim,entropy,profiles";

/// One evaluated mechanism. Baselines carry a NaN lambda, written as an
/// empty field.
struct FrontierRow {
  std::string label;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double stv = 0.0;
  double rgt = 0.0;
  double irv = 0.0;
  double welfare = 0.0;
  double sim = 0.0;
  double entropy = 0.0;
  long long profiles = 0;
};

FrontierRow make_row(const std::string& label, double lambda, const EvalReport& report);

/// CSV line without a trailing newline; reals use %.17g.
std::string format_row(const FrontierRow& row);

/// Header plus one line per row. Throws IoError.
void write_frontier_csv(const std::filesystem::path& path,
                        const std::vector<FrontierRow>& rows);

/// Parses a file written by write_frontier_csv.
std::vector<FrontierRow> read_frontier_csv(const std::filesystem::path& path);

/// Self-contained scatter plot: stv across, rgt up, learned rows as circles
/// annotated with lambda, baselines as labelled squares, plus the segment
/// between the `rsd` and `da-best` rows when both exist.
std::string render_frontier_svg(const std::vector<FrontierRow>& rows);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace matchnet::tools
