#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "matchnet/error.hpp"

namespace matchnet::tools {

namespace {

std::string real17(double x) {
  if (std::isnan(x)) return {};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fixed(double x, int digits = 2) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double parse_field(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double x = std::stod(s, &used);
  if (used != s.size()) throw ValidationError("bad number '" + s + "'");
  return x;
}

}  // namespace

FrontierRow make_row(const std::string& label, double lambda, const EvalReport& report) {
  FrontierRow row;
  row.label = label;
  row.lambda = lambda;
  row.stv = report.stv;
  row.rgt = report.rgt;
  row.irv = report.irv;
  row.welfare = report.welfare_per_agent;
  row.sim = report.sim;
  row.entropy = report.entropy;
  row.profiles = report.profiles_evaluated;
  return row;
}

std::string format_row(const FrontierRow& row) {
  std::string out = row.label;
  for (double x : {row.lambda, row.stv, row.rgt, row.irv, row.welfare, row.sim,
                   row.entropy}) {
    out += ',';
    out += real17(x);
  }
  out += ',';
  out += std::to_string(row.profiles);
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

void write_frontier_csv(const std::filesystem::path& path,
                        const std::vector<FrontierRow>& rows) {
  std::string text = std::string(kFrontierHeader) + "\n";
  for (const auto& row : rows) text += format_row(row) + "\n";
  write_text_file(path, text);
}

std::vector<FrontierRow> read_frontier_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kFrontierHeader) {
    throw ValidationError(path.string() + ": missing frontier header");
  }
  std::vector<FrontierRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 9) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected 9 fields");
    }
    FrontierRow row;
    row.label = fields[0];
    row.lambda = parse_field(fields[1]);
    row.stv = parse_field(fields[2]);
    row.rgt = parse_field(fields[3]);
    row.irv = parse_field(fields[4]);
    row.welfare = parse_field(fields[5]);
    row.sim = parse_field(fields[6]);
    row.entropy = parse_field(fields[7]);
    row.profiles = std::stoll(fields[8]);
    rows.push_back(row);
  }
  return rows;
}

std::string render_frontier_svg(const std::vector<FrontierRow>& rows) {
  constexpr double kWidth = 640, kHeight = 480;
  constexpr double kLeft = 70, kRight = 30, kTop = 30, kBottom = 60;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  double max_x = 0.0, max_y = 0.0;
  for (const auto& r : rows) {
    if (std::isfinite(r.stv)) max_x = std::max(max_x, r.stv);
    if (std::isfinite(r.rgt)) max_y = std::max(max_y, r.rgt);
  }
  max_x = max_x > 0.0 ? max_x * 1.1 : 1.0;
  max_y = max_y > 0.0 ? max_y * 1.1 : 1.0;
  auto sx = [&](double x) { return kLeft + plot_w * x / max_x; };
  auto sy = [&](double y) { return kTop + plot_h * (1.0 - y / max_y); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Axes with five ticks each.
  svg << "<g stroke=\"black\" stroke-width=\"1\">\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\""
      << kLeft + plot_w << "\" y2=\"" << kTop + plot_h << "\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
      << "\" y2=\"" << kTop + plot_h << "\"/>\n";
  svg << "</g>\n";
  for (int i = 0; i <= 5; ++i) {
    const double vx = max_x * i / 5.0, vy = max_y * i / 5.0;
    svg << "<line x1=\"" << fixed(sx(vx)) << "\" y1=\"" << kTop + plot_h
        << "\" x2=\"" << fixed(sx(vx)) << "\" y2=\"" << kTop + plot_h + 4
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fixed(sx(vx)) << "\" y=\"" << kTop + plot_h + 16
        << "\" text-anchor=\"middle\">" << fixed(vx, 3) << "</text>\n";
    svg << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << fixed(sy(vy)) << "\" x2=\""
        << kLeft << "\" y2=\"" << fixed(sy(vy)) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << fixed(sy(vy) + 4)
        << "\" text-anchor=\"end\">" << fixed(vy, 3) << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 15
      << "\" text-anchor=\"middle\">stability violation (stv)</text>\n";
  svg << "<text x=\"18\" y=\"" << kTop + plot_h / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << kTop + plot_h / 2
      << ")\">regret (rgt)</text>\n";

  const FrontierRow* rsd = nullptr;
  const FrontierRow* da_best = nullptr;
  for (const auto& r : rows) {
    if (r.label == "rsd") rsd = &r;
    if (r.label == "da-best") da_best = &r;
  }
  if (rsd != nullptr && da_best != nullptr) {
    svg << "<line x1=\"" << fixed(sx(rsd->stv)) << "\" y1=\"" << fixed(sy(rsd->rgt))
        << "\" x2=\"" << fixed(sx(da_best->stv)) << "\" y2=\"" << fixed(sy(da_best->rgt))
        << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }

  for (const auto& r : rows) {
    if (!std::isfinite(r.stv) || !std::isfinite(r.rgt)) continue;
    const std::string x = fixed(sx(r.stv)), y = fixed(sy(r.rgt));
    if (std::isnan(r.lambda)) {
      svg << "<rect x=\"" << fixed(sx(r.stv) - 4) << "\" y=\"" << fixed(sy(r.rgt) - 4)
          << "\" width=\"8\" height=\"8\" fill=\"#c0392b\"/>\n";
      svg << "<text x=\"" << fixed(sx(r.stv) + 7) << "\" y=\"" << fixed(sy(r.rgt) - 6)
          << "\" fill=\"#c0392b\">" << escape_xml(r.label) << "</text>\n";
    } else {
      svg << "<circle cx=\"" << x << "\" cy=\"" << y
          << "\" r=\"4\" fill=\"#2e6fb7\"/>\n";
      svg << "<text x=\"" << fixed(sx(r.stv) + 6) << "\" y=\"" << fixed(sy(r.rgt) + 12)
          << "\" fill=\"#2e6fb7\">" << escape_xml("λ=" + fixed(r.lambda))
          << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace matchnet::tools
