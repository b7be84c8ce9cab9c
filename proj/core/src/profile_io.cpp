#include "matchnet/profile_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "matchnet/error.hpp"

namespace matchnet {
namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

int parse_partner(std::string_view token, char expected_prefix) {
  token = trim(token);
  if (token == "_") return kUnmatched;
  if (token.size() < 2 || token.front() != expected_prefix) {
    throw ValidationError("bad partner token '" + std::string(token) +
                          "', expected " + expected_prefix + "<k> or _");
  }
  int value = 0;
  const auto* begin = token.data() + 1;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || value < 1) {
    throw ValidationError("bad partner token '" + std::string(token) + "'");
  }
  return value - 1;
}

std::vector<PreferenceOrder> parse_side(std::string_view text,
                                        char partner_prefix) {
  std::vector<PreferenceOrder> orders;
  for (auto agent : split(text, ';')) {
    std::vector<int> ranking;
    for (auto token : split(agent, ',')) {
      ranking.push_back(parse_partner(token, partner_prefix));
    }
    orders.emplace_back(std::move(ranking));
  }
  return orders;
}

}  // namespace

std::string format_order(const PreferenceOrder& order, Side owner) {
  const char prefix = owner == Side::Worker ? 'f' : 'w';
  std::string out;
  bool first = true;
  for (int partner : order.ranking()) {
    if (!first) out += ',';
    first = false;
    if (partner == kUnmatched) {
      out += '_';
    } else {
      out += prefix;
      out += std::to_string(partner + 1);
    }
  }
  return out;
}

std::string format_profile(const PreferenceProfile& profile) {
  std::string out;
  for (int w = 0; w < profile.n; ++w) {
    if (w > 0) out += ';';
    out += format_order(profile.workers[w], Side::Worker);
  }
  out += '|';
  for (int f = 0; f < profile.m; ++f) {
    if (f > 0) out += ';';
    out += format_order(profile.firms[f], Side::Firm);
  }
  return out;
}

PreferenceProfile parse_profile(std::string_view line) {
  const auto sides = split(trim(line), '|');
  if (sides.size() != 2) {
    throw ValidationError("profile line needs exactly one '|'");
  }
  PreferenceProfile profile;
  profile.workers = parse_side(sides[0], 'f');
  profile.firms = parse_side(sides[1], 'w');
  profile.n = static_cast<int>(profile.workers.size());
  profile.m = static_cast<int>(profile.firms.size());
  profile.validate();
  return profile;
}

std::vector<PreferenceProfile> read_profiles(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open profile file " + path.string());
  }
  std::vector<PreferenceProfile> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    try {
      out.push_back(parse_profile(body));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": " + e.what());
    }
  }
  if (in.bad()) {
    throw IoError("error while reading " + path.string());
  }
  return out;
}

void write_profiles(const std::filesystem::path& path,
                    const std::vector<PreferenceProfile>& profiles,
                    const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  if (!header_comment.empty()) {
    std::istringstream lines(header_comment);
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << '\n';
  }
  for (const auto& profile : profiles) {
    out << format_profile(profile) << '\n';
  }
  if (!out) {
    throw IoError("error while writing " + path.string());
  }
}

}  // namespace matchnet
