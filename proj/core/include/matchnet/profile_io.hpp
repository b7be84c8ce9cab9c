#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "matchnet/prefs.hpp"

namespace matchnet {

// Text format, one profile per line:
//
//   f1,f2,_;f2,_,f1|w1,w2,_;w2,w1,_
//
// Worker orders come first (separated by ';'), then '|', then firm orders.
// Agents are 1-based, '_' is the outside option. Blank lines and lines
// starting with '#' are ignored by the reader.

std::string format_order(const PreferenceOrder& order, Side owner);
std::string format_profile(const PreferenceProfile& profile);

/// Throws ValidationError with the offending token on malformed input.
PreferenceProfile parse_profile(std::string_view line);

/// Throws IoError if the file cannot be read; ValidationError (with the
/// line number) on malformed content.
std::vector<PreferenceProfile> read_profiles(const std::filesystem::path& path);

void write_profiles(const std::filesystem::path& path,
                    const std::vector<PreferenceProfile>& profiles,
                    const std::string& header_comment = {});

}  // namespace matchnet
