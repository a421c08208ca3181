#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fedmm {

/// Shortest decimal rendering that round-trips; parsing the
/// result with parse_double returns the identical double.
std::string format_double(double v);

std::optional<double> parse_double(std::string_view text);
std::optional<std::int64_t> parse_int(std::string_view text);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// 64-bit FNV-1a, stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

}  // namespace fedmm
