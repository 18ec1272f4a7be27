#pragma once

// Small text helpers shared by the CSV readers and writers.

#include <string>
#include <string_view>
#include <vector>

namespace cdil::text {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

/// Strict parse of a full field as a finite double; nullopt-like false on failure.
bool parse_double(std::string_view s, double& out);
bool parse_int(std::string_view s, long long& out);

/// Splits on ',' with no quoting (ids and labels must not contain commas).
std::vector<std::string_view> split_csv(std::string_view line);

std::string_view trim(std::string_view s);

}  // namespace cdil::text
