#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace teleop {

/// Shortest round-trip decimal form of `v` (locale independent).
std::string format_double(double v);
void append_double(std::string& out, double v);

/// Strict decimal parse of the whole field; throws std::invalid_argument.
double parse_double(std::string_view field);

std::vector<std::string_view> split_csv_line(std::string_view line);

}  // namespace teleop
