#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace marlta {

std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partially written file. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Shortest round-trip decimal rendering of a double.
std::string format_double(double value);
// Fixed notation with `digits` decimals.
std::string format_fixed(double value, int digits);

std::string_view trim(std::string_view s);
std::string join_doubles(std::span<const double> values, char sep);

}  // namespace marlta
