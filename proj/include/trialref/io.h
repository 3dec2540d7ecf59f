#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace trialref {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Reads a whole file; throws InputError naming the path when it is missing.
std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::vector<std::string> split(std::string_view text, char delimiter);
std::string trim(std::string_view text);

// Shortest decimal form that round-trips to the same double.
std::string format_double(double value);

std::vector<double> parse_double_list(std::string_view text);

// Plain "key = value" text. Blank lines and '#' comments are skipped; keys may
// repeat and keep their file order.
using KeyValues = std::vector<std::pair<std::string, std::string>>;
KeyValues parse_key_values(std::string_view text);

}  // namespace trialref
