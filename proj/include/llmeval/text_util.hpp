#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace llmeval::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);
bool contains_ci(std::string_view haystack, std::string_view needle);
void replace_all(std::string& s, std::string_view from, std::string_view to);

/// Index of the brace that closes the one at `open`, or npos. Honors `\{` and `\}`.
std::size_t match_brace(std::string_view s, std::size_t open);

/// Whitespace-delimited word count.
std::size_t word_count(std::string_view s);

/// Levenshtein distance over bytes.
std::size_t edit_distance(std::string_view a, std::string_view b);

/// 1 - distance / max(len): 1.0 for identical strings.
double edit_similarity(std::string_view a, std::string_view b);

std::string sha256_hex(std::string_view data);
std::uint64_t fnv1a64(std::string_view data);
std::uint64_t splitmix64(std::uint64_t x);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Fixed-notation number with at most `precision` decimals, trailing zeros dropped.
std::string format_number(double v, int precision = 4);

/// Quote a CSV field when it contains separators, quotes or newlines.
std::string csv_escape(std::string_view field);

}  // namespace llmeval::text
