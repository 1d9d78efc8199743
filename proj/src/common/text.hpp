#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace intentrag {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

std::string_view trim(std::string_view s) noexcept;
std::string to_lower_ascii(std::string_view s);

// Lowercase, trim and collapse internal whitespace runs to one space.
std::string normalize_for_dedup(std::string_view s);

// Number of UTF-8 code points; invalid lead bytes count as one each.
std::size_t utf8_length(std::string_view s) noexcept;

std::vector<std::string> split_lines(std::string_view s);

// RFC 4180 style CSV: quoted fields may contain commas, doubled quotes and newlines.
// Returns one vector of fields per record; blank lines are skipped.
std::vector<std::vector<std::string>> parse_csv(std::string_view input);
std::string csv_escape(std::string_view field);

}  // namespace intentrag
