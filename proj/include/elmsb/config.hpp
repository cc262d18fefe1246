#pragma once

// Flat "key = value" experiment files. Blank lines and lines starting with '#'
// are ignored; later keys override earlier ones.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace elmsb {

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
KeyValues load_key_values(const std::filesystem::path& path);

double parse_real(const std::string& key, const std::string& value);
std::size_t parse_count(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
/// Comma-separated list; surrounding whitespace is trimmed per item.
std::vector<std::string> split_list(const std::string& value);

}  // namespace elmsb
