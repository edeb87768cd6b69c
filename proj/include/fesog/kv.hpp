#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fesog {

struct KvEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Flat `key = value` text. '#' starts a comment line; surrounding whitespace
/// is trimmed. Throws ParseError on a non-blank line without '='.
std::vector<KvEntry> parse_kv(std::istream& in, const std::string& source);
std::vector<KvEntry> parse_kv_file(const std::filesystem::path& path);

std::string trim(std::string_view s);
std::vector<std::string> split_list(std::string_view s, char sep = ',');

}  // namespace fesog
