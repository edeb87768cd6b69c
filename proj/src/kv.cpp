#include "fesog/kv.hpp"

#include <fstream>
#include <istream>

#include "fesog/data.hpp"

namespace fesog {

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    auto piece = trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (!piece.empty()) out.push_back(std::move(piece));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<KvEntry> parse_kv(std::istream& in, const std::string& source) {
  std::vector<KvEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(source, lineno, "expected key = value");
    KvEntry e{trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)),
              lineno};
    if (e.key.empty()) throw ParseError(source, lineno, "empty key");
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<KvEntry> parse_kv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_kv(in, path.string());
}

}  // namespace fesog
