#include "mdg/kv.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace mdg {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw Error("not a boolean: '" + s + "' (expected true or false)");
}

long long parse_int(const std::string& s) {
  long long v = 0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) throw Error("not an integer: '" + s + "'");
  return v;
}

KvFile KvFile::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path.string());
}

KvFile KvFile::parse_string(const std::string& text, const std::string& origin) {
  KvFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw Error(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw Error(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    kv.entries_.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

bool KvFile::has(const std::string& key) const { return get(key).has_value(); }

std::optional<std::string> KvFile::get(const std::string& key) const {
  std::optional<std::string> found;
  for (const auto& [k, v] : entries_) {
    if (k == key) found = v;
  }
  return found;
}

const std::string& KvFile::require(const std::string& key) const {
  const std::string* found = nullptr;
  for (const auto& [k, v] : entries_) {
    if (k == key) found = &v;
  }
  if (!found) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  return *found;
}

std::string KvFile::get_or(const std::string& key, std::string fallback) const {
  auto v = get(key);
  return v ? *v : std::move(fallback);
}

}  // namespace mdg
