#pragma once

#include "mdg/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mdg {

// Flat `key = value` UTF-8 dialect shared by dataset manifests, experiment
// configs and synthetic-data specs. `#` starts a comment; blank lines ignored.
class KvFile {
 public:
  static KvFile parse_file(const std::filesystem::path& path);
  static KvFile parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const;
  const std::string& require(const std::string& key) const;         // ConfigError if absent
  std::string get_or(const std::string& key, std::string fallback) const;
  std::optional<std::string> get(const std::string& key) const;

  // Entries in file order, duplicates preserved (later wins for lookups).
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  const std::string& origin() const { return origin_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::string origin_;
};

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

bool parse_bool(const std::string& s);      // "true"/"false" only
long long parse_int(const std::string& s);  // throws Error on junk

}  // namespace mdg
