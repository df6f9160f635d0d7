#pragma once

#include "lumisplat/common.h"

#include <filesystem>
#include <map>
#include <set>
#include <string>

namespace lumisplat::io {

/// Flat `key = value` file. `[section]` lines prefix the following keys with "section.".
/// `#` starts a comment; string values may be quoted.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "config");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string getString(const std::string& key, const std::string& fallback) const;
  double getDouble(const std::string& key, double fallback) const;
  int getInt(const std::string& key, int fallback) const;
  bool getBool(const std::string& key, bool fallback) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Throws ParameterError naming the first key not in `known`.
  void requireKnown(const std::set<std::string>& known) const;

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

}  // namespace lumisplat::io
