#include "lumisplat/io/config.h"

#include "lumisplat/io/files.h"

#include <charconv>
#include <sstream>

namespace lumisplat::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineNo);
    if (line.front() == '[') {
      LS_CHECK(line.back() == ']', ParameterError, where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    LS_CHECK(eq != std::string::npos, ParameterError, where + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    LS_CHECK(!key.empty(), ParameterError, where + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (!section.empty()) key = section + "." + key;
    LS_CHECK(cfg.values_.count(key) == 0, ParameterError, where + ": duplicate key " + key);
    cfg.values_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  return parse(readText(path), path.string());
}

std::string KeyValueConfig::getString(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::getDouble(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  double v = 0.0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  LS_CHECK(ec == std::errc() && ptr == s.data() + s.size(), ParameterError,
           origin_ + ": " + key + " is not a number: " + s);
  return v;
}

int KeyValueConfig::getInt(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  int v = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  LS_CHECK(ec == std::errc() && ptr == s.data() + s.size(), ParameterError,
           origin_ + ": " + key + " is not an integer: " + s);
  return v;
}

bool KeyValueConfig::getBool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ParameterError(origin_ + ": " + key + " is not a boolean: " + it->second);
}

void KeyValueConfig::requireKnown(const std::set<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    LS_CHECK(known.count(key) != 0, ParameterError, origin_ + ": unknown key " + key);
  }
}

}  // namespace lumisplat::io
