#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "halo/errors.hpp"
#include "halo/text.hpp"

namespace halo {

// Flat configuration of dotted keys ("scoring.method = min"). '#' starts a
// comment; values run to the end of the line. Secrets never go here — they
// come from environment variables.
class Config {
 public:
  Config() = default;

  static Config from_string(std::string_view content) {
    Config cfg;
    std::size_t line_no = 0;
    for (const std::string& raw : text::split(content, '\n')) {
      ++line_no;
      std::string_view line = text::trim(raw);
      if (line.empty() || line.front() == '#') continue;
      std::size_t eq = line.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError("config line " + std::to_string(line_no) +
                          " is not key=value: " + std::string(line));
      std::string key = text::trim_copy(line.substr(0, eq));
      std::string value = text::trim_copy(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(line_no) +
                          " has an empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_string(buffer.str());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_or(const std::string& key, std::string_view fallback) const {
    auto v = get(key);
    return v ? *v : std::string(fallback);
  }

  std::string require(const std::string& key) const {
    auto v = get(key);
    if (!v) throw ConfigError("missing required config key: " + key);
    return *v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::string s = text::to_lower(*v);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("config key " + key + " is not a boolean: " + *v);
  }

  int get_int(const std::string& key, int fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      int parsed = std::stoi(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing chars");
      return parsed;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " is not an integer: " + *v);
    }
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      double parsed = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing chars");
      return parsed;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " is not a number: " + *v);
    }
  }

  void set(const std::string& key, std::string value) {
    values_[key] = std::move(value);
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  // Canonical "key=value" lines in sorted key order.
  std::string resolved_text() const {
    std::string out;
    for (const auto& [key, value] : values_) {
      out += key;
      out += '=';
      out += value;
      out += '\n';
    }
    return out;
  }

  // Stable digest of the fully resolved config (FNV-1a, 16 hex digits).
  std::string digest() const {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : resolved_text()) {
      hash ^= c;
      hash *= 1099511628211ull;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = hex[hash & 0xf];
      hash >>= 4;
    }
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace halo
