#pragma once

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "halo/errors.hpp"

namespace halo {

// UTC timestamp; honors SOURCE_DATE_EPOCH for reproducible runs.
inline std::string iso8601_timestamp() {
  std::time_t now;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    now = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    now = std::time(nullptr);
  }
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Provenance record written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::string config_digest;
  std::string timestamp;
  std::vector<std::string> output_paths;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  return {{"command", m.command},
          {"config_digest", m.config_digest},
          {"timestamp", m.timestamp},
          {"output_paths", m.output_paths}};
}

inline void write_manifest(const std::filesystem::path& directory,
                           const RunManifest& manifest) {
  std::filesystem::create_directories(directory);
  std::ofstream out(directory / "manifest.json");
  if (!out)
    throw ConfigError("cannot write manifest in " + directory.string());
  out << manifest_to_json(manifest).dump(2) << '\n';
}

}  // namespace halo
