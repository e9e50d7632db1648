#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dmimo/config.hpp"

namespace dmimo::cli {

/// Run provenance written next to every command's outputs: configuration
/// snapshot, command line, timestamp, and the full list of artifact files the
/// run produced.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config;
  std::vector<std::string> artifacts;
};

nlohmann::json scenario_json(const SystemConfig& config);

void write_manifest(const RunManifest& manifest, const std::string& path);

}  // namespace dmimo::cli
