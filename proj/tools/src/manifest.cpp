#include "manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <stdexcept>

namespace dmimo::cli {

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buffer;
}

}  // namespace

nlohmann::json scenario_json(const SystemConfig& config) {
  nlohmann::json j;
  j["num_users"] = config.num_users;
  j["num_raus"] = config.num_raus;
  j["antennas_per_rau"] = config.antennas_per_rau;
  j["num_pilots"] = config.num_pilots;
  j["cell_radius_m"] = config.cell_radius_m;
  j["pathloss_exponent"] = config.pathloss_exponent;
  j["shadow_std_db"] = config.shadow_std_db;
  j["noise_power"] = config.noise_power;
  j["min_link_distance_m"] = config.min_link_distance_m;
  j["freeze_geometry"] = config.freeze_geometry;
  j["rng_seed"] = config.rng_seed;
  j["pilot_power_total"] =
      std::vector<double>(config.pilot_power_total.data(),
                          config.pilot_power_total.data() + config.pilot_power_total.size());
  return j;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["argv"] = manifest.argv;
  j["version"] = DMIMO_VERSION;
  j["timestamp_utc"] = utc_timestamp();
  j["config"] = manifest.config;
  j["artifacts"] = manifest.artifacts;

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open manifest for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("manifest write failed: " + path);
}

}  // namespace dmimo::cli
