#include "dmimo/config.hpp"

#include <stdexcept>

namespace dmimo {

void validate(const SystemConfig& config) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("SystemConfig: " + msg); };

  if (config.num_raus <= 0) fail("num_raus must be positive");
  if (config.antennas_per_rau <= 0) fail("antennas_per_rau must be positive");
  if (config.num_users <= 0) fail("num_users must be positive");
  if (config.num_pilots <= 0) fail("num_pilots must be positive");
  if (config.num_pilots >= config.num_users)
    fail("num_pilots must be smaller than num_users (pilot-limited regime)");
  if (!(config.cell_radius_m > 0.0)) fail("cell_radius_m must be positive");
  if (!(config.pathloss_exponent > 0.0)) fail("pathloss_exponent must be positive");
  if (!(config.shadow_std_db >= 0.0)) fail("shadow_std_db must be nonnegative");
  if (config.pilot_power_total.size() != config.num_users)
    fail("pilot_power_total must hold one value per user");
  if (!(config.pilot_power_total.array() > 0.0).all())
    fail("pilot_power_total entries must be strictly positive");
  if (!(config.noise_power > 0.0)) fail("noise_power must be positive");
  if (!(config.min_link_distance_m > 0.0)) fail("min_link_distance_m must be positive");
  if (!std::isfinite(config.cell_radius_m) || !std::isfinite(config.pathloss_exponent) ||
      !std::isfinite(config.shadow_std_db) || !std::isfinite(config.noise_power) ||
      !std::isfinite(config.min_link_distance_m) ||
      !config.pilot_power_total.allFinite())
    fail("all scenario constants must be finite");
}

}  // namespace dmimo
