#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <string>

namespace dmimo {

/// Scenario constants for one simulated cell.
///
/// A hexagonal cell of circumradius `cell_radius_m` holds `num_raus` antenna
/// sites with `antennas_per_rau` antennas each and `num_users` single-antenna
/// users. `num_pilots` mutually orthonormal pilot sequences are available;
/// the system is pilot-limited, so num_pilots < num_users is required.
struct SystemConfig {
  int num_raus = 4;               // M
  int antennas_per_rau = 2;       // N
  int num_users = 12;             // K
  int num_pilots = 4;             // tau
  double cell_radius_m = 500.0;   // hexagon circumradius
  double pathloss_exponent = 3.0;
  // Standard deviation of the shadow-fading gain in dB, i.e. of
  // 10*log10(s). The default reads "shadowing variance 6 dB" as a dB-domain
  // variance of 6; pass 6.0 here for the std-is-6dB reading instead.
  double shadow_std_db = 2.449489742783178;  // sqrt(6)
  Eigen::VectorXd pilot_power_total;         // per-user total pilot power, Watts
  double noise_power = 1e-8;                 // Watts
  double min_link_distance_m = 30.0;
  bool freeze_geometry = false;  // reuse one geometry for every instance
  std::uint64_t rng_seed = 1;

  SystemConfig() { set_uniform_pilot_power(6.0); }

  void set_uniform_pilot_power(double watts) {
    pilot_power_total = Eigen::VectorXd::Constant(num_users, watts);
  }
};

/// Throws std::invalid_argument when any invariant is violated.
void validate(const SystemConfig& config);

}  // namespace dmimo
