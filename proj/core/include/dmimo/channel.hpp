#pragma once

#include <Eigen/Core>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "dmimo/config.hpp"
#include "dmimo/geometry.hpp"

namespace dmimo {

/// One realization of the large-scale fading coefficients, users x RAUs,
/// linear scale: gain(k, m) = d(k, m)^(-pathloss_exponent) * shadow(k, m).
struct ChannelInstance {
  Eigen::MatrixXd gain;  // K x M, strictly positive

  int num_users() const { return static_cast<int>(gain.rows()); }
  int num_raus() const { return static_cast<int>(gain.cols()); }
};

/// One realization of the fast-fading coefficients: (M*N) x K complex matrix
/// with i.i.d. circularly symmetric unit-variance Gaussian entries. Antenna
/// rows are grouped per RAU: row m*N + n is antenna n of RAU m.
struct SmallScaleDraw {
  Eigen::MatrixXcd coefficients;
};

ChannelInstance large_scale_fading(const Geometry& geometry, const SystemConfig& config,
                                   std::mt19937_64& rng);

SmallScaleDraw sample_small_scale(const SystemConfig& config, std::mt19937_64& rng);

/// count instances, instance i drawn from the stream (config.rng_seed,
/// first_index + i) so generation order and worker count do not affect the
/// result and disjoint index ranges never share a stream. With
/// config.freeze_geometry the positions come from one dedicated stream and
/// only shadowing varies across instances.
std::vector<ChannelInstance> generate_dataset(const SystemConfig& config, int count,
                                              std::int64_t first_index = 0);

void validate(const ChannelInstance& instance);

}  // namespace dmimo
