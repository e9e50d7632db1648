#pragma once

#include <Eigen/Core>
#include <random>
#include <stdexcept>

#include "dmimo/config.hpp"

namespace dmimo {

/// Antenna-site and user positions for one scenario, meters, cell centered
/// at the origin.
struct Geometry {
  Eigen::Matrix2Xd rau_positions;   // 2 x M
  Eigen::Matrix2Xd user_positions;  // 2 x K
};

/// Thrown when user placement cannot satisfy the minimum link distance
/// within the resampling budget (geometrically infeasible configuration).
struct PlacementError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// True when (x, y) lies inside the regular hexagon of circumradius `radius`
/// centered at the origin with a vertex on the positive x-axis.
bool inside_hexagon(double x, double y, double radius);

/// One point uniform over the hexagon (rejection from the bounding box).
Eigen::Vector2d sample_hexagon_point(double radius, std::mt19937_64& rng);

/// Draws site and user positions i.i.d. uniform over the cell. Users closer
/// than min_link_distance_m to any site are resampled; throws PlacementError
/// after a bounded number of attempts per user.
Geometry sample_geometry(const SystemConfig& config, std::mt19937_64& rng);

/// K x M matrix of user-to-site distances, clamped nowhere; callers rely on
/// the geometry invariant for the lower bound.
Eigen::MatrixXd link_distances(const Geometry& geometry);

void validate(const Geometry& geometry, const SystemConfig& config);

}  // namespace dmimo
