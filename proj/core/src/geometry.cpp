#include "dmimo/geometry.hpp"

#include <cmath>

namespace dmimo {

namespace {
constexpr double kSqrt3 = 1.7320508075688772;
constexpr int kMaxPlacementAttempts = 1000;
}  // namespace

bool inside_hexagon(double x, double y, double radius) {
  // Vertex at (radius, 0); edges are the intersection of three slabs.
  const double s3r = kSqrt3 * radius;
  return std::abs(y) <= s3r / 2.0 && std::abs(kSqrt3 * x + y) <= s3r &&
         std::abs(kSqrt3 * x - y) <= s3r;
}

Eigen::Vector2d sample_hexagon_point(double radius, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(-radius, radius);
  std::uniform_real_distribution<double> uy(-kSqrt3 * radius / 2.0, kSqrt3 * radius / 2.0);
  for (;;) {
    const double x = ux(rng);
    const double y = uy(rng);
    if (inside_hexagon(x, y, radius)) return {x, y};
  }
}

Geometry sample_geometry(const SystemConfig& config, std::mt19937_64& rng) {
  validate(config);
  Geometry geo;
  geo.rau_positions.resize(2, config.num_raus);
  geo.user_positions.resize(2, config.num_users);

  for (int m = 0; m < config.num_raus; ++m)
    geo.rau_positions.col(m) = sample_hexagon_point(config.cell_radius_m, rng);

  const double min_d2 = config.min_link_distance_m * config.min_link_distance_m;
  for (int k = 0; k < config.num_users; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
      const Eigen::Vector2d p = sample_hexagon_point(config.cell_radius_m, rng);
      const double nearest =
          (geo.rau_positions.colwise() - p).colwise().squaredNorm().minCoeff();
      if (nearest >= min_d2) {
        geo.user_positions.col(k) = p;
        placed = true;
        break;
      }
    }
    if (!placed)
      throw PlacementError("sample_geometry: could not place user " + std::to_string(k) +
                           " at least " + std::to_string(config.min_link_distance_m) +
                           " m from every RAU after " + std::to_string(kMaxPlacementAttempts) +
                           " attempts");
  }
  return geo;
}

Eigen::MatrixXd link_distances(const Geometry& geometry) {
  const auto K = geometry.user_positions.cols();
  const auto M = geometry.rau_positions.cols();
  Eigen::MatrixXd d(K, M);
  for (Eigen::Index k = 0; k < K; ++k)
    d.row(k) = (geometry.rau_positions.colwise() - geometry.user_positions.col(k))
                   .colwise()
                   .norm();
  return d;
}

void validate(const Geometry& geometry, const SystemConfig& config) {
  if (geometry.rau_positions.cols() != config.num_raus ||
      geometry.user_positions.cols() != config.num_users)
    throw std::invalid_argument("Geometry: dimension mismatch with config");
  for (Eigen::Index m = 0; m < geometry.rau_positions.cols(); ++m)
    if (!inside_hexagon(geometry.rau_positions(0, m), geometry.rau_positions(1, m),
                        config.cell_radius_m))
      throw std::invalid_argument("Geometry: RAU outside the cell");
  for (Eigen::Index k = 0; k < geometry.user_positions.cols(); ++k)
    if (!inside_hexagon(geometry.user_positions(0, k), geometry.user_positions(1, k),
                        config.cell_radius_m))
      throw std::invalid_argument("Geometry: user outside the cell");
  if (link_distances(geometry).minCoeff() < config.min_link_distance_m)
    throw std::invalid_argument("Geometry: link shorter than min_link_distance_m");
}

}  // namespace dmimo
