#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmimo/config.hpp"

namespace dmimo {

/// Result of one finite-difference suite. The error is max-normalized over
/// the sampled coordinates: max|fd - analytic| / max(max|fd|, max|analytic|),
/// so near-zero individual coordinates do not produce spurious blowups.
struct GradCheckReport {
  std::string suite;
  int coordinates = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Central-difference check of the closed-form allocation gradient on seeded
/// instances with random interior allocations. Coordinates are split evenly
/// across the instances.
GradCheckReport check_allocation_gradient(const SystemConfig& config, int num_instances,
                                          int num_coordinates, std::uint64_t seed,
                                          double tolerance = 1e-5);

/// Central-difference check of the full training gradient: the batch loss
/// (mean sum MSE of the network's allocations) differentiated through the
/// closed form, the scaled grouped softmax, the dense layers, ReLU, and
/// batch normalization, compared coordinate-wise against perturbing single
/// trainable parameters. The network is probed in log-input mode so every
/// sampled coordinate has a gradient large enough for a double-precision
/// difference quotient to resolve (the chain rule is input-mode agnostic).
GradCheckReport check_network_gradient(const SystemConfig& config,
                                       const std::vector<int>& hidden_sizes, int num_instances,
                                       int num_coordinates, std::uint64_t seed,
                                       double tolerance = 1e-4);

}  // namespace dmimo
