#pragma once

#include <Eigen/Core>
#include <random>

#include "dmimo/channel.hpp"
#include "dmimo/config.hpp"
#include "dmimo/mse.hpp"
#include "dmimo/network.hpp"

namespace dmimo::test {

inline SystemConfig make_config(int num_users, int num_raus, int antennas, int num_pilots,
                                std::uint64_t seed = 1) {
  SystemConfig config;
  config.num_users = num_users;
  config.num_raus = num_raus;
  config.antennas_per_rau = antennas;
  config.num_pilots = num_pilots;
  config.rng_seed = seed;
  config.set_uniform_pilot_power(6.0);
  return config;
}

/// Instance with gains drawn log-uniform over several decades, the regime
/// the path-loss model actually produces.
inline ChannelInstance random_instance(const SystemConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> exponent(-9.0, -5.0);
  ChannelInstance instance;
  instance.gain.resize(config.num_users, config.num_raus);
  for (int k = 0; k < config.num_users; ++k)
    for (int m = 0; m < config.num_raus; ++m)
      instance.gain(k, m) = std::pow(10.0, exponent(rng));
  return instance;
}

/// Strictly interior feasible allocation: Dirichlet-ish rows scaled to the
/// per-user budget.
inline PowerAllocation random_interior_allocation(const SystemConfig& config,
                                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  PowerAllocation alloc;
  alloc.power.resize(config.num_users, config.num_pilots);
  for (int k = 0; k < config.num_users; ++k) {
    double total = 0.0;
    for (int b = 0; b < config.num_pilots; ++b) {
      alloc.power(k, b) = unit(rng);
      total += alloc.power(k, b);
    }
    alloc.power.row(k) *= config.pilot_power_total(k) / total;
  }
  return alloc;
}

/// Bitwise equality of every stored field, including running statistics.
inline bool params_equal(const NetworkParams& a, const NetworkParams& b) {
  if (a.arch.layer_sizes != b.arch.layer_sizes || a.num_users != b.num_users ||
      a.num_raus != b.num_raus || a.num_pilots != b.num_pilots || a.log_input != b.log_input)
    return false;
  if ((a.pilot_power_total.array() != b.pilot_power_total.array()).any()) return false;
  for (std::size_t l = 0; l < a.hidden.size(); ++l) {
    const HiddenLayer& x = a.hidden[l];
    const HiddenLayer& y = b.hidden[l];
    if ((x.weight.array() != y.weight.array()).any() ||
        (x.bias.array() != y.bias.array()).any() ||
        (x.bn_scale.array() != y.bn_scale.array()).any() ||
        (x.bn_shift.array() != y.bn_shift.array()).any() ||
        (x.running_mean.array() != y.running_mean.array()).any() ||
        (x.running_var.array() != y.running_var.array()).any())
      return false;
  }
  return (a.output.weight.array() == b.output.weight.array()).all() &&
         (a.output.bias.array() == b.output.bias.array()).all();
}

/// Same comparison restricted to trainable parameters (running statistics
/// advance even when the optimizer step is a no-op).
inline bool trainable_equal(const NetworkParams& a, const NetworkParams& b) {
  for (std::size_t l = 0; l < a.hidden.size(); ++l) {
    const HiddenLayer& x = a.hidden[l];
    const HiddenLayer& y = b.hidden[l];
    if ((x.weight.array() != y.weight.array()).any() ||
        (x.bias.array() != y.bias.array()).any() ||
        (x.bn_scale.array() != y.bn_scale.array()).any() ||
        (x.bn_shift.array() != y.bn_shift.array()).any())
      return false;
  }
  return (a.output.weight.array() == b.output.weight.array()).all() &&
         (a.output.bias.array() == b.output.bias.array()).all();
}

}  // namespace dmimo::test
