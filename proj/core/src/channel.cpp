#include "dmimo/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "dmimo/rng.hpp"

namespace dmimo {

ChannelInstance large_scale_fading(const Geometry& geometry, const SystemConfig& config,
                                   std::mt19937_64& rng) {
  validate(geometry, config);
  const Eigen::MatrixXd d = link_distances(geometry);

  ChannelInstance instance;
  instance.gain.resize(config.num_users, config.num_raus);
  std::normal_distribution<double> shadow_db(0.0, config.shadow_std_db);
  for (int k = 0; k < config.num_users; ++k) {
    for (int m = 0; m < config.num_raus; ++m) {
      const double pathloss = std::pow(d(k, m), -config.pathloss_exponent);
      const double shadow =
          config.shadow_std_db > 0.0 ? std::pow(10.0, shadow_db(rng) / 10.0) : 1.0;
      instance.gain(k, m) = pathloss * shadow;
    }
  }
  validate(instance);
  return instance;
}

SmallScaleDraw sample_small_scale(const SystemConfig& config, std::mt19937_64& rng) {
  const int rows = config.num_raus * config.antennas_per_rau;
  SmallScaleDraw draw;
  draw.coefficients.resize(rows, config.num_users);
  // Unit total variance per entry: real and imaginary parts each N(0, 1/2).
  std::normal_distribution<double> part(0.0, std::sqrt(0.5));
  for (int k = 0; k < config.num_users; ++k) {
    for (int r = 0; r < rows; ++r) {
      const double re = part(rng);
      const double im = part(rng);
      draw.coefficients(r, k) = {re, im};
    }
  }
  return draw;
}

std::vector<ChannelInstance> generate_dataset(const SystemConfig& config, int count,
                                              std::int64_t first_index) {
  validate(config);
  if (count < 0) throw std::invalid_argument("generate_dataset: negative count");
  if (first_index < 0) throw std::invalid_argument("generate_dataset: negative first index");

  Geometry frozen;
  if (config.freeze_geometry) {
    auto geo_rng = make_stream(config.rng_seed, kGeometryStream);
    frozen = sample_geometry(config, geo_rng);
  }

  std::vector<ChannelInstance> instances;
  instances.reserve(count);
  for (int i = 0; i < count; ++i) {
    auto rng = make_stream(config.rng_seed, static_cast<std::uint64_t>(first_index + i));
    const Geometry geo = config.freeze_geometry ? frozen : sample_geometry(config, rng);
    instances.push_back(large_scale_fading(geo, config, rng));
  }
  return instances;
}

void validate(const ChannelInstance& instance) {
  if (instance.gain.size() == 0)
    throw std::invalid_argument("ChannelInstance: empty gain matrix");
  if (!instance.gain.allFinite() || !(instance.gain.array() > 0.0).all())
    throw std::invalid_argument("ChannelInstance: gains must be strictly positive and finite");
}

}  // namespace dmimo
