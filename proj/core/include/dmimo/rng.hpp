#pragma once

#include <cstdint>
#include <random>

namespace dmimo {

/// splitmix64 mixing step; decorrelates nearby stream ids before seeding.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent engine for (seed, stream) pairs. Streams with the
/// same pair are identical, so parallel and serial generation of indexed
/// work items produce the same output.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t mixed = splitmix64(seed ^ splitmix64(stream));
  std::seed_seq seq{
      static_cast<std::uint32_t>(mixed),
      static_cast<std::uint32_t>(mixed >> 32),
      static_cast<std::uint32_t>(stream),
      static_cast<std::uint32_t>(stream >> 32),
  };
  return std::mt19937_64(seq);
}

// Fixed stream tags for purposes that must not collide with instance indices.
inline constexpr std::uint64_t kGeometryStream = 0xFFFFFFFF00000001ULL;
inline constexpr std::uint64_t kInitStream = 0xFFFFFFFF00000002ULL;
inline constexpr std::uint64_t kAssignmentSalt = 0xFFFFFFFF00000004ULL;

// First instance index of the held-out range. Keeping the holdout in the same
// configuration (same frozen geometry when enabled) but at reserved stream
// indices makes it disjoint from any realistic training range, which starts
// at index 0 and covers iterations * batch_size instances.
inline constexpr std::int64_t kHoldoutBaseIndex = std::int64_t{1} << 40;

}  // namespace dmimo
