#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "dmimo/channel.hpp"
#include "dmimo/config.hpp"
#include "dmimo/mse.hpp"

namespace dmimo {

/// One pilot per user, indices in [1, num_pilots]. Converting to a
/// PowerAllocation puts the user's whole pilot power budget on that pilot.
struct PilotAssignment {
  std::vector<int> pilot_of_user;

  int num_users() const { return static_cast<int>(pilot_of_user.size()); }
};

void validate(const PilotAssignment& assignment, const SystemConfig& config);

PowerAllocation to_allocation(const PilotAssignment& assignment, const SystemConfig& config);

/// Average pilot power allocation: every user splits its budget equally
/// across all pilots.
PowerAllocation appa(const SystemConfig& config);

/// Random pilot assignment: each user independently picks a pilot uniformly
/// at random. Advances the supplied generator.
PilotAssignment rpa(const SystemConfig& config, std::mt19937_64& rng);

/// Thrown when an exhaustive search would exceed its assignment budget.
class SearchBudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::int64_t kDefaultEspaBudget = 20'000'000;

struct EspaResult {
  PilotAssignment assignment;
  MseReport report;
};

/// Exhaustive-search pilot assignment: enumerates all num_pilots^num_users
/// one-hot allocations and returns the one minimizing the sum MSE on this
/// instance. Ties break toward the lexicographically smallest assignment
/// vector. Throws SearchBudgetError when the search space exceeds `budget`.
///
/// The search is partitioned into fixed-size index ranges; each worker keeps
/// a private best and the partials merge in range order, so the result does
/// not depend on the number of threads.
EspaResult espa(const ChannelInstance& instance, const SystemConfig& config,
                std::int64_t budget = kDefaultEspaBudget, int threads = 0);

/// Reference optimizer for the continuous problem: multi-start gradient
/// descent on per-user logits u_k with p_k = p_k_tot * softmax(u_k), so
/// every iterate satisfies the power constraint by construction. Each step
/// moves the largest logit coordinate by `step_size` (the raw gradient
/// magnitudes are tied to the MSE scale, so an unnormalized fixed step
/// would either stall or explode depending on the channel units). Starts
/// are deterministic tilts of `init` plus a greedy-assignment seed, and the
/// best iterate of each descent is also rounded to its nearest one-hot
/// assignment and polished by local search over one- and two-user pilot
/// moves. Returns the best point seen overall, which is never worse than
/// `init` and in practice never worse than the exhaustive one-hot search.
///
/// `init` must be strictly positive. Throws std::runtime_error if the
/// objective turns nonfinite.
PowerAllocation continuous_opt(const ChannelInstance& instance, const SystemConfig& config,
                               const PowerAllocation& init, int steps = 500,
                               double step_size = 0.1);

}  // namespace dmimo
