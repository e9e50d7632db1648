#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "dmimo/channel.hpp"
#include "dmimo/config.hpp"

namespace dmimo {

/// Pilot power allocation: power(k, b) is the power user k puts on pilot
/// basis b, Watts. Feasible allocations are entrywise nonnegative with row k
/// summing to pilot_power_total(k).
struct PowerAllocation {
  Eigen::MatrixXd power;  // K x tau

  int num_users() const { return static_cast<int>(power.rows()); }
  int num_pilots() const { return static_cast<int>(power.cols()); }
};

/// Relative row-sum tolerance for a feasible allocation.
inline constexpr double kAllocationRowSumTol = 1e-9;

void validate(const PowerAllocation& alloc, const SystemConfig& config);

/// Channel-estimation error report. per_link(k, m) is the mean square error
/// of user k's estimate at RAU m; sum_mse is the scalar objective value.
struct MseReport {
  Eigen::MatrixXd per_link;  // K x M
  double sum_mse = 0.0;
  std::string method_tag;
  double elapsed_seconds = 0.0;
};

/// Pilot cross-correlation of two users' pilot signals:
///   rho = sum_b sqrt(row_k[b] * row_j[b]).
/// Symmetric; equals the row sum when both rows coincide; zero for rows with
/// disjoint support (orthogonal pilots).
double pilot_cross_correlation(const Eigen::Ref<const Eigen::RowVectorXd>& row_k,
                               const Eigen::Ref<const Eigen::RowVectorXd>& row_j);

/// Closed-form MMSE estimation error for every (user, RAU) link:
///
///   per_link(k,m) = N * g(k,m) * (sum_{j != k} rho_kj^2 g(j,m) + noise * P_k)
///                   / (sum_j rho_kj^2 g(j,m) + noise * P_k)
///
/// with g the large-scale gains, rho_kj the pilot cross-correlations and
/// P_k = sum_b power(k,b). The rho matrix is computed once per call.
MseReport per_link_mse(const ChannelInstance& instance, const PowerAllocation& alloc,
                       const SystemConfig& config);

/// The scalar objective: sum of per_link_mse over all users and RAUs.
double sum_mse(const ChannelInstance& instance, const PowerAllocation& alloc,
               const SystemConfig& config);

/// Thrown by sum_mse_gradient at allocations with a zero entry, where the
/// square root inside rho is not differentiable.
struct BoundaryPointError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Analytic gradient of sum_mse with respect to every allocation entry,
/// K x tau. Requires a strictly positive allocation.
Eigen::MatrixXd sum_mse_gradient(const ChannelInstance& instance, const PowerAllocation& alloc,
                                 const SystemConfig& config);

/// Monte-Carlo estimate of the same per-link errors via direct simulation:
/// draw fast fading and noise, build the received pilot block, correlate with
/// each user's pilot signal, apply the linear MMSE estimator and average the
/// squared estimation error. Serves as the independent check on the closed
/// form. Realizations are processed in fixed-size blocks with one RNG stream
/// per block, so the result does not depend on the worker count.
struct McMseResult {
  MseReport report;
  Eigen::MatrixXd standard_error;  // K x M, standard error of each per_link mean
  std::int64_t realizations = 0;
};

McMseResult mc_mse_oracle(const ChannelInstance& instance, const PowerAllocation& alloc,
                          const SystemConfig& config, std::int64_t num_realizations,
                          std::uint64_t seed, int threads = 0);

}  // namespace dmimo
