#include "dmimo/mse.hpp"

#include <chrono>
#include <cmath>
#include <complex>
#include <vector>

#include "dmimo/parallel.hpp"
#include "dmimo/rng.hpp"

namespace dmimo {

namespace {

void check_dimensions(const ChannelInstance& instance, const PowerAllocation& alloc,
                      const SystemConfig& config) {
  if (instance.num_users() != config.num_users || instance.num_raus() != config.num_raus)
    throw std::invalid_argument("channel instance shape does not match config");
  if (alloc.num_users() != config.num_users || alloc.num_pilots() != config.num_pilots)
    throw std::invalid_argument("allocation shape does not match config");
  if (!instance.gain.allFinite() || !alloc.power.allFinite())
    throw std::invalid_argument("nonfinite input");
  if ((alloc.power.array() < 0.0).any())
    throw std::invalid_argument("allocation entries must be nonnegative");
}

/// Interference (A) and total (B) correlation sums of the closed form:
///   A(k,m) = sum_{j != k} rho_kj^2 g(j,m) + noise * P_k
///   B(k,m) = A(k,m) + rho_kk^2 g(k,m)
/// B is also the diagonal scale of the estimator's correlation matrix.
struct CorrelationSums {
  Eigen::MatrixXd rho;        // K x K
  Eigen::VectorXd power_sum;  // P_k = sum_b power(k,b)
  Eigen::MatrixXd interference;  // A
  Eigen::MatrixXd total;         // B
};

CorrelationSums correlation_sums(const ChannelInstance& instance, const PowerAllocation& alloc,
                                 const SystemConfig& config) {
  CorrelationSums s;
  const Eigen::MatrixXd sq = alloc.power.cwiseSqrt();
  s.rho = sq * sq.transpose();
  s.power_sum = alloc.power.rowwise().sum();

  Eigen::MatrixXd rho2_off = s.rho.cwiseProduct(s.rho);
  const Eigen::VectorXd rho2_diag = rho2_off.diagonal();
  rho2_off.diagonal().setZero();

  // Strictly positive additions only; no cancellation between A and B.
  s.interference = rho2_off * instance.gain;
  s.interference.colwise() += config.noise_power * s.power_sum;
  s.total =
      s.interference + (instance.gain.array().colwise() * rho2_diag.array()).matrix();
  return s;
}

}  // namespace

void validate(const PowerAllocation& alloc, const SystemConfig& config) {
  if (alloc.num_users() != config.num_users || alloc.num_pilots() != config.num_pilots)
    throw std::invalid_argument("PowerAllocation: shape does not match config");
  if (!alloc.power.allFinite() || (alloc.power.array() < 0.0).any())
    throw std::invalid_argument("PowerAllocation: entries must be finite and nonnegative");
  for (int k = 0; k < alloc.num_users(); ++k) {
    const double total = alloc.power.row(k).sum();
    const double target = config.pilot_power_total(k);
    if (std::abs(total - target) > kAllocationRowSumTol * target)
      throw std::invalid_argument("PowerAllocation: row " + std::to_string(k) +
                                  " sums to " + std::to_string(total) + ", expected " +
                                  std::to_string(target));
  }
}

double pilot_cross_correlation(const Eigen::Ref<const Eigen::RowVectorXd>& row_k,
                               const Eigen::Ref<const Eigen::RowVectorXd>& row_j) {
  if (row_k.size() != row_j.size())
    throw std::invalid_argument("pilot_cross_correlation: rows of unequal length");
  if ((row_k.array() < 0.0).any() || (row_j.array() < 0.0).any())
    throw std::invalid_argument("pilot_cross_correlation: negative entry");
  return (row_k.array() * row_j.array()).sqrt().sum();
}

MseReport per_link_mse(const ChannelInstance& instance, const PowerAllocation& alloc,
                       const SystemConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  check_dimensions(instance, alloc, config);

  const CorrelationSums s = correlation_sums(instance, alloc, config);
  MseReport report;
  report.per_link = static_cast<double>(config.antennas_per_rau) *
                    (instance.gain.array() * s.interference.array() / s.total.array());
  report.sum_mse = report.per_link.sum();
  report.method_tag = "closed_form";
  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

double sum_mse(const ChannelInstance& instance, const PowerAllocation& alloc,
               const SystemConfig& config) {
  return per_link_mse(instance, alloc, config).sum_mse;
}

Eigen::MatrixXd sum_mse_gradient(const ChannelInstance& instance, const PowerAllocation& alloc,
                                 const SystemConfig& config) {
  check_dimensions(instance, alloc, config);
  if ((alloc.power.array() == 0.0).any())
    throw BoundaryPointError(
        "sum_mse_gradient: allocation has a zero entry; the cross-correlation is not "
        "differentiable there");

  const double antennas = config.antennas_per_rau;
  const CorrelationSums s = correlation_sums(instance, alloc, config);
  const Eigen::MatrixXd sq = alloc.power.cwiseSqrt();
  const Eigen::VectorXd rho_diag = s.rho.diagonal();

  const Eigen::ArrayXXd gain2 = instance.gain.array().square();
  const Eigen::ArrayXXd inv_total2 = s.total.array().square().inverse();

  // Sensitivity of user k's summed error to its own correlation row:
  //   d(sum_m pi_km)/d rho_kj = 2 rho_kj * sum_m N g_km^2 rho_kk^2 g_jm / B_km^2.
  const Eigen::ArrayXd rho_diag_sq = rho_diag.array().square();
  const Eigen::ArrayXXd own_scale = antennas * (gain2.colwise() * rho_diag_sq) * inv_total2;
  Eigen::MatrixXd pair_sens =
      2.0 * s.rho.cwiseProduct(own_scale.matrix() * instance.gain.transpose());
  pair_sens.diagonal().setZero();

  // Sensitivity to the row sum P_k (noise term in A and B, rho_kk^2 in B):
  //   dF/dP_k = sum_m [ noise * C(k,m) - 2 rho_kk * N g_km^2 A_km / B_km^2 ].
  const Eigen::ArrayXXd interference_scale = antennas * gain2 * s.interference.array() * inv_total2;
  const Eigen::VectorXd row_sum_sens =
      config.noise_power * own_scale.rowwise().sum().matrix() -
      2.0 * rho_diag.cwiseProduct(interference_scale.rowwise().sum().matrix());

  // Chain rule: d rho_kj / d p_k^b = sqrt(p_j^b / p_k^b) / 2 for j != k and
  // d P_k / d p_k^b = 1. rho_kj also feeds user j's error, hence the
  // symmetrized pair sensitivity.
  const Eigen::MatrixXd pair_sym = pair_sens + pair_sens.transpose();
  Eigen::MatrixXd grad = 0.5 * (pair_sym * sq).cwiseQuotient(sq);
  grad.colwise() += row_sum_sens;
  return grad;
}

McMseResult mc_mse_oracle(const ChannelInstance& instance, const PowerAllocation& alloc,
                          const SystemConfig& config, std::int64_t num_realizations,
                          std::uint64_t seed, int threads) {
  const auto start = std::chrono::steady_clock::now();
  check_dimensions(instance, alloc, config);
  if (num_realizations < 1)
    throw std::invalid_argument("mc_mse_oracle: need at least one realization");

  const int K = config.num_users;
  const int M = config.num_raus;
  const int N = config.antennas_per_rau;
  const int tau = config.num_pilots;
  const int rows = M * N;

  // Pilot signals phi_k = sum_b sqrt(p_k^b) e_b, one per column.
  const Eigen::MatrixXd pilots = alloc.power.cwiseSqrt().transpose();  // tau x K
  const Eigen::VectorXd power_sum = alloc.power.rowwise().sum();

  // Estimator scale per (k,m): P_k g(k,m) / (sum_j (phi_k.phi_j)^2 g(j,m) + noise P_k).
  const Eigen::MatrixXd corr = pilots.transpose() * pilots;  // rho via pilot inner products
  Eigen::MatrixXd denom = corr.cwiseProduct(corr) * instance.gain;
  denom.colwise() += config.noise_power * power_sum;
  const Eigen::MatrixXd est_scale =
      (instance.gain.array().colwise() * power_sum.array()) / denom.array();

  const Eigen::MatrixXd amp = instance.gain.cwiseSqrt();  // K x M channel amplitudes
  const double noise_part_std = std::sqrt(config.noise_power / 2.0);

  constexpr std::int64_t kBlock = 4096;
  const std::int64_t num_blocks = (num_realizations + kBlock - 1) / kBlock;
  std::vector<Eigen::MatrixXd> block_sum(num_blocks);
  std::vector<Eigen::MatrixXd> block_sumsq(num_blocks);

  const Eigen::MatrixXcd pilots_c = pilots.cast<std::complex<double>>();

  parallel_chunks(num_realizations, kBlock, threads,
                  [&](std::int64_t block, std::int64_t begin, std::int64_t end) {
    auto rng = make_stream(seed, static_cast<std::uint64_t>(block));
    std::normal_distribution<double> unit_part(0.0, std::sqrt(0.5));
    std::normal_distribution<double> noise_part(0.0, noise_part_std);

    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(K, M);
    Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(K, M);
    Eigen::MatrixXcd channels(rows, K);
    Eigen::MatrixXcd received(rows, tau);
    Eigen::VectorXcd correlated(rows);

    for (std::int64_t r = begin; r < end; ++r) {
      for (int k = 0; k < K; ++k)
        for (int m = 0; m < M; ++m)
          for (int n = 0; n < N; ++n)
            channels(m * N + n, k) =
                amp(k, m) * std::complex<double>(unit_part(rng), unit_part(rng));

      received.noalias() = channels * pilots_c.transpose();
      for (int b = 0; b < tau; ++b)
        for (int i = 0; i < rows; ++i)
          received(i, b) += std::complex<double>(noise_part(rng), noise_part(rng));

      for (int k = 0; k < K; ++k) {
        correlated.noalias() = received * pilots_c.col(k);
        for (int m = 0; m < M; ++m) {
          double err = 0.0;
          for (int n = 0; n < N; ++n) {
            const int i = m * N + n;
            err += std::norm(channels(i, k) - est_scale(k, m) * correlated(i));
          }
          sum(k, m) += err;
          sumsq(k, m) += err * err;
        }
      }
    }
    block_sum[block] = std::move(sum);
    block_sumsq[block] = std::move(sumsq);
  });

  Eigen::MatrixXd total_sum = Eigen::MatrixXd::Zero(K, M);
  Eigen::MatrixXd total_sumsq = Eigen::MatrixXd::Zero(K, M);
  for (std::int64_t b = 0; b < num_blocks; ++b) {
    total_sum += block_sum[b];
    total_sumsq += block_sumsq[b];
  }

  const double R = static_cast<double>(num_realizations);
  McMseResult result;
  result.report.per_link = total_sum / R;
  result.report.sum_mse = result.report.per_link.sum();
  result.report.method_tag = "monte_carlo";
  result.realizations = num_realizations;
  if (num_realizations > 1) {
    const Eigen::ArrayXXd mean = result.report.per_link.array();
    const Eigen::ArrayXXd var =
        ((total_sumsq.array() - R * mean.square()) / (R - 1.0)).max(0.0);
    result.standard_error = (var / R).sqrt();
  } else {
    result.standard_error = Eigen::MatrixXd::Zero(K, M);
  }
  result.report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace dmimo
