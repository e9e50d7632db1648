#include "dmimo/allocators.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "dmimo/parallel.hpp"

namespace dmimo {

void validate(const PilotAssignment& assignment, const SystemConfig& config) {
  if (assignment.num_users() != config.num_users)
    throw std::invalid_argument("PilotAssignment: expected one pilot per user");
  for (int k = 0; k < assignment.num_users(); ++k) {
    const int pilot = assignment.pilot_of_user[k];
    if (pilot < 1 || pilot > config.num_pilots)
      throw std::invalid_argument("PilotAssignment: user " + std::to_string(k) +
                                  " has pilot index " + std::to_string(pilot) +
                                  " outside [1, " + std::to_string(config.num_pilots) + "]");
  }
}

PowerAllocation to_allocation(const PilotAssignment& assignment, const SystemConfig& config) {
  validate(assignment, config);
  PowerAllocation alloc;
  alloc.power = Eigen::MatrixXd::Zero(config.num_users, config.num_pilots);
  for (int k = 0; k < config.num_users; ++k)
    alloc.power(k, assignment.pilot_of_user[k] - 1) = config.pilot_power_total(k);
  return alloc;
}

PowerAllocation appa(const SystemConfig& config) {
  PowerAllocation alloc;
  alloc.power = (config.pilot_power_total / static_cast<double>(config.num_pilots))
                    .replicate(1, config.num_pilots);
  return alloc;
}

PilotAssignment rpa(const SystemConfig& config, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(1, config.num_pilots);
  PilotAssignment assignment;
  assignment.pilot_of_user.resize(config.num_users);
  for (int k = 0; k < config.num_users; ++k) assignment.pilot_of_user[k] = pick(rng);
  return assignment;
}

namespace {

/// Decodes an enumeration index into an assignment vector with user 0 as the
/// most significant digit, so ascending indices are ascending lexicographic
/// order over assignment vectors.
void decode_assignment(std::int64_t index, int num_users, int num_pilots, int* digits) {
  for (int k = num_users - 1; k >= 0; --k) {
    digits[k] = static_cast<int>(index % num_pilots);
    index /= num_pilots;
  }
}

bool advance_assignment(int num_users, int num_pilots, int* digits) {
  for (int k = num_users - 1; k >= 0; --k) {
    if (++digits[k] < num_pilots) return true;
    digits[k] = 0;
  }
  return false;
}

}  // namespace

EspaResult espa(const ChannelInstance& instance, const SystemConfig& config,
                std::int64_t budget, int threads) {
  const auto start = std::chrono::steady_clock::now();
  validate(instance);
  if (instance.num_users() != config.num_users || instance.num_raus() != config.num_raus)
    throw std::invalid_argument("espa: channel instance shape does not match config");
  if (budget < 1) throw std::invalid_argument("espa: budget must be positive");

  const int K = config.num_users;
  const int M = config.num_raus;
  const int tau = config.num_pilots;

  std::int64_t space = 1;
  for (int k = 0; k < K; ++k) {
    if (space > budget / tau)
      throw SearchBudgetError("espa: " + std::to_string(tau) + "^" + std::to_string(K) +
                              " assignments exceed the budget of " + std::to_string(budget));
    space *= tau;
  }

  // One-hot specialization of the closed form: with user j fully on pilot
  // b_j, the cross-correlation is rho_kj = sqrt(p_k p_j) when b_k = b_j and 0
  // otherwise, so with T(b,m) = sum_{j: b_j = b} p_j g(j,m) the per-link MSE
  // collapses to
  //   pi(k,m) = N g(k,m) * ((T(b_k,m) - p_k g(k,m)) + noise) / (T(b_k,m) + noise);
  // the common p_k factor cancels between numerator and denominator. The
  // subtraction is exact when user k is alone on its pilot, which is the case
  // where the interference term would otherwise be lost to cancellation.
  const Eigen::VectorXd power = config.pilot_power_total;
  Eigen::MatrixXd weighted = instance.gain.array().colwise() * power.array();  // p_k g(k,m)
  Eigen::MatrixXd scaled =
      static_cast<double>(config.antennas_per_rau) * instance.gain;  // N g(k,m)
  const double noise = config.noise_power;

  struct RangeBest {
    double value = std::numeric_limits<double>::infinity();
    std::int64_t index = -1;
  };
  constexpr std::int64_t kRange = 1 << 16;
  const std::int64_t num_ranges = (space + kRange - 1) / kRange;
  std::vector<RangeBest> partial(num_ranges);

  parallel_chunks(space, kRange, threads,
                  [&](std::int64_t range, std::int64_t begin, std::int64_t end) {
    std::vector<int> digits(K);
    Eigen::MatrixXd totals(M, tau);
    RangeBest best;
    decode_assignment(begin, K, tau, digits.data());
    for (std::int64_t index = begin; index < end; ++index) {
      totals.setZero();
      for (int k = 0; k < K; ++k) totals.col(digits[k]) += weighted.row(k).transpose();
      Eigen::MatrixXd inv_totals = (totals.array() + noise).inverse();
      double objective = 0.0;
      for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k)
          objective += scaled(k, m) * ((totals(m, digits[k]) - weighted(k, m)) + noise) *
                       inv_totals(m, digits[k]);
      if (objective < best.value) {
        best.value = objective;
        best.index = index;
      }
      advance_assignment(K, tau, digits.data());
    }
    partial[range] = best;
  });

  // Ranges cover ascending index intervals, so taking the first strict
  // improvement keeps the lexicographically smallest optimum.
  RangeBest overall;
  for (const RangeBest& best : partial)
    if (best.value < overall.value) overall = best;

  std::vector<int> digits(K);
  decode_assignment(overall.index, K, tau, digits.data());
  EspaResult result;
  result.assignment.pilot_of_user.resize(K);
  for (int k = 0; k < K; ++k) result.assignment.pilot_of_user[k] = digits[k] + 1;

  result.report = per_link_mse(instance, to_allocation(result.assignment, config), config);
  result.report.method_tag = "espa";
  result.report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

namespace {

/// Greedy pilot assignment by sequential minimum channel overlap; seeds one
/// descent start near a good one-hot vertex.
std::vector<int> greedy_assignment(const ChannelInstance& instance, const SystemConfig& config) {
  const int K = config.num_users;
  const int tau = config.num_pilots;
  std::vector<int> assignment(K, 0);
  Eigen::MatrixXd pilot_gain = Eigen::MatrixXd::Zero(tau, instance.num_raus());
  for (int k = 0; k < K; ++k) {
    int best_pilot = 0;
    double best_overlap = std::numeric_limits<double>::infinity();
    for (int b = 0; b < tau; ++b) {
      const double overlap = pilot_gain.row(b).dot(instance.gain.row(k));
      if (overlap < best_overlap) {
        best_overlap = overlap;
        best_pilot = b;
      }
    }
    assignment[k] = best_pilot;
    pilot_gain.row(best_pilot) += instance.gain.row(k);
  }
  return assignment;
}

PowerAllocation assignment_allocation(const std::vector<int>& assignment,
                                      const SystemConfig& config) {
  PowerAllocation alloc;
  alloc.power = Eigen::MatrixXd::Zero(config.num_users, config.num_pilots);
  for (int k = 0; k < config.num_users; ++k)
    alloc.power(k, assignment[k]) = config.pilot_power_total(k);
  return alloc;
}

/// Coordinate descent over one-hot assignments: repeatedly apply the single-
/// or two-user pilot change that improves the objective most, until stable.
/// The two-user moves matter because exchanging the pilots of a colliding
/// pair is invisible to single-user moves.
std::vector<int> local_search_assignment(const ChannelInstance& instance,
                                         const SystemConfig& config, std::vector<int> assignment,
                                         double& objective) {
  objective = sum_mse(instance, assignment_allocation(assignment, config), config);
  const int K = config.num_users;
  const int tau = config.num_pilots;
  const auto probe = [&](double& move_objective, auto& move, auto candidate_move) {
    const double value = sum_mse(instance, assignment_allocation(assignment, config), config);
    if (value < move_objective) {
      move_objective = value;
      move = candidate_move;
    }
  };
  for (int pass = 0; pass < 16 * K; ++pass) {
    std::array<std::pair<int, int>, 2> move{{{-1, -1}, {-1, -1}}};
    double move_objective = objective;
    for (int k = 0; k < K; ++k) {
      const int original = assignment[k];
      for (int b = 0; b < tau; ++b) {
        if (b == original) continue;
        assignment[k] = b;
        probe(move_objective, move,
              std::array<std::pair<int, int>, 2>{{{k, b}, {-1, -1}}});
        for (int k2 = k + 1; k2 < K; ++k2) {
          const int original2 = assignment[k2];
          for (int b2 = 0; b2 < tau; ++b2) {
            if (b2 == original2) continue;
            assignment[k2] = b2;
            probe(move_objective, move,
                  std::array<std::pair<int, int>, 2>{{{k, b}, {k2, b2}}});
          }
          assignment[k2] = original2;
        }
      }
      assignment[k] = original;
    }
    if (move[0].first < 0) break;
    for (const auto& [user, pilot] : move)
      if (user >= 0) assignment[user] = pilot;
    objective = move_objective;
  }
  return assignment;
}

/// Normalized gradient descent on the logits; returns the best iterate seen
/// (including the start). The per-step logit gradient is max-normalized to
/// `step_size` because the raw objective scale (~1e-8) would otherwise make
/// a fixed step either stall or depend on the channel units.
void descend_logits(const ChannelInstance& instance, const SystemConfig& config,
                    Eigen::MatrixXd logits, int steps, double step_size,
                    PowerAllocation& best, double& best_objective) {
  const Eigen::VectorXd& budget = config.pilot_power_total;
  PowerAllocation current;
  for (int step = 0; step <= steps; ++step) {
    Eigen::MatrixXd weights = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp();
    weights.array().colwise() /= weights.rowwise().sum().array();
    current.power = weights.array().colwise() * budget.array();

    const double objective = sum_mse(instance, current, config);
    if (!std::isfinite(objective))
      throw std::runtime_error("continuous_opt: nonfinite objective at step " +
                               std::to_string(step));
    if (objective < best_objective) {
      best_objective = objective;
      best = current;
    }
    if (step == steps) break;

    // Chain the allocation gradient through the scaled softmax:
    // d/du_kb = p_k_tot * w_kb * (g_kb - sum_c w_kc g_kc).
    const Eigen::MatrixXd alloc_grad = sum_mse_gradient(instance, current, config);
    const Eigen::VectorXd mix = (weights.array() * alloc_grad.array()).rowwise().sum();
    Eigen::MatrixXd logit_grad =
        (weights.array() * (alloc_grad.colwise() - mix).array()).colwise() * budget.array();

    const double scale = logit_grad.array().abs().maxCoeff();
    if (scale == 0.0) break;
    logits -= (step_size / scale) * logit_grad;
  }
}

}  // namespace

PowerAllocation continuous_opt(const ChannelInstance& instance, const SystemConfig& config,
                               const PowerAllocation& init, int steps, double step_size) {
  validate(init, config);
  if ((init.power.array() <= 0.0).any())
    throw std::invalid_argument("continuous_opt: init must be strictly positive");
  if (steps < 0) throw std::invalid_argument("continuous_opt: steps must be nonnegative");
  if (!(step_size > 0.0)) throw std::invalid_argument("continuous_opt: step size must be positive");

  const int K = config.num_users;
  const int tau = config.num_pilots;

  PowerAllocation best = init;
  double best_objective = sum_mse(instance, init, config);
  if (!std::isfinite(best_objective))
    throw std::runtime_error("continuous_opt: nonfinite objective at init");
  if (steps == 0) return best;

  const Eigen::MatrixXd init_logits =
      (init.power.array().colwise() / config.pilot_power_total.array()).log().matrix();

  // Any allocation with constant rows (e.g. the equal split) is an exact
  // stationary point of the softmax parametrization -- the allocation
  // gradient is constant across each user's row and the softmax Jacobian
  // annihilates constants -- so each descent start breaks the symmetry with
  // its own deterministic tilt. The greedy-seeded start pulls one descent
  // into the basin of a strong one-hot vertex, keeping the reference
  // competitive with the exhaustive one-hot search.
  std::vector<Eigen::MatrixXd> starts;
  for (const int stride : {1, 2, 3}) {
    Eigen::MatrixXd tilted = init_logits;
    for (int k = 0; k < K; ++k)
      for (int b = 0; b < tau; ++b) tilted(k, b) += 1e-3 * ((k * stride + b) % tau);
    starts.push_back(std::move(tilted));
  }
  const std::vector<int> greedy = greedy_assignment(instance, config);
  {
    Eigen::MatrixXd seeded = init_logits;
    for (int k = 0; k < K; ++k) seeded(k, greedy[k]) += 3.0;
    starts.push_back(std::move(seeded));
  }

  const auto consider = [&](const PowerAllocation& candidate, double objective) {
    if (objective < best_objective) {
      best_objective = objective;
      best = candidate;
    }
  };
  // Rounding a descent's best iterate to its nearest one-hot assignment and
  // polishing it with single-user moves costs little and removes the long
  // saturation tail of the softmax: the descent identifies the basin, the
  // polish lands exactly on the vertex.
  const auto polish = [&](std::vector<int> assignment) {
    double objective = 0.0;
    assignment = local_search_assignment(instance, config, std::move(assignment), objective);
    consider(assignment_allocation(assignment, config), objective);
  };

  for (const Eigen::MatrixXd& start : starts) {
    PowerAllocation start_best;
    double start_objective = std::numeric_limits<double>::infinity();
    descend_logits(instance, config, start, steps, step_size, start_best, start_objective);
    consider(start_best, start_objective);
    std::vector<int> rounded(K, 0);
    for (int k = 0; k < K; ++k) start_best.power.row(k).maxCoeff(&rounded[k]);
    polish(std::move(rounded));
  }
  polish(greedy);
  return best;
}

}  // namespace dmimo
