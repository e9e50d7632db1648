#include <doctest.h>

#include <cmath>
#include <random>

#include "dmimo/mse.hpp"
#include "dmimo/rng.hpp"
#include "helpers.hpp"

using namespace dmimo;

namespace {

double fd_coordinate(const ChannelInstance& instance, const PowerAllocation& alloc,
                     const SystemConfig& config, int k, int b) {
  const double h = 1e-6 * alloc.power(k, b);
  PowerAllocation plus = alloc;
  PowerAllocation minus = alloc;
  plus.power(k, b) += h;
  minus.power(k, b) -= h;
  return (sum_mse(instance, plus, config) - sum_mse(instance, minus, config)) / (2.0 * h);
}

}  // namespace

TEST_SUITE("msecore") {
  TEST_CASE("pilot cross-correlation basics") {
    Eigen::RowVectorXd a(2), b(2);
    a << 1.0, 4.0;
    b << 9.0, 16.0;
    CHECK(pilot_cross_correlation(a, b) == doctest::Approx(11.0));  // 3 + 8
    CHECK(pilot_cross_correlation(a, a) == doctest::Approx(a.sum()));
    Eigen::RowVectorXd e0(2), e1(2);
    e0 << 5.0, 0.0;
    e1 << 0.0, 7.0;
    CHECK(pilot_cross_correlation(e0, e1) == 0.0);
    Eigen::RowVectorXd neg(2);
    neg << -1.0, 2.0;
    CHECK_THROWS_AS(pilot_cross_correlation(a, neg), std::invalid_argument);
  }

  TEST_CASE("single-link closed form against a hand-computed value") {
    // One user, one RAU, two antennas, unit gain, 6 W on one pilot,
    // noise 1e-8: error = 2 * 6e-8 / (36 + 6e-8).
    SystemConfig config = test::make_config(1, 1, 2, 1);
    ChannelInstance instance;
    instance.gain = Eigen::MatrixXd::Constant(1, 1, 1.0);
    PowerAllocation alloc;
    alloc.power = Eigen::MatrixXd::Constant(1, 1, 6.0);

    const MseReport report = per_link_mse(instance, alloc, config);
    CHECK(report.per_link(0, 0) ==
          doctest::Approx(3.3333333277777783e-09).epsilon(1e-12));
    CHECK(report.sum_mse == doctest::Approx(3.3333333277777783e-09).epsilon(1e-12));
    CHECK(report.method_tag == "closed_form");
  }

  TEST_CASE("two-user two-RAU worked example") {
    // Derived independently from the per-link formula with
    // g = [[1, .5], [.25, 2]], p = [[2, 4], [3, 3]], N = 3, noise = 1e-2.
    SystemConfig config = test::make_config(2, 2, 3, 2);
    config.noise_power = 1e-2;
    ChannelInstance instance;
    instance.gain.resize(2, 2);
    instance.gain << 1.0, 0.5, 0.25, 2.0;
    PowerAllocation alloc;
    alloc.power.resize(2, 2);
    alloc.power << 2.0, 4.0, 3.0, 3.0;

    CHECK(pilot_cross_correlation(alloc.power.row(0), alloc.power.row(1)) ==
          doctest::Approx(5.9135913579209323).epsilon(1e-14));

    const MseReport report = per_link_mse(instance, alloc, config);
    CHECK(report.per_link(0, 0) == doctest::Approx(0.5894278028337312).epsilon(1e-12));
    CHECK(report.per_link(0, 1) == doctest::Approx(1.1931857422558252).epsilon(1e-12));
    CHECK(report.per_link(1, 0) == doctest::Approx(0.59669739429497848).epsilon(1e-12));
    CHECK(report.per_link(1, 1) == doctest::Approx(1.1756251879478394).epsilon(1e-12));
    CHECK(report.sum_mse == doctest::Approx(3.5549361273323745).epsilon(1e-12));
  }

  TEST_CASE("orthogonal pilots decouple the users") {
    // Two users on disjoint pilots see no contamination; each link equals the
    // single-user expression N g noise P / (P^2 g + noise P).
    SystemConfig config = test::make_config(2, 2, 2, 2);
    ChannelInstance instance;
    instance.gain.resize(2, 2);
    instance.gain << 2e-7, 5e-8, 3e-9, 4e-7;
    PowerAllocation alloc;
    alloc.power.resize(2, 2);
    alloc.power << 6.0, 0.0, 0.0, 6.0;

    const MseReport report = per_link_mse(instance, alloc, config);
    for (int k = 0; k < 2; ++k) {
      const double p = 6.0;
      for (int m = 0; m < 2; ++m) {
        const double g = instance.gain(k, m);
        const double expected =
            2.0 * g * config.noise_power * p / (p * p * g + config.noise_power * p);
        CHECK(report.per_link(k, m) == doctest::Approx(expected).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("per-link errors stay inside their structural bounds") {
    auto rng = make_stream(11, 0);
    const SystemConfig config = test::make_config(6, 3, 2, 3);
    for (int trial = 0; trial < 10; ++trial) {
      const ChannelInstance instance = test::random_instance(config, rng);
      const PowerAllocation alloc = test::random_interior_allocation(config, rng);
      const MseReport report = per_link_mse(instance, alloc, config);
      // 0 < pi(k,m) < N g(k,m): estimating can't be worse than no estimate.
      CHECK((report.per_link.array() > 0.0).all());
      CHECK((report.per_link.array() <
             config.antennas_per_rau * instance.gain.array())
                .all());
      CHECK(report.sum_mse == doctest::Approx(report.per_link.sum()));
    }
  }

  TEST_CASE("allocation validation enforces shape, sign, and row sums") {
    const SystemConfig config = test::make_config(2, 2, 2, 2);
    PowerAllocation alloc;
    alloc.power.resize(2, 2);
    alloc.power << 3.0, 3.0, 2.0, 4.0;
    CHECK_NOTHROW(validate(alloc, config));

    PowerAllocation off = alloc;
    off.power(0, 0) = 3.1;
    CHECK_THROWS_AS(validate(off, config), std::invalid_argument);

    PowerAllocation close = alloc;
    close.power(0, 0) = 3.0 + 6.0 * 0.5e-9;  // inside the relative tolerance
    CHECK_NOTHROW(validate(close, config));

    PowerAllocation negative = alloc;
    negative.power(1, 0) = -0.1;
    negative.power(1, 1) = 6.1;
    CHECK_THROWS_AS(validate(negative, config), std::invalid_argument);

    PowerAllocation wrong_shape;
    wrong_shape.power = Eigen::MatrixXd::Constant(2, 3, 2.0);
    CHECK_THROWS_AS(validate(wrong_shape, config), std::invalid_argument);
  }

  TEST_CASE("analytic gradient agrees with central differences") {
    auto rng = make_stream(23, 0);
    for (int trial = 0; trial < 5; ++trial) {
      const SystemConfig config = test::make_config(5, 3, 2, 2, 23 + trial);
      const ChannelInstance instance = test::random_instance(config, rng);
      const PowerAllocation alloc = test::random_interior_allocation(config, rng);
      const Eigen::MatrixXd grad = sum_mse_gradient(instance, alloc, config);

      double max_abs_diff = 0.0;
      double max_abs_value = 0.0;
      for (int k = 0; k < config.num_users; ++k) {
        for (int b = 0; b < config.num_pilots; ++b) {
          const double fd = fd_coordinate(instance, alloc, config, k, b);
          max_abs_diff = std::max(max_abs_diff, std::abs(fd - grad(k, b)));
          max_abs_value = std::max({max_abs_value, std::abs(fd), std::abs(grad(k, b))});
        }
      }
      CHECK(max_abs_diff / max_abs_value < 1e-6);
    }
  }

  TEST_CASE("gradient refuses boundary allocations") {
    const SystemConfig config = test::make_config(2, 2, 2, 2);
    ChannelInstance instance;
    instance.gain = Eigen::MatrixXd::Constant(2, 2, 1e-7);
    PowerAllocation alloc;
    alloc.power.resize(2, 2);
    alloc.power << 6.0, 0.0, 3.0, 3.0;
    CHECK_THROWS_AS(sum_mse_gradient(instance, alloc, config), BoundaryPointError);
  }

  TEST_CASE("monte-carlo oracle reproduces the closed form") {
    auto rng = make_stream(31, 0);
    const SystemConfig config = test::make_config(3, 2, 2, 2, 31);
    const ChannelInstance instance = test::random_instance(config, rng);
    const PowerAllocation alloc = test::random_interior_allocation(config, rng);

    const MseReport closed = per_link_mse(instance, alloc, config);
    const McMseResult mc = mc_mse_oracle(instance, alloc, config, 30000, 77);

    REQUIRE(mc.realizations == 30000);
    CHECK(mc.report.method_tag == "monte_carlo");
    CHECK((mc.standard_error.array() > 0.0).all());
    for (int k = 0; k < config.num_users; ++k)
      for (int m = 0; m < config.num_raus; ++m)
        CHECK(std::abs(mc.report.per_link(k, m) - closed.per_link(k, m)) <=
              6.0 * mc.standard_error(k, m));
  }

  TEST_CASE("monte-carlo oracle is independent of the worker count") {
    auto rng = make_stream(37, 0);
    const SystemConfig config = test::make_config(3, 2, 2, 2, 37);
    const ChannelInstance instance = test::random_instance(config, rng);
    const PowerAllocation alloc = test::random_interior_allocation(config, rng);

    const McMseResult serial = mc_mse_oracle(instance, alloc, config, 10000, 5, 1);
    const McMseResult parallel = mc_mse_oracle(instance, alloc, config, 10000, 5, 4);
    CHECK((serial.report.per_link.array() == parallel.report.per_link.array()).all());
    CHECK((serial.standard_error.array() == parallel.standard_error.array()).all());
    CHECK(serial.report.sum_mse == parallel.report.sum_mse);
  }

  TEST_CASE("dimension mismatches are rejected") {
    const SystemConfig config = test::make_config(3, 2, 2, 2);
    ChannelInstance instance;
    instance.gain = Eigen::MatrixXd::Constant(2, 2, 1e-7);  // wrong user count
    PowerAllocation alloc;
    alloc.power = Eigen::MatrixXd::Constant(3, 2, 3.0);
    CHECK_THROWS_AS(per_link_mse(instance, alloc, config), std::invalid_argument);
    instance.gain = Eigen::MatrixXd::Constant(3, 2, 1e-7);
    alloc.power = Eigen::MatrixXd::Constant(3, 3, 2.0);  // wrong pilot count
    CHECK_THROWS_AS(per_link_mse(instance, alloc, config), std::invalid_argument);
    CHECK_THROWS_AS(mc_mse_oracle(instance, alloc, config, 10, 1), std::invalid_argument);
  }
}
