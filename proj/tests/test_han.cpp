#include <cmath>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "htexp/errors.hpp"
#include "htexp/exponent.hpp"
#include "htexp/han.hpp"

using namespace htexp;

TEST_CASE("input validation") {
  std::mt19937_64 rng(29);
  const auto wide = testutil::random_model(rng, 2, 2);
  CHECK_THROWS_AS(han_exponent_gaussian(wide, 1.0), WrongDimensions);
  const auto ok = testutil::independence_model(1.0, 1.0);
  CHECK_THROWS_AS(han_exponent_gaussian(ok, -0.25), InvalidInput);
}

TEST_CASE("identical hypotheses yield a zero exponent") {
  Eigen::MatrixXd k(3, 3);
  k << 2.0, 0.3, 0.1, 0.3, 1.5, 0.2, 0.1, 0.2, 1.0;
  const auto model = JointGaussianModel::create(1, 2, k, k);
  for (double rate : {0.0, 0.5, 2.0}) {
    const auto r = han_exponent_gaussian(model, rate);
    CHECK(r.value.value == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("matches the scalar one-helper formula when X and Y are independent "
          "under the alternative") {
  // For K = [[s_x, s_x],[s_x, s_x+s_n]] against the independent alternative,
  // the baseline and the one-sided formula describe the same testing problem.
  for (double sx2 : {0.5, 1.0, 2.0}) {
    for (double sn2 : {0.25, 1.0, 3.0}) {
      for (double rate_bits : {0.25, 1.0, 2.5}) {
        const auto model = testutil::independence_model(sx2, sn2);
        const auto han = han_exponent_gaussian(model, rate_bits);
        const auto remark = remark_scalar_exponent(sx2, sn2, rate_bits);
        CHECK(han.value.value == doctest::Approx(remark.value).epsilon(1e-5));
        CHECK(han.optimizer.status == OptimizerReport::Status::Converged);
      }
    }
  }
  // pinned anchor: sigma_X^2 = sigma_N^2 = 1 at one bit
  const auto anchored =
      han_exponent_gaussian(testutil::independence_model(1.0, 1.0), 1.0);
  CHECK(anchored.value.value == doctest::Approx(0.5 * std::log(1.6)).epsilon(1e-6));
}

TEST_CASE("zero rate disables the description entirely") {
  const auto model = testutil::reference_pair();
  const auto r = han_exponent_gaussian(model, 0.0);
  // the marginals of (X, Y) agree across hypotheses, so nothing is testable
  CHECK(r.value.value == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(std::isinf(r.test_channel_noise_variance));
}

TEST_CASE("nondecreasing in rate and dominated by the optimal exponent") {
  const auto model = testutil::reference_pair();
  double prev = -1.0;
  for (double rate_bits : {0.1, 0.25, 0.5, 1.0, 2.0}) {
    const auto han = han_exponent_gaussian(model, rate_bits);
    CHECK(han.value.value >= prev - 1e-9);
    prev = han.value.value;
    CHECK(han.test_channel_noise_variance > 0.0);
    CHECK(han.inner_minimizer_cross_block.rows() == 1);
    CHECK(han.inner_minimizer_cross_block.cols() == 2);

    const auto opt = exponent_rate(model, rate_bits);
    CHECK(han.value.value <= opt.total.value + 1e-8);
  }
  // the noisy test channel is strictly suboptimal at moderate rates
  const auto han_half = han_exponent_gaussian(model, 0.5);
  const auto opt_half = exponent_rate(model, 0.5);
  CHECK(opt_half.total.value - han_half.value.value > 1e-3);
}
