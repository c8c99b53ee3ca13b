#pragma once

#include <Eigen/Dense>

#include "htexp/linalg.hpp"
#include "htexp/optimizer_report.hpp"

namespace htexp {

// Quantize-and-test baseline exponent for scalar X. The sensor conveys
// S = X + xi with xi ~ N(0, sigma^2) independent of everything, the noise
// variance chosen so the description rate I(S;X) = (1/2) ln(1 + K_X/sigma^2)
// fits the budget; the detector tests (S, Y). The exponent is
//
//   max_{sigma^2 >= K_X / (e^{2R} - 1)}  min_F  D( N(0, Sigma(F)) || N(0, Sigma_alt) )
//
// where the minimization runs over joint Gaussians for (S, X, Y) that agree
// with the null on the (S, X) and (S, Y) marginals, leaving exactly the X-Y
// cross block F free, and Sigma_alt is the alternative law of (S, X, Y) under
// the same test channel. At R = 0 the auxiliary S is useless (noise variance
// +inf) and the same minimization runs over (X, Y) with both single-variable
// marginals pinned.
struct HanResult {
  Nats value;
  double test_channel_noise_variance = 0.0;  // +inf at R = 0
  Eigen::MatrixXd inner_minimizer_cross_block;  // 1 x q, the optimal X-Y cross block
  OptimizerReport optimizer;
};

// Throws WrongDimensions unless the model has scalar X (m = 1);
// InvalidInput for a negative rate.
HanResult han_exponent_gaussian(const JointGaussianModel& model, double rate_bits);

}  // namespace htexp
