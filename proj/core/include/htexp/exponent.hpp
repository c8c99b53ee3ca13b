#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "htexp/linalg.hpp"
#include "htexp/optimizer_report.hpp"

namespace htexp {

// One evaluated point of the error-exponent rate function:
//   total = divergence_Y + divergence_XgivenU + maxmin_value   (all in nats).
struct ExponentBreakdown {
  Nats divergence_Y;
  Nats divergence_XgivenU;
  Nats maxmin_value;
  Nats total;
  Eigen::MatrixXd omega_star;       // m x m argmax of the inner trade-off
  bool condition_verified = false;  // false => formula value, hypothesis unverified
};

struct ExponentCurveSample {
  double rate_bits = 0.0;
  ExponentBreakdown breakdown;
};

struct ExponentCurve {
  std::vector<ExponentCurveSample> samples;
};

enum class MaxminMethod {
  Auto,       // bisection for m = 1, dual-certified ascent otherwise
  Bisection,  // m = 1 only
  DualAscent, // projected supergradient + Sion-dual certificate, any m
};

struct MaxminResult {
  Nats value;
  Eigen::MatrixXd omega_star;  // m x m
  OptimizerReport optimizer;
};

// The two rate-independent divergence terms of the exponent:
// ( D(P_Y || Pbar_Y), E[D(P_{X|U} || Pbar_{X|U})] ).
std::pair<Nats, Nats> divergence_terms(const JointGaussianModel& model);

// f1(Omega) = R + (1/2) ln det(I - K^{1/2} Omega K^{1/2}), K = K_{X|Y}, with
// R in nats. Requires 0 <= Omega <= K^{-1} in the PSD order within 1e-8 after
// whitening (OmegaOutOfBox otherwise); returns -infinity when the determinant
// argument is singular at the top of the box.
double objective_first(const Eigen::MatrixXd& Omega, const JointGaussianModel& model,
                       double rate_nats);

// f2(Omega) = (1/2) ln det(I + S^{1/2} Omega S^{1/2}) for the effective
// information matrix S (see below).
double objective_second(const Eigen::MatrixXd& Omega, const JointGaussianModel& model);

// S = K_XY B K_XY^T with B = K_Y^{-1} - K_Y^{-1} Kbar_Y Kbar_XY^+ Kbar_XY
// K_Y^{-1}... projected through the alternative regression; symmetrized when
// the asymmetry is within 1e-9 relative, EffectiveMatrixNotPsd beyond that or
// when an eigenvalue sits below -1e-10.
Eigen::MatrixXd effective_information_matrix(const JointGaussianModel& model);

// max over 0 <= Omega <= K_{X|Y}^{-1} of min(f1, f2) at rate R (nats).
// The dual-ascent path certifies the value by the Sion duality gap, stored in
// optimizer.final_gradient_norm.
MaxminResult maxmin_omega(const JointGaussianModel& model, double rate_nats,
                          MaxminMethod method = MaxminMethod::Auto);

// Closed-form scalar special case (matched marginals, independent null):
// E = (1/2) ln( (sigma_X^2 + sigma_N^2) / (sigma_N^2 + 2^{-2R} sigma_X^2) ),
// R in bits.
Nats remark_scalar_exponent(double sigma_X2, double sigma_N2, double rate_bits);

// Large-rate ceiling of the max-min term: f2 at Omega = K_{X|Y}^{-1}.
Nats saturation_exponent(const JointGaussianModel& model);

// Full exponent at rate R (bits). Verifies condition C first unless
// allow_unverified is set (ConditionCViolated when the check fails); with the
// override the breakdown is labeled condition_verified = false.
ExponentBreakdown exponent_rate(const JointGaussianModel& model, double rate_bits,
                                bool allow_unverified = false, unsigned seed = 1);

// Evaluates the exponent across a strictly-increasing grid of rates (bits).
// The condition check runs once for the whole sweep.
ExponentCurve sweep_curve(const JointGaussianModel& model, const std::vector<double>& grid_bits,
                          bool allow_unverified = false, unsigned seed = 1);

}  // namespace htexp
