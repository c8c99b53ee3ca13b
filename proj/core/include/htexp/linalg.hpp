#pragma once

#include <Eigen/Dense>

#include "htexp/errors.hpp"

namespace htexp {

// Shared numerical tolerances.
inline constexpr double kSymmetryTol = 1e-10;      // absolute, entrywise
inline constexpr double kPsdEigenFloor = -1e-10;   // smallest admissible eigenvalue
inline constexpr double kStrictEigenFloor = 1e-10; // strict positive definiteness
inline constexpr double kKlZeroFloor = -1e-9;      // KL values in [floor, 0] clamp to 0
inline constexpr double kRankRelTol = 1e-10;       // relative cutoff for pinv / pdet rank

// Information quantity in natural-log units. All library internals are in
// nats; bits appear only at the CLI boundary.
struct Nats {
  double value = 0.0;
};

// Wraps a raw divergence value: clamps numerically-zero negatives (down to
// kKlZeroFloor) to exactly 0 and rejects anything genuinely negative.
Nats kl_nats(double raw);

// Symmetric positive semi-definite matrix, validated at construction:
// square, symmetric within kSymmetryTol, eigenvalues >= kPsdEigenFloor.
// validate_strict additionally requires eigenvalues >= kStrictEigenFloor.
class CovMatrix {
 public:
  static CovMatrix validate(const Eigen::MatrixXd& raw);
  static CovMatrix validate_strict(const Eigen::MatrixXd& raw);

  const Eigen::MatrixXd& entries() const { return entries_; }
  Eigen::Index dim() const { return entries_.rows(); }

 private:
  explicit CovMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {}
  Eigen::MatrixXd entries_;
};

// Convenience free-function form of CovMatrix::validate.
CovMatrix validate_covariance(const Eigen::MatrixXd& raw);

// A zero-mean jointly Gaussian hypothesis pair. The sensor observes the first
// m coordinates (X), the detector the remaining q (Y); K is the covariance of
// (X, Y) under the null hypothesis and Kbar under the alternative. Both Y
// marginal blocks must be strictly positive definite (they get inverted).
class JointGaussianModel {
 public:
  static JointGaussianModel create(int m, int q, const Eigen::MatrixXd& K,
                                   const Eigen::MatrixXd& Kbar);

  int sensor_dim() const { return m_; }
  int detector_dim() const { return q_; }

  const Eigen::MatrixXd& K() const { return K_; }
  const Eigen::MatrixXd& Kbar() const { return Kbar_; }

  Eigen::MatrixXd K_X() const { return K_.topLeftCorner(m_, m_); }
  Eigen::MatrixXd K_Y() const { return K_.bottomRightCorner(q_, q_); }
  Eigen::MatrixXd K_XY() const { return K_.topRightCorner(m_, q_); }
  Eigen::MatrixXd Kbar_X() const { return Kbar_.topLeftCorner(m_, m_); }
  Eigen::MatrixXd Kbar_Y() const { return Kbar_.bottomRightCorner(q_, q_); }
  Eigen::MatrixXd Kbar_XY() const { return Kbar_.topRightCorner(m_, q_); }

 private:
  JointGaussianModel(int m, int q, Eigen::MatrixXd K, Eigen::MatrixXd Kbar)
      : m_(m), q_(q), K_(std::move(K)), Kbar_(std::move(Kbar)) {}

  int m_ = 0;
  int q_ = 0;
  Eigen::MatrixXd K_;
  Eigen::MatrixXd Kbar_;
};

// Conditional covariance K_{X|Y} = K_X - K_XY K_Y^{-1} K_XY^T.
// K_Y must be strictly positive definite (SingularBlock otherwise).
Eigen::MatrixXd schur_conditional(const Eigen::MatrixXd& K_X,
                                  const Eigen::MatrixXd& K_XY,
                                  const Eigen::MatrixXd& K_Y);

// Moore-Penrose pseudo-inverse via SVD with relative rank cutoff kRankRelTol.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& M);

// Pseudo-determinant of a symmetric PSD matrix: product of eigenvalues above
// the relative rank cutoff (1 for the zero matrix, by the empty-product
// convention).
double pseudo_det(const Eigen::MatrixXd& M);

// D( N(0, K0) || N(0, K1) ) = (tr(K1^{-1} K0) - d + ln det K1 - ln det K0)/2.
// Both matrices must be strictly positive definite.
Nats gaussian_kl(const Eigen::MatrixXd& K0, const Eigen::MatrixXd& K1);

// Abar = Kbar_XY Kbar_Y^{-1}, the alternative-hypothesis regression of X on
// Y: U = Abar Y is the detector-side auxiliary E_bar[X|Y].
Eigen::MatrixXd regression_matrix(const JointGaussianModel& model);

// E_{P_U}[ D( P_{X|U} || Pbar_{X|U} ) ] for U = Abar Y. Under P the pair
// (X, U) is jointly Gaussian with cov(X,U) = K_XY Abar^T and cov(U) =
// Abar K_Y Abar^T (possibly singular, hence pseudo-inverse conditioning);
// under the alternative Pbar_{X|U} has covariance Kbar_{X|Y}. The value is
// the Gaussian divergence between those two conditional covariances.
Nats conditional_kl_x_given_u(const JointGaussianModel& model);

// Symmetric PSD square root (eigenvalues clipped at 0 before sqrt).
Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& M);

// ln det of a strictly PD matrix via Cholesky; SingularBlock on failure.
// `who` names the matrix in error messages.
double log_det_pd(const Eigen::MatrixXd& M, const char* who);

}  // namespace htexp
