#include "htexp/linalg.hpp"

#include <cmath>
#include <sstream>

namespace htexp {

namespace {

void require_square(const Eigen::MatrixXd& M, const char* who) {
  if (M.rows() != M.cols()) {
    std::ostringstream os;
    os << who << ": expected a square matrix, got " << M.rows() << "x" << M.cols();
    throw ShapeMismatch(os.str());
  }
}

void require_symmetric(const Eigen::MatrixXd& M, const char* who) {
  require_square(M, who);
  const double dev = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (dev > kSymmetryTol) {
    std::ostringstream os;
    os << who << ": matrix is not symmetric (max |M - M^T| = " << dev << ")";
    throw NotSymmetric(os.str());
  }
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& M) {
  return 0.5 * (M + M.transpose());
}

}  // namespace

Nats kl_nats(double raw) {
  if (raw < kKlZeroFloor) {
    std::ostringstream os;
    os << "divergence value " << raw << " is negative beyond the " << kKlZeroFloor
       << " numerical floor";
    throw Error(os.str());
  }
  return Nats{raw < 0.0 ? 0.0 : raw};
}

CovMatrix CovMatrix::validate(const Eigen::MatrixXd& raw) {
  require_symmetric(raw, "covariance");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(raw),
                                                    Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  if (lo < kPsdEigenFloor) {
    std::ostringstream os;
    os << "covariance is not PSD: smallest eigenvalue " << lo << " < " << kPsdEigenFloor;
    throw NotPsd(os.str());
  }
  return CovMatrix(symmetrized(raw));
}

CovMatrix CovMatrix::validate_strict(const Eigen::MatrixXd& raw) {
  CovMatrix c = validate(raw);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.entries(), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  if (lo < kStrictEigenFloor) {
    std::ostringstream os;
    os << "covariance is not strictly positive definite: smallest eigenvalue " << lo;
    throw NotPsd(os.str());
  }
  return c;
}

CovMatrix validate_covariance(const Eigen::MatrixXd& raw) {
  return CovMatrix::validate(raw);
}

JointGaussianModel JointGaussianModel::create(int m, int q, const Eigen::MatrixXd& K,
                                              const Eigen::MatrixXd& Kbar) {
  if (m < 1 || q < 1) {
    throw ShapeMismatch("model dimensions must satisfy m >= 1 and q >= 1");
  }
  const int d = m + q;
  if (K.rows() != d || K.cols() != d || Kbar.rows() != d || Kbar.cols() != d) {
    std::ostringstream os;
    os << "model covariances must be " << d << "x" << d << ", got K " << K.rows() << "x"
       << K.cols() << " and Kbar " << Kbar.rows() << "x" << Kbar.cols();
    throw ShapeMismatch(os.str());
  }
  const Eigen::MatrixXd Kv = CovMatrix::validate(K).entries();
  const Eigen::MatrixXd Kbarv = CovMatrix::validate(Kbar).entries();
  // Both Y marginals are inverted throughout; require them strictly PD.
  CovMatrix::validate_strict(Kv.bottomRightCorner(q, q));
  CovMatrix::validate_strict(Kbarv.bottomRightCorner(q, q));
  return JointGaussianModel(m, q, Kv, Kbarv);
}

Eigen::MatrixXd schur_conditional(const Eigen::MatrixXd& K_X, const Eigen::MatrixXd& K_XY,
                                  const Eigen::MatrixXd& K_Y) {
  require_symmetric(K_X, "schur_conditional K_X");
  require_symmetric(K_Y, "schur_conditional K_Y");
  if (K_XY.rows() != K_X.rows() || K_XY.cols() != K_Y.rows()) {
    std::ostringstream os;
    os << "schur_conditional: cross block is " << K_XY.rows() << "x" << K_XY.cols()
       << ", expected " << K_X.rows() << "x" << K_Y.rows();
    throw ShapeMismatch(os.str());
  }
  Eigen::LLT<Eigen::MatrixXd> llt(K_Y);
  if (llt.info() != Eigen::Success) {
    throw SingularBlock("schur_conditional: conditioning block K_Y is not strictly PD");
  }
  return symmetrized(K_X - K_XY * llt.solve(K_XY.transpose()));
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return Eigen::MatrixXd::Zero(M.cols(), M.rows());
  const double cutoff = kRankRelTol * sv(0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

double pseudo_det(const Eigen::MatrixXd& M) {
  require_symmetric(M, "pseudo_det");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(M), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double top = ev.size() ? std::abs(ev(ev.size() - 1)) : 0.0;
  const double cutoff = kRankRelTol * top;
  double det = 1.0;  // empty product
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > cutoff && ev(i) > 0.0) det *= ev(i);
  }
  return det;
}

double log_det_pd(const Eigen::MatrixXd& M, const char* who) {
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    std::ostringstream os;
    os << who << ": matrix is not strictly positive definite";
    throw SingularBlock(os.str());
  }
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

Nats gaussian_kl(const Eigen::MatrixXd& K0, const Eigen::MatrixXd& K1) {
  require_symmetric(K0, "gaussian_kl K0");
  require_symmetric(K1, "gaussian_kl K1");
  if (K0.rows() != K1.rows()) {
    std::ostringstream os;
    os << "gaussian_kl: dimension mismatch " << K0.rows() << " vs " << K1.rows();
    throw ShapeMismatch(os.str());
  }
  const double d = static_cast<double>(K0.rows());
  Eigen::LLT<Eigen::MatrixXd> llt1(K1);
  if (llt1.info() != Eigen::Success) {
    throw SingularBlock("gaussian_kl: K1 is not strictly positive definite");
  }
  const double logdet1 = 2.0 * llt1.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double logdet0 = log_det_pd(K0, "gaussian_kl K0");
  const double trace = llt1.solve(K0).trace();
  return kl_nats(0.5 * (trace - d + logdet1 - logdet0));
}

Eigen::MatrixXd regression_matrix(const JointGaussianModel& model) {
  Eigen::LLT<Eigen::MatrixXd> llt(model.Kbar_Y());
  if (llt.info() != Eigen::Success) {
    throw SingularBlock("regression_matrix: Kbar_Y is not strictly PD");
  }
  // Abar = Kbar_XY Kbar_Y^{-1}  (m x q)
  return llt.solve(model.Kbar_XY().transpose()).transpose();
}

Nats conditional_kl_x_given_u(const JointGaussianModel& model) {
  const Eigen::MatrixXd Abar = regression_matrix(model);
  const Eigen::MatrixXd Cp = model.K_XY() * Abar.transpose();        // cov_P(X, U)
  const Eigen::MatrixXd Qp = symmetrized(Abar * model.K_Y() * Abar.transpose());  // cov_P(U)
  const Eigen::MatrixXd K_XgU =
      symmetrized(model.K_X() - Cp * pseudo_inverse(Qp) * Cp.transpose());
  const Eigen::MatrixXd Kbar_XgY =
      schur_conditional(model.Kbar_X(), model.Kbar_XY(), model.Kbar_Y());
  return gaussian_kl(K_XgU, Kbar_XgY);
}

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& M) {
  require_symmetric(M, "matrix_sqrt_psd");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(M));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace htexp
