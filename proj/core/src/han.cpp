#include "htexp/han.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "htexp/errors.hpp"

namespace htexp {

namespace {

constexpr double kGradTol = 1e-8;
constexpr int kMaxInnerIters = 20000;

struct InnerSolve {
  double value = 0.0;
  Eigen::RowVectorXd F;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
};

// min over the X-Y cross block F of D(N(0, Sigma(F)) || N(0, Sigma_alt)).
// tr(Sigma_alt^{-1} Sigma(F)) is linear and -lndet Sigma(F) convex in F, so
// the problem is convex; plain gradient descent with Armijo backtracking
// (rejecting steps that leave the PD cone) converges.
class InnerProblem {
 public:
  // noise_var = +inf drops S and pins only the X and Y marginals.
  InnerProblem(const JointGaussianModel& model, double noise_var)
      : q_(model.detector_dim()), with_s_(std::isfinite(noise_var)) {
    const double kx = model.K_X()(0, 0);
    const double kbx = model.Kbar_X()(0, 0);
    const int d = (with_s_ ? 2 : 1) + q_;
    xrow_ = with_s_ ? 1 : 0;
    dim_ = d;
    template_.setZero(d, d);
    sigma_alt_.setZero(d, d);
    if (with_s_) {
      template_(0, 0) = kx + noise_var;
      template_(0, 1) = template_(1, 0) = kx;
      template_.block(0, 2, 1, q_) = model.K_XY();
      template_.block(2, 0, q_, 1) = model.K_XY().transpose();
      sigma_alt_(0, 0) = kbx + noise_var;
      sigma_alt_(0, 1) = sigma_alt_(1, 0) = kbx;
      sigma_alt_.block(0, 2, 1, q_) = model.Kbar_XY();
      sigma_alt_.block(2, 0, q_, 1) = model.Kbar_XY().transpose();
    }
    template_(xrow_, xrow_) = kx;
    template_.block(xrow_ + 1, xrow_ + 1, q_, q_) = model.K_Y();
    sigma_alt_(xrow_, xrow_) = kbx;
    sigma_alt_.block(xrow_ + 1, xrow_ + 1, q_, q_) = model.Kbar_Y();
    sigma_alt_.block(xrow_, xrow_ + 1, 1, q_) = model.Kbar_XY();
    sigma_alt_.block(xrow_ + 1, xrow_, q_, 1) = model.Kbar_XY().transpose();

    Eigen::LLT<Eigen::MatrixXd> llt(sigma_alt_);
    if (llt.info() != Eigen::Success) {
      throw SingularBlock("alternative covariance of (S, X, Y) is not positive definite");
    }
    alt_inv_ = llt.solve(Eigen::MatrixXd::Identity(d, d));
    logdet_alt_ = log_det_pd(sigma_alt_, "alternative covariance of (S, X, Y)");
    null_cross_ = model.K_XY();
    alt_cross_ = model.Kbar_XY();
  }

  Eigen::MatrixXd assemble(const Eigen::RowVectorXd& F) const {
    Eigen::MatrixXd s = template_;
    s.block(xrow_, xrow_ + 1, 1, q_) = F;
    s.block(xrow_ + 1, xrow_, q_, 1) = F.transpose();
    return s;
  }

  // KL in nats; +inf outside the PD cone.
  double objective(const Eigen::RowVectorXd& F) const {
    const Eigen::MatrixXd s = assemble(F);
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    double logdet = 0.0;
    const Eigen::MatrixXd L = llt.matrixL();
    for (int i = 0; i < dim_; ++i) logdet += 2.0 * std::log(L(i, i));
    return 0.5 * ((alt_inv_ * s).trace() - dim_ + logdet_alt_ - logdet);
  }

  Eigen::RowVectorXd gradient(const Eigen::RowVectorXd& F) const {
    const Eigen::MatrixXd s = assemble(F);
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) {
      throw SingularBlock("gradient requested outside the positive definite cone");
    }
    const Eigen::MatrixXd sinv = llt.solve(Eigen::MatrixXd::Identity(dim_, dim_));
    return alt_inv_.block(xrow_, xrow_ + 1, 1, q_) - sinv.block(xrow_, xrow_ + 1, 1, q_);
  }

  InnerSolve minimize(Eigen::RowVectorXd F0) const {
    if (!std::isfinite(objective(F0))) F0 = null_cross_;  // a valid covariance when K is PD
    InnerSolve sol;
    sol.F = F0;
    double obj = objective(sol.F);
    if (!std::isfinite(obj)) {
      throw SingularBlock("null covariance of (S, X, Y) is singular; need a nondegenerate model");
    }
    double step = 1.0;
    for (int it = 1; it <= kMaxInnerIters; ++it) {
      sol.iterations = it;
      const Eigen::RowVectorXd g = gradient(sol.F);
      sol.grad_norm = g.norm();
      if (sol.grad_norm <= kGradTol) {
        sol.converged = true;
        break;
      }
      double alpha = step;
      bool moved = false;
      for (int half = 0; half < 60; ++half) {
        const Eigen::RowVectorXd fn = sol.F - alpha * g;
        const double on = objective(fn);
        if (on <= obj - 1e-4 * alpha * sol.grad_norm * sol.grad_norm) {
          sol.F = fn;
          obj = on;
          step = std::min(alpha * 1.3, 1e6);
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;  // flat to machine precision
    }
    sol.value = obj;
    return sol;
  }

  const Eigen::RowVectorXd& warm_start() const { return alt_cross_; }

 private:
  int q_;
  bool with_s_;
  int xrow_ = 0;
  int dim_ = 0;
  Eigen::MatrixXd template_, sigma_alt_, alt_inv_;
  Eigen::RowVectorXd null_cross_, alt_cross_;
  double logdet_alt_ = 0.0;
};

HanResult package(const InnerSolve& sol, double noise_var) {
  HanResult r;
  r.value = kl_nats(sol.value);
  r.test_channel_noise_variance = noise_var;
  r.inner_minimizer_cross_block = sol.F;
  r.optimizer.iterations = sol.iterations;
  r.optimizer.final_gradient_norm = sol.grad_norm;
  r.optimizer.status =
      sol.converged ? OptimizerReport::Status::Converged : OptimizerReport::Status::MaxIters;
  return r;
}

}  // namespace

HanResult han_exponent_gaussian(const JointGaussianModel& model, double rate_bits) {
  if (model.sensor_dim() != 1) {
    throw WrongDimensions("the quantize-and-test baseline is implemented for scalar X only");
  }
  if (!(rate_bits >= 0.0)) {
    throw InvalidInput("han_exponent_gaussian: rate must be nonnegative");
  }
  const double rate_nats = rate_bits * std::numbers::ln2;
  if (rate_nats == 0.0) {
    const double inf = std::numeric_limits<double>::infinity();
    InnerProblem prob(model, inf);
    return package(prob.minimize(prob.warm_start()), inf);
  }

  const double kx = model.K_X()(0, 0);
  const double s_min = std::sqrt(kx / std::expm1(2.0 * rate_nats));
  const double s_max = std::max(1e3, 2.0 * s_min);

  Eigen::RowVectorXd warm = model.Kbar_XY();
  const auto value_at = [&](double sigma) {
    InnerProblem prob(model, sigma * sigma);
    InnerSolve sol = prob.minimize(warm);
    warm = sol.F;
    return sol.value;
  };

  // log-spaced pre-scan, then golden-section refinement of the best bracket
  const int kScan = 32;
  const double t_lo = std::log(s_min), t_hi = std::log(s_max);
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kScan; ++i) {
    const double t = t_lo + (t_hi - t_lo) * i / (kScan - 1);
    const double v = value_at(std::exp(t));
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  double a = t_lo + (t_hi - t_lo) * std::max(best - 1, 0) / (kScan - 1);
  double b = t_lo + (t_hi - t_lo) * std::min(best + 1, kScan - 1) / (kScan - 1);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = value_at(std::exp(c)), fd = value_at(std::exp(d));
  while (b - a > 1e-9) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = value_at(std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = value_at(std::exp(d));
    }
  }
  const double sigma_star = std::exp(0.5 * (a + b));
  InnerProblem prob(model, sigma_star * sigma_star);
  return package(prob.minimize(warm), sigma_star * sigma_star);
}

}  // namespace htexp
