#include "htexp/exponent.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "htexp/condition.hpp"

namespace htexp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBoxShrink = 1e-12;   // box upper bound (1 - kBoxShrink) K^{-1}
constexpr double kBoxFeasTol = 1e-8;   // whitened-eigenvalue feasibility slack
constexpr double kGapTol = 1e-7;       // certificate for Converged status

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& M) {
  return 0.5 * (M + M.transpose());
}

void require_symmetric_omega(const Eigen::MatrixXd& Omega, int m) {
  if (Omega.rows() != m || Omega.cols() != m) {
    std::ostringstream os;
    os << "Omega must be " << m << "x" << m << ", got " << Omega.rows() << "x"
       << Omega.cols();
    throw ShapeMismatch(os.str());
  }
  const double dev = (Omega - Omega.transpose()).cwiseAbs().maxCoeff();
  if (dev > kSymmetryTol) {
    std::ostringstream os;
    os << "Omega is not symmetric (max |Omega - Omega^T| = " << dev << ")";
    throw NotSymmetric(os.str());
  }
}

// Everything the inner trade-off needs, in whitened coordinates
// W = K^{1/2} Omega K^{1/2} with box 0 <= W <= (1 - kBoxShrink) I:
//   f1(W) = R + (1/2) ln det(I - W)
//   f2(W) = (1/2) ln det(I + msq W msq),   msq = (K^{-1/2} S K^{-1/2})^{1/2}.
struct WhitenedProblem {
  int m = 0;
  double R = 0.0;
  Eigen::MatrixXd Khalf, Khalfinv;
  Eigen::MatrixXd msq;
};

WhitenedProblem make_whitened(const JointGaussianModel& model, double rate_nats) {
  WhitenedProblem w;
  w.m = model.sensor_dim();
  w.R = rate_nats;
  const Eigen::MatrixXd K = schur_conditional(model.K_X(), model.K_XY(), model.K_Y());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  if (es.eigenvalues().minCoeff() < kStrictEigenFloor) {
    throw SingularBlock("max-min: K_{X|Y} is not strictly positive definite");
  }
  const Eigen::VectorXd sq = es.eigenvalues().cwiseSqrt();
  w.Khalf = es.eigenvectors() * sq.asDiagonal() * es.eigenvectors().transpose();
  w.Khalfinv =
      es.eigenvectors() * sq.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  const Eigen::MatrixXd S = effective_information_matrix(model);
  w.msq = matrix_sqrt_psd(symmetrized(w.Khalfinv * S * w.Khalfinv));
  return w;
}

double f1_whitened(const WhitenedProblem& w, const Eigen::MatrixXd& W) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W, Eigen::EigenvaluesOnly);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double gap = 1.0 - es.eigenvalues()(i);
    if (gap <= 0.0) return -kInf;
    acc += std::log(gap);
  }
  return w.R + 0.5 * acc;
}

Eigen::MatrixXd f1_gradient(const WhitenedProblem& w, const Eigen::MatrixXd& W) {
  Eigen::MatrixXd ImW = Eigen::MatrixXd::Identity(w.m, w.m) - W;
  return -0.5 * symmetrized(ImW.inverse());
}

double f2_whitened(const WhitenedProblem& w, const Eigen::MatrixXd& W) {
  const Eigen::MatrixXd M =
      Eigen::MatrixXd::Identity(w.m, w.m) + symmetrized(w.msq * W * w.msq);
  return 0.5 * log_det_pd(M, "max-min f2");
}

Eigen::MatrixXd f2_gradient(const WhitenedProblem& w, const Eigen::MatrixXd& W) {
  const Eigen::MatrixXd M =
      Eigen::MatrixXd::Identity(w.m, w.m) + symmetrized(w.msq * W * w.msq);
  return 0.5 * symmetrized(w.msq * M.inverse() * w.msq);
}

Eigen::MatrixXd project_box(const Eigen::MatrixXd& W) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(W));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseMin(1.0 - kBoxShrink);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Rigorous upper bound on max_{W in box} <obj>, from concavity at (W, grad):
// obj(W') <= obj(W) + <g, W' - W> and max over the box of <g, W'> is
// (1 - kBoxShrink) * sum of positive eigenvalues of g.
double concavity_certificate(double obj, const Eigen::MatrixXd& g, const Eigen::MatrixXd& W) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
  const double pos = es.eigenvalues().cwiseMax(0.0).sum();
  return obj + (1.0 - kBoxShrink) * pos - (g * W).trace();
}

struct InnerResult {
  double value = -kInf;   // lambda f1 + (1 - lambda) f2 at the returned W
  double certificate = kInf;
  Eigen::MatrixXd W;
  int iterations = 0;
};

// Projected-gradient ascent for the smooth concave inner problem
// max_{W in box} lambda f1 + (1 - lambda) f2, warm-started.
InnerResult maximize_weighted(const WhitenedProblem& w, double lambda,
                              const Eigen::MatrixXd& warm) {
  const auto obj = [&](const Eigen::MatrixXd& W) {
    const double a = lambda > 0.0 ? f1_whitened(w, W) : 0.0;
    if (lambda > 0.0 && a == -kInf) return -kInf;
    return lambda * a + (1.0 - lambda) * f2_whitened(w, W);
  };
  const auto grad = [&](const Eigen::MatrixXd& W) -> Eigen::MatrixXd {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(w.m, w.m);
    if (lambda > 0.0) g += lambda * f1_gradient(w, W);
    if (lambda < 1.0) g += (1.0 - lambda) * f2_gradient(w, W);
    return g;
  };

  InnerResult r;
  r.W = project_box(warm);
  double v = obj(r.W);
  // A warm start parked against the upper box face scores arbitrarily badly
  // once lambda > 0 (log barrier in f1) and the line search cannot recover
  // from there; fall back to the box center whenever it scores better.
  {
    const Eigen::MatrixXd Wc = 0.5 * Eigen::MatrixXd::Identity(w.m, w.m);
    const double vc = obj(Wc);
    if (vc > v) {
      r.W = Wc;
      v = vc;
    }
  }
  double step = 1.0;
  for (int iter = 0; iter < 2000; ++iter) {
    ++r.iterations;
    const Eigen::MatrixXd g = grad(r.W);
    bool accepted = false;
    Eigen::MatrixXd Wn;
    double vn = v;
    for (int bt = 0; bt < 60; ++bt) {
      Wn = project_box(r.W + step * g);
      vn = obj(Wn);
      const double ref = (g.array() * (Wn - r.W).array()).sum();
      if (vn > -kInf && vn >= v + 1e-4 * ref - 1e-18) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double moved = (Wn - r.W).norm();
    r.W = Wn;
    v = vn;
    step = std::min(step * 1.5, 1e3);
    if (moved <= 1e-13 * (1.0 + r.W.norm())) break;
  }
  r.value = v;
  r.certificate = concavity_certificate(v, grad(r.W), r.W);
  return r;
}

MaxminResult maxmin_bisection(const WhitenedProblem& w) {
  // m = 1: f1 - f2 is continuous and strictly decreasing in omega with
  // f1 - f2 = R > 0 at omega = 0, so the min switches at a single crossing.
  MaxminResult res;
  const auto eval = [&](double t) {  // t = whitened omega in [0, 1)
    Eigen::MatrixXd W(1, 1);
    W(0, 0) = t;
    return std::make_pair(f1_whitened(w, W), f2_whitened(w, W));
  };
  const double hi = 1.0 - kBoxShrink;
  auto [f1_hi, f2_hi] = eval(hi);
  double t_star = hi;
  int iters = 0;
  if (f1_hi - f2_hi < 0.0) {
    double lo = 0.0, up = hi;
    for (; iters < 200; ++iters) {
      const double mid = 0.5 * (lo + up);
      auto [a, b] = eval(mid);
      const double diff = a - b;
      if (std::abs(diff) <= 1e-14 || (up - lo) <= 1e-15) {
        t_star = mid;
        break;
      }
      (diff > 0.0 ? lo : up) = mid;
      t_star = mid;
    }
  }
  auto [f1_s, f2_s] = eval(t_star);
  res.value = kl_nats(std::min(f1_s, f2_s));
  Eigen::MatrixXd W(1, 1);
  W(0, 0) = t_star;
  res.omega_star = w.Khalfinv * W * w.Khalfinv;
  res.optimizer.iterations = iters;
  res.optimizer.final_gradient_norm = (f1_hi - f2_hi >= 0.0) ? 0.0 : std::abs(f1_s - f2_s);
  res.optimizer.status = res.optimizer.final_gradient_norm <= kGapTol
                             ? OptimizerReport::Status::Converged
                             : OptimizerReport::Status::MaxIters;
  return res;
}

MaxminResult maxmin_dual_ascent(const WhitenedProblem& w) {
  MaxminResult res;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(w.m, w.m);
  const auto primal = [&](const Eigen::MatrixXd& W) {
    return std::min(f1_whitened(w, W), f2_whitened(w, W));
  };

  // Stage 1: projected supergradient ascent on min(f1, f2), 1/k schedule.
  Eigen::MatrixXd W = 0.5 * I;
  Eigen::MatrixXd W_best = Eigen::MatrixXd::Zero(w.m, w.m);
  double F_best = primal(W_best);  // = min(R, 0) = 0
  int total_iters = 0;
  int since_improve = 0;
  for (int k = 1; k <= 5000; ++k) {
    ++total_iters;
    const double F = primal(W);
    if (F > F_best + 1e-9) {
      F_best = F;
      W_best = W;
      since_improve = 0;
    } else if (++since_improve >= 200) {
      break;
    }
    const Eigen::MatrixXd g =
        (f1_whitened(w, W) <= f2_whitened(w, W)) ? f1_gradient(w, W) : f2_gradient(w, W);
    const double gn = std::max(g.norm(), 1e-12);
    W = project_box(W + (0.5 / k) * (g / gn));
  }

  // Stage 2: Sion-dual certificate. phi(lambda) = max_W lambda f1 + (1-lambda) f2
  // is convex in lambda and phi >= maxmin everywhere; golden-section its
  // minimum while harvesting primal candidates from the inner maximizers.
  double upper = kInf;
  Eigen::MatrixXd warm = W_best;
  // Returns {phi(lambda), primal value at the inner maximizer}.
  const auto probe = [&](double lambda) {
    InnerResult ir = maximize_weighted(w, lambda, warm);
    total_iters += ir.iterations;
    warm = ir.W;
    const double F = primal(ir.W);
    if (F > F_best) {
      F_best = F;
      W_best = ir.W;
    }
    upper = std::min(upper, ir.certificate);
    return std::make_pair(ir.value, F);
  };

  probe(1.0);  // max f1 -> W = 0, phi = R
  probe(0.0);  // max f2 -> box corner
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = 1.0;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double p1 = probe(x1).first;
  double p2 = probe(x2).first;
  while (b - a > 1e-10) {
    if (p1 <= p2) {
      b = x2;
      x2 = x1;
      p2 = p1;
      x1 = b - invphi * (b - a);
      p1 = probe(x1).first;
    } else {
      a = x1;
      x1 = x2;
      p1 = p2;
      x2 = a + invphi * (b - a);
      p2 = probe(x2).first;
    }
  }

  // Stage 3: primal polish. The harvested value F(W(lambda)) drops away from
  // the saddle weight at first order in |lambda - lambda*| while phi is flat
  // there to second order, so phi comparisons cannot localize lambda* beyond
  // the noise floor of stage 2. Golden-section the harvested primal itself
  // over a slightly widened final bracket to remove the first-order error.
  {
    double ra = std::max(0.0, a - 1e-9);
    double rb = std::min(1.0, b + 1e-9);
    double y1 = rb - invphi * (rb - ra);
    double y2 = ra + invphi * (rb - ra);
    double q1 = probe(y1).second;
    double q2 = probe(y2).second;
    // 80 golden steps shrink the bracket by ~2e-17; the width test alone can
    // hang once it drops under the double spacing around lambda*.
    for (int it = 0; it < 80 && rb - ra > 1e-16; ++it) {
      if (q1 >= q2) {
        rb = y2;
        y2 = y1;
        q2 = q1;
        y1 = rb - invphi * (rb - ra);
        q1 = probe(y1).second;
      } else {
        ra = y1;
        y1 = y2;
        q1 = q2;
        y2 = ra + invphi * (rb - ra);
        q2 = probe(y2).second;
      }
    }
  }

  const double gap = std::max(upper - F_best, 0.0);
  res.value = kl_nats(F_best);
  res.omega_star = symmetrized(w.Khalfinv * W_best * w.Khalfinv);
  res.optimizer.iterations = total_iters;
  res.optimizer.final_gradient_norm = gap;
  res.optimizer.status = gap <= kGapTol ? OptimizerReport::Status::Converged
                                        : OptimizerReport::Status::MaxIters;
  return res;
}

ExponentBreakdown breakdown_at(const JointGaussianModel& model, double rate_bits,
                               const Nats& div_y, const Nats& div_xu, bool verified) {
  ExponentBreakdown b;
  b.divergence_Y = div_y;
  b.divergence_XgivenU = div_xu;
  MaxminResult mm = maxmin_omega(model, rate_bits * std::numbers::ln2);
  if (mm.optimizer.status != OptimizerReport::Status::Converged) {
    std::ostringstream os;
    os << "max-min solver failed to certify at R = " << rate_bits
       << " bits (gap = " << mm.optimizer.final_gradient_norm << ")";
    throw DidNotConverge(os.str());
  }
  b.maxmin_value = mm.value;
  b.omega_star = mm.omega_star;
  b.total = Nats{div_y.value + div_xu.value + mm.value.value};
  b.condition_verified = verified;
  return b;
}

}  // namespace

std::pair<Nats, Nats> divergence_terms(const JointGaussianModel& model) {
  return {gaussian_kl(model.K_Y(), model.Kbar_Y()), conditional_kl_x_given_u(model)};
}

double objective_first(const Eigen::MatrixXd& Omega, const JointGaussianModel& model,
                       double rate_nats) {
  if (rate_nats < 0.0) throw InvalidInput("objective_first: rate must be nonnegative");
  const int m = model.sensor_dim();
  require_symmetric_omega(Omega, m);
  const Eigen::MatrixXd K = schur_conditional(model.K_X(), model.K_XY(), model.K_Y());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ek(K);
  if (ek.eigenvalues().minCoeff() < kStrictEigenFloor) {
    throw SingularBlock("objective_first: K_{X|Y} is not strictly positive definite");
  }
  const Eigen::MatrixXd Khalf = ek.operatorSqrt();
  const Eigen::MatrixXd W = symmetrized(Khalf * Omega * Khalf);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo < -kBoxFeasTol || hi > 1.0 + kBoxFeasTol) {
    std::ostringstream os;
    os << "objective_first: whitened Omega eigenvalues [" << lo << ", " << hi
       << "] leave the box [0, 1]";
    throw OmegaOutOfBox(os.str());
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double gap = 1.0 - es.eigenvalues()(i);
    if (gap <= 0.0) return -kInf;  // singular corner: sentinel, not an error
    acc += std::log(gap);
  }
  return rate_nats + 0.5 * acc;
}

double objective_second(const Eigen::MatrixXd& Omega, const JointGaussianModel& model) {
  const int m = model.sensor_dim();
  require_symmetric_omega(Omega, m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eo(Omega, Eigen::EigenvaluesOnly);
  if (eo.eigenvalues().minCoeff() < -kBoxFeasTol) {
    std::ostringstream os;
    os << "objective_second: Omega has eigenvalue " << eo.eigenvalues().minCoeff()
       << " below 0";
    throw OmegaOutOfBox(os.str());
  }
  const Eigen::MatrixXd S = effective_information_matrix(model);
  const Eigen::MatrixXd Ssq = matrix_sqrt_psd(S);
  const Eigen::MatrixXd M =
      Eigen::MatrixXd::Identity(m, m) + symmetrized(Ssq * Omega * Ssq);
  return 0.5 * log_det_pd(M, "objective_second");
}

Eigen::MatrixXd effective_information_matrix(const JointGaussianModel& model) {
  const int q = model.detector_dim();
  Eigen::LLT<Eigen::MatrixXd> kyllt(model.K_Y());
  if (kyllt.info() != Eigen::Success) {
    throw SingularBlock("effective_information_matrix: K_Y is not strictly PD");
  }
  const Eigen::MatrixXd Pi = pseudo_inverse(model.Kbar_XY()) * model.Kbar_XY();  // q x q
  const Eigen::MatrixXd KyInv = kyllt.solve(Eigen::MatrixXd::Identity(q, q));
  const Eigen::MatrixXd B = KyInv - KyInv * model.Kbar_Y() * Pi * KyInv;
  Eigen::MatrixXd S = model.K_XY() * B * model.K_XY().transpose();
  const double scale = std::max(1.0, S.norm());
  const double asym = (S - S.transpose()).norm();
  if (asym > 1e-9 * scale) {
    std::ostringstream os;
    os << "effective information matrix is asymmetric beyond tolerance: ||S - S^T|| = "
       << asym << " (relative " << asym / scale << ")";
    throw EffectiveMatrixNotPsd(os.str());
  }
  S = symmetrized(S);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const double top = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-10 * top) {
    std::ostringstream os;
    os << "effective information matrix has negative eigenvalue "
       << es.eigenvalues().minCoeff();
    throw EffectiveMatrixNotPsd(os.str());
  }
  const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
}

MaxminResult maxmin_omega(const JointGaussianModel& model, double rate_nats,
                          MaxminMethod method) {
  if (rate_nats < 0.0) throw InvalidInput("maxmin_omega: rate must be nonnegative");
  const int m = model.sensor_dim();
  if (method == MaxminMethod::Bisection && m != 1) {
    throw WrongDimensions("maxmin_omega: bisection path requires m = 1");
  }
  MaxminResult res;
  if (rate_nats == 0.0) {
    // f1(Omega) = (1/2) ln det(I - .) <= 0 with equality only at Omega = 0.
    res.value = Nats{0.0};
    res.omega_star = Eigen::MatrixXd::Zero(m, m);
    res.optimizer.status = OptimizerReport::Status::Converged;
    return res;
  }
  WhitenedProblem w = make_whitened(model, rate_nats);
  if (w.msq.norm() <= 1e-14) {
    // S = 0: f2 is identically zero and Omega = 0 is optimal.
    res.value = Nats{0.0};
    res.omega_star = Eigen::MatrixXd::Zero(m, m);
    res.optimizer.status = OptimizerReport::Status::Converged;
    return res;
  }
  const bool use_bisection =
      method == MaxminMethod::Bisection || (method == MaxminMethod::Auto && m == 1);
  return use_bisection ? maxmin_bisection(w) : maxmin_dual_ascent(w);
}

Nats remark_scalar_exponent(double sigma_X2, double sigma_N2, double rate_bits) {
  if (!(sigma_X2 > 0.0) || !(sigma_N2 > 0.0)) {
    throw InvalidInput("remark_scalar_exponent: variances must be positive");
  }
  if (rate_bits < 0.0) {
    throw InvalidInput("remark_scalar_exponent: rate must be nonnegative");
  }
  const double shrink = std::pow(2.0, -2.0 * rate_bits);
  return kl_nats(0.5 * std::log((sigma_X2 + sigma_N2) / (sigma_N2 + shrink * sigma_X2)));
}

Nats saturation_exponent(const JointGaussianModel& model) {
  const Eigen::MatrixXd K = schur_conditional(model.K_X(), model.K_XY(), model.K_Y());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ek(K);
  if (ek.eigenvalues().minCoeff() < kStrictEigenFloor) {
    throw SingularBlock("saturation_exponent: K_{X|Y} is not strictly positive definite");
  }
  const Eigen::MatrixXd Kinvhalf = ek.operatorInverseSqrt();
  const Eigen::MatrixXd S = effective_information_matrix(model);
  const Eigen::MatrixXd M = symmetrized(Kinvhalf * S * Kinvhalf);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    acc += std::log1p(std::max(es.eigenvalues()(i), 0.0));
  }
  return kl_nats(0.5 * acc);
}

ExponentBreakdown exponent_rate(const JointGaussianModel& model, double rate_bits,
                                bool allow_unverified, unsigned seed) {
  if (rate_bits < 0.0) throw InvalidInput("exponent_rate: rate must be nonnegative");
  bool verified = false;
  if (!allow_unverified) {
    if (!condition_c_holds(model, seed)) {
      throw ConditionCViolated(
          "the optimality condition fails for this model; the single-letter formula is "
          "not known to be tight (pass the unverified override to evaluate it anyway)");
    }
    verified = true;
  }
  const auto [div_y, div_xu] = divergence_terms(model);
  return breakdown_at(model, rate_bits, div_y, div_xu, verified);
}

ExponentCurve sweep_curve(const JointGaussianModel& model, const std::vector<double>& grid_bits,
                          bool allow_unverified, unsigned seed) {
  for (std::size_t i = 0; i < grid_bits.size(); ++i) {
    if (grid_bits[i] < 0.0) throw InvalidInput("sweep_curve: rates must be nonnegative");
    if (i > 0 && grid_bits[i] <= grid_bits[i - 1]) {
      throw InvalidInput("sweep_curve: rate grid must be strictly increasing");
    }
  }
  ExponentCurve curve;
  if (grid_bits.empty()) return curve;
  bool verified = false;
  if (!allow_unverified) {
    if (!condition_c_holds(model, seed)) {
      throw ConditionCViolated(
          "the optimality condition fails for this model; the single-letter formula is "
          "not known to be tight (pass the unverified override to evaluate it anyway)");
    }
    verified = true;
  }
  const auto [div_y, div_xu] = divergence_terms(model);
  curve.samples.reserve(grid_bits.size());
  for (double r : grid_bits) {
    curve.samples.push_back({r, breakdown_at(model, r, div_y, div_xu, verified)});
  }
  return curve;
}

}  // namespace htexp
