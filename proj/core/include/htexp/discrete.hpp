#pragma once

#include <vector>

#include "htexp/errors.hpp"
#include "htexp/linalg.hpp"
#include "htexp/optimizer_report.hpp"

namespace htexp {

// Finite-alphabet analogue of the Gaussian testing problem, used as an
// independently computable oracle for the single-letter theory.
//
// P is the null joint pmf over (X, U, V), flattened row-major with index
// (x * nu + u) * nv + v. The alternative Pbar is always built from its
// factorization Pbar(x,u,v) = PbarU[u] * PbarXgivenU[u*nx + x] *
// PbarVgivenU[u*nv + v], so the required structure holds by construction.
// P must be absolutely continuous w.r.t. Pbar. Alphabet sizes are capped at 4
// each (InstanceTooLarge beyond; everything downstream enumerates).
class DiscreteJointModel {
 public:
  static DiscreteJointModel create(int nx, int nu, int nv, std::vector<double> P,
                                   std::vector<double> PbarU, std::vector<double> PbarXgivenU,
                                   std::vector<double> PbarVgivenU);

  int nx() const { return nx_; }
  int nu() const { return nu_; }
  int nv() const { return nv_; }

  double p(int x, int u, int v) const { return P_[(x * nu_ + u) * nv_ + v]; }
  double pbar(int x, int u, int v) const { return Pbar_[(x * nu_ + u) * nv_ + v]; }
  const std::vector<double>& joint() const { return P_; }
  const std::vector<double>& joint_bar() const { return Pbar_; }

  std::vector<double> marginal_xu() const;      // index x * nu + u
  std::vector<double> marginal_xu_bar() const;
  std::vector<double> marginal_uv() const;      // index u * nv + v
  std::vector<double> marginal_uv_bar() const;
  std::vector<double> marginal_x() const;
  std::vector<double> marginal_u() const;

 private:
  DiscreteJointModel() = default;
  int nx_ = 0, nu_ = 0, nv_ = 0;
  std::vector<double> P_;
  std::vector<double> Pbar_;
};

// Randomized-test channel from X to an auxiliary alphabet S, row-major
// rows[x * ns + s].
struct TestChannel {
  int ns = 0;
  std::vector<double> rows;

  // S = X channel (extra symbols unused), for ns >= nx.
  static TestChannel identity(int nx, int ns);
};

// KL divergence between pmfs over the same alphabet; terms with p = 0
// contribute nothing, p > 0 where q = 0 raises AbsoluteContinuityViolated.
Nats discrete_kl(const std::vector<double>& p, const std::vector<double>& q);

// I(A; B | C) for a joint pmf flattened as (a * nb + b) * nc + c.
Nats conditional_mutual_information(const std::vector<double>& joint, int na, int nb, int nc);

// Checks the zero-rate centralization condition: the minimizer of
// D(Ptilde || Pbar_XU) over { Ptilde : Ptilde_X = P_X, Ptilde_U = P_U }
// must be P_XU itself. The minimizer is found by iterative proportional
// fitting (alternating I-projections).
struct MarginalMinReport {
  bool holds = false;
  std::vector<double> minimizer_xu;  // index x * nu + u
  double kl_at_min = 0.0;
  double tv_to_pxu = 0.0;  // total variation (half L1) between minimizer and P_XU
  int iterations = 0;
};
MarginalMinReport check_marginal_min_condition(const DiscreteJointModel& model);

// Single-letter lower-bound formula
//   theta(R) = D(P_XU || Pbar_XU) + E[D(P_{V|U} || Pbar_{V|U})]
//            + max { I(S;V|U) : P_{S|X}, I(S;X|U) <= R },
// with the channel maximization solved exactly at full rate (R >= H(X|U),
// where S = X is optimal by data processing) and by simplex-grid search plus
// coordinate ascent and a constraint-boundary bisection polish otherwise.
// |S| = |X| + 2 suffices for the maximum and is what the search uses.
struct Lemma1Result {
  Nats value;
  Nats divergence_xu;
  Nats divergence_v_given_u;
  Nats channel_term;
  TestChannel best_channel;
  bool hypothesis_verified = false;  // zero-rate centralization condition
};
Lemma1Result lemma1_single_letter(const DiscreteJointModel& model, double rate_nats);

// Same, sharing one channel-grid pass across several rates.
std::vector<Lemma1Result> lemma1_single_letter_batch(const DiscreteJointModel& model,
                                                     const std::vector<double>& rates_nats);

// Exact n-letter exponent E_n = (1/n) max over deterministic encoders
// phi : X^n -> {1..W}, W = floor(2^{n R_bits}), of
// D(P_{phi(X^n) U^n V^n} || Pbar_{phi(X^n) U^n V^n}), by enumerating set
// partitions of X^n into at most W blocks (ties resolved toward the earliest
// partition in restricted-growth-string order). n must be 1 or 2;
// InstanceTooLarge when |X|^n > 8 or the message cap exceeds 4 after
// clamping W to |X|^n (more messages than sequences never helps).
Nats multiletter_exponent(const DiscreteJointModel& model, double rate_nats, int n);

// Weakened single-letter achievability bound for a fixed channel:
//   min( D1, D2 + R - I(S;X|UV) )
// where D1 minimizes D(Ptilde || P_{S|X} Pbar_XU Pbar_{V|U}) over Ptilde
// matching P on the (S,X) and (S,U,V) marginals, D2 the same with (S,X) and
// (U,V) marginals, and the mutual information is under P_{S|X} P_XUV.
// The channel must satisfy I(S;X|U) <= R (RateConstraintViolated otherwise);
// both minimizations run by iterative proportional fitting.
Nats sha_weakened_bound(const DiscreteJointModel& model, const TestChannel& channel,
                        double rate_nats);

}  // namespace htexp
