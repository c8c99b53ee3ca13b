#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "htexp/condition.hpp"
#include "htexp/discrete.hpp"
#include "htexp/errors.hpp"
#include "htexp/linalg.hpp"

namespace testutil {

inline Eigen::MatrixXd random_gaussian_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = n(rng);
  return a;
}

// Random PSD matrix (Wishart-style); jitter > 0 makes it safely PD.
inline Eigen::MatrixXd random_psd(std::mt19937_64& rng, int d, double jitter = 0.0) {
  const Eigen::MatrixXd a = random_gaussian_matrix(rng, d, d);
  Eigen::MatrixXd m = a * a.transpose() / d + jitter * Eigen::MatrixXd::Identity(d, d);
  return 0.5 * (m + m.transpose());
}

inline Eigen::MatrixXd random_pd(std::mt19937_64& rng, int d) { return random_psd(rng, d, 0.5); }

// Random PSD with prescribed rank r < d.
inline Eigen::MatrixXd random_low_rank_psd(std::mt19937_64& rng, int d, int r) {
  const Eigen::MatrixXd a = random_gaussian_matrix(rng, d, r);
  Eigen::MatrixXd m = a * a.transpose() / d;
  return 0.5 * (m + m.transpose());
}

inline htexp::JointGaussianModel random_model(std::mt19937_64& rng, int m, int q) {
  return htexp::JointGaussianModel::create(m, q, random_pd(rng, m + q), random_pd(rng, m + q));
}

// Rejection-samples admissible construction parameters; the resulting pair
// satisfies the scalar optimality conditions by design.
inline htexp::JointGaussianModel random_pair_model(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  for (int attempt = 0; attempt < 20000; ++attempt) {
    try {
      return htexp::build_example_pair(u(rng), u(rng), u(rng));
    } catch (const htexp::Error&) {
      continue;
    }
  }
  throw std::runtime_error("random_pair_model: rejection sampling exhausted");
}

// The paper-style reference pair used throughout the tests.
inline htexp::JointGaussianModel reference_pair() {
  return htexp::build_example_pair(0.4, -0.8, 0.1);
}

// Scalar testing-against-independence instance: Y = X + N under the null,
// independent with the same marginals under the alternative.
inline htexp::JointGaussianModel independence_model(double sigma_x2, double sigma_n2) {
  Eigen::MatrixXd k(2, 2), kbar(2, 2);
  k << sigma_x2, sigma_x2, sigma_x2, sigma_x2 + sigma_n2;
  kbar << sigma_x2, 0.0, 0.0, sigma_x2 + sigma_n2;
  return htexp::JointGaussianModel::create(1, 1, k, kbar);
}

inline std::vector<double> random_pmf(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> p(n);
  double sum = 0.0;
  for (double& v : p) sum += (v = u(rng));
  for (double& v : p) v /= sum;
  return p;
}

// Random discrete instance whose alternative shares the required structure;
// the null is sampled freely (its marginal condition may or may not hold).
inline htexp::DiscreteJointModel random_discrete(std::mt19937_64& rng, int nx, int nu, int nv) {
  const auto joint = random_pmf(rng, nx * nu * nv);
  auto pu = random_pmf(rng, nu);
  std::vector<double> pxgu, pvgu;
  for (int u = 0; u < nu; ++u) {
    for (double v : random_pmf(rng, nx)) pxgu.push_back(v);
    for (double v : random_pmf(rng, nv)) pvgu.push_back(v);
  }
  return htexp::DiscreteJointModel::create(nx, nu, nv, joint, std::move(pu), std::move(pxgu),
                                           std::move(pvgu));
}

// Random instance built so the zero-rate marginal-minimization condition
// holds: P(x,u,v) = Pbar(x,u) * Q(v | x,u) makes P_XU equal Pbar_XU, which is
// trivially its own projection.
inline htexp::DiscreteJointModel random_centralized_discrete(std::mt19937_64& rng, int nx, int nu,
                                                             int nv) {
  auto pu = random_pmf(rng, nu);
  std::vector<double> pxgu, pvgu;
  for (int u = 0; u < nu; ++u) {
    for (double v : random_pmf(rng, nx)) pxgu.push_back(v);
    for (double v : random_pmf(rng, nv)) pvgu.push_back(v);
  }
  std::vector<double> joint(nx * nu * nv);
  for (int x = 0; x < nx; ++x)
    for (int u = 0; u < nu; ++u) {
      const auto v_given_xu = random_pmf(rng, nv);
      for (int v = 0; v < nv; ++v) {
        joint[(x * nu + u) * nv + v] = pu[u] * pxgu[u * nx + x] * v_given_xu[v];
      }
    }
  return htexp::DiscreteJointModel::create(nx, nu, nv, std::move(joint), std::move(pu),
                                           std::move(pxgu), std::move(pvgu));
}

// Random channel rows via normalized positive weights.
inline htexp::TestChannel random_channel(std::mt19937_64& rng, int nx, int ns) {
  htexp::TestChannel ch;
  ch.ns = ns;
  for (int x = 0; x < nx; ++x) {
    for (double v : random_pmf(rng, ns)) ch.rows.push_back(v);
  }
  return ch;
}

}  // namespace testutil
