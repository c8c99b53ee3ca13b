#include <numbers>
#include <random>

#include <benchmark/benchmark.h>

#include "helpers.hpp"
#include "htexp/condition.hpp"
#include "htexp/discrete.hpp"
#include "htexp/exponent.hpp"
#include "htexp/han.hpp"
#include "htexp/linalg.hpp"

namespace {

void bm_gaussian_kl(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const int d = static_cast<int>(state.range(0));
  const Eigen::MatrixXd a = testutil::random_pd(rng, d);
  const Eigen::MatrixXd b = testutil::random_pd(rng, d);
  for (auto _ : state) {
    benchmark::DoNotOptimize(htexp::gaussian_kl(a, b).value);
  }
}
BENCHMARK(bm_gaussian_kl)->Arg(3)->Arg(8)->Arg(16);

void bm_pseudo_inverse(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const int d = static_cast<int>(state.range(0));
  const Eigen::MatrixXd a = testutil::random_low_rank_psd(rng, d, d / 2 + 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(htexp::pseudo_inverse(a));
  }
}
BENCHMARK(bm_pseudo_inverse)->Arg(4)->Arg(8)->Arg(16);

void bm_condition_objective(benchmark::State& state) {
  const auto model = testutil::reference_pair();
  const Eigen::MatrixXd g = model.K_XY().transpose();
  for (auto _ : state) {
    benchmark::DoNotOptimize(htexp::condition_c_objective(g, model));
  }
}
BENCHMARK(bm_condition_objective);

void bm_condition_minimize(benchmark::State& state) {
  const auto model = testutil::reference_pair();
  for (auto _ : state) {
    benchmark::DoNotOptimize(htexp::minimize_condition_c(model).gap);
  }
}
BENCHMARK(bm_condition_minimize);

void bm_maxmin_bisection(benchmark::State& state) {
  const auto model = testutil::reference_pair();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        htexp::maxmin_omega(model, std::numbers::ln2, htexp::MaxminMethod::Bisection)
            .value.value);
  }
}
BENCHMARK(bm_maxmin_bisection);

void bm_maxmin_dual(benchmark::State& state) {
  std::mt19937_64 rng(3);
  // block-diagonal alternative keeps the effective matrix PSD for any draw
  const int m = 2, q = 2;
  const Eigen::MatrixXd k = testutil::random_pd(rng, m + q);
  Eigen::MatrixXd kbar = Eigen::MatrixXd::Zero(m + q, m + q);
  kbar.topLeftCorner(m, m) = k.topLeftCorner(m, m);
  kbar.bottomRightCorner(q, q) = testutil::random_pd(rng, q);
  const auto model = htexp::JointGaussianModel::create(m, q, k, kbar);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        htexp::maxmin_omega(model, std::numbers::ln2, htexp::MaxminMethod::DualAscent)
            .value.value);
  }
}
BENCHMARK(bm_maxmin_dual);

void bm_single_letter_partial_rate(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const auto model = testutil::random_centralized_discrete(rng, 2, 2, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        htexp::lemma1_single_letter(model, 0.5 * std::numbers::ln2).value.value);
  }
}
BENCHMARK(bm_single_letter_partial_rate)->Unit(benchmark::kMillisecond);

void bm_marginal_min_check(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const auto model = testutil::random_discrete(rng, 3, 3, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(htexp::check_marginal_min_condition(model).tv_to_pxu);
  }
}
BENCHMARK(bm_marginal_min_check);

void bm_han_baseline(benchmark::State& state) {
  const auto model = testutil::reference_pair();
  for (auto _ : state) {
    benchmark::DoNotOptimize(htexp::han_exponent_gaussian(model, 0.5).value.value);
  }
}
BENCHMARK(bm_han_baseline)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
