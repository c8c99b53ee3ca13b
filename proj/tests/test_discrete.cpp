#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "htexp/discrete.hpp"
#include "htexp/errors.hpp"

using namespace htexp;

namespace {

// X = V uniform binary copy pair against a uniform-product alternative.
DiscreteJointModel copy_instance() {
  return DiscreteJointModel::create(2, 1, 2, {0.5, 0.0, 0.0, 0.5}, {1.0}, {0.5, 0.5},
                                    {0.5, 0.5});
}

// Entropy-based reference for I(A;B|C) used to cross-check the direct form.
double cmi_entropy_oracle(const std::vector<double>& joint, int na, int nb, int nc) {
  const auto h = [](const std::vector<double>& p) {
    double e = 0.0;
    for (double v : p) {
      if (v > 0.0) e -= v * std::log(v);
    }
    return e;
  };
  std::vector<double> ac(na * nc, 0.0), bc(nb * nc, 0.0), c(nc, 0.0);
  for (int a = 0; a < na; ++a)
    for (int b = 0; b < nb; ++b)
      for (int k = 0; k < nc; ++k) {
        const double p = joint[(a * nb + b) * nc + k];
        ac[a * nc + k] += p;
        bc[b * nc + k] += p;
        c[k] += p;
      }
  return h(ac) + h(bc) - h(c) - h(joint);
}

}  // namespace

TEST_CASE("model creation validates pmf structure") {
  CHECK_THROWS_AS(DiscreteJointModel::create(2, 1, 2, {0.5, 0.0, 0.0, 0.4}, {1.0},
                                             {0.5, 0.5}, {0.5, 0.5}),
                  InvalidInput);
  CHECK_THROWS_AS(DiscreteJointModel::create(2, 1, 2, {0.5, 0.0, 0.0, 0.5}, {1.0},
                                             {0.7, 0.5}, {0.5, 0.5}),
                  InvalidInput);
  CHECK_THROWS_AS(DiscreteJointModel::create(2, 1, 2, {1.2, -0.2, 0.0, 0.0}, {1.0},
                                             {0.5, 0.5}, {0.5, 0.5}),
                  InvalidInput);
  // null mass where the factored alternative has none
  CHECK_THROWS_AS(DiscreteJointModel::create(2, 1, 2, {0.5, 0.0, 0.0, 0.5}, {1.0},
                                             {1.0, 0.0}, {0.5, 0.5}),
                  AbsoluteContinuityViolated);
  // alphabet caps
  CHECK_THROWS_AS(DiscreteJointModel::create(5, 1, 2, std::vector<double>(20, 0.05), {1.0},
                                             std::vector<double>(5, 0.2), {0.5, 0.5}),
                  InstanceTooLarge);
}

TEST_CASE("marginals add up") {
  std::mt19937_64 rng(3);
  const auto m = testutil::random_discrete(rng, 3, 2, 3);
  const auto xu = m.marginal_xu();
  const auto uv = m.marginal_uv();
  double s1 = 0.0, s2 = 0.0;
  for (double v : xu) s1 += v;
  for (double v : uv) s2 += v;
  CHECK(s1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(xu[0 * 2 + 1] == doctest::Approx(m.p(0, 1, 0) + m.p(0, 1, 1) + m.p(0, 1, 2)));
}

TEST_CASE("discrete_kl: hand value, zero, and continuity guard") {
  CHECK(discrete_kl({0.5, 0.5}, {0.25, 0.75}).value ==
        doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)).epsilon(1e-12));
  CHECK(discrete_kl({0.3, 0.7}, {0.3, 0.7}).value == 0.0);
  CHECK_THROWS_AS(discrete_kl({0.5, 0.5}, {1.0, 0.0}), AbsoluteContinuityViolated);
  CHECK_THROWS_AS(discrete_kl({0.5, 0.5}, {0.25, 0.25, 0.5}), ShapeMismatch);
}

TEST_CASE("conditional mutual information: anchors and entropy cross-check") {
  // A = B uniform, C trivial: I = ln 2
  CHECK(conditional_mutual_information({0.5, 0.0, 0.0, 0.5}, 2, 2, 1).value ==
        doctest::Approx(std::numbers::ln2).epsilon(1e-12));
  // independent given C: zero
  CHECK(conditional_mutual_information({0.25, 0.25, 0.25, 0.25}, 2, 2, 1).value == 0.0);

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    const auto joint = testutil::random_pmf(rng, 2 * 3 * 2);
    CHECK(conditional_mutual_information(joint, 2, 3, 2).value ==
          doctest::Approx(cmi_entropy_oracle(joint, 2, 3, 2)).epsilon(1e-10));
  }
}

TEST_CASE("marginal-min condition: product references project onto product") {
  // Reference Pbar_XU is a product, so the I-projection onto fixed marginals
  // is P_X x P_U in closed form: the condition holds iff P_XU is that product.
  const auto product = DiscreteJointModel::create(
      2, 2, 2,
      {0.25 * 0.5, 0.25 * 0.5, 0.25 * 0.5, 0.25 * 0.5, 0.25 * 0.5, 0.25 * 0.5, 0.25 * 0.5,
       0.25 * 0.5},
      {0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5});
  const auto rep1 = check_marginal_min_condition(product);
  CHECK(rep1.holds);
  CHECK(rep1.kl_at_min == doctest::Approx(0.0).epsilon(1e-10));

  // correlated P_XU with uniform marginals: projection is the uniform product,
  // which is not P_XU
  const auto correlated = DiscreteJointModel::create(
      2, 2, 2, {0.2, 0.2, 0.05, 0.05, 0.05, 0.05, 0.2, 0.2}, {0.5, 0.5},
      {0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5});
  const auto rep2 = check_marginal_min_condition(correlated);
  CHECK_FALSE(rep2.holds);
  for (int x = 0; x < 2; ++x)
    for (int u = 0; u < 2; ++u) {
      CHECK(rep2.minimizer_xu[x * 2 + u] == doctest::Approx(0.25).epsilon(1e-9));
    }
  CHECK(rep2.tv_to_pxu == doctest::Approx(0.3).epsilon(1e-8));
}

TEST_CASE("structured instances satisfy the marginal-min condition by construction") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = testutil::random_centralized_discrete(rng, 2 + (trial % 2), 2, 2);
    CHECK(check_marginal_min_condition(m).holds);
  }
}

TEST_CASE("single-letter value on the copy instance") {
  const auto m = copy_instance();

  SUBCASE("zero rate gives zero channel term") {
    const auto r = lemma1_single_letter(m, 0.0);
    CHECK(r.value.value == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("partial rate: the constrained term equals the rate itself") {
    // V = X makes I(S;V|U) = I(S;X|U), so the max subject to I(S;X|U) <= R
    // is exactly R until saturation at H(X) = ln 2.
    const auto r = lemma1_single_letter(m, 0.3);
    CHECK(r.divergence_xu.value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.divergence_v_given_u.value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.channel_term.value == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(r.value.value == doctest::Approx(0.3).epsilon(1e-6));
  }
  SUBCASE("full rate saturates at ln 2") {
    const auto r = lemma1_single_letter(m, std::numbers::ln2);
    CHECK(r.value.value == doctest::Approx(std::numbers::ln2).epsilon(1e-9));
    const auto beyond = lemma1_single_letter(m, 5.0);
    CHECK(beyond.value.value == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
  }
  SUBCASE("negative rate is rejected") {
    CHECK_THROWS_AS(lemma1_single_letter(m, -0.1), InvalidInput);
  }
}

TEST_CASE("batch evaluation matches pointwise evaluation") {
  std::mt19937_64 rng(13);
  const auto m = testutil::random_centralized_discrete(rng, 2, 2, 2);
  const std::vector<double> rates{0.0, 0.2, 0.5, 2.0};
  const auto batch = lemma1_single_letter_batch(m, rates);
  REQUIRE(batch.size() == rates.size());
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const auto single = lemma1_single_letter(m, rates[i]);
    CHECK(batch[i].value.value == doctest::Approx(single.value.value).epsilon(1e-12));
  }
}

TEST_CASE("multi-letter exponents on the copy instance") {
  const auto m = copy_instance();
  const double ln2 = std::numbers::ln2;

  // full rate (W = 2): identity encoder reaches the full divergence ln 2
  CHECK(multiletter_exponent(m, ln2, 1).value == doctest::Approx(ln2).epsilon(1e-12));
  CHECK(multiletter_exponent(m, ln2, 2).value == doctest::Approx(ln2).epsilon(1e-12));

  // W = floor(2^{0.5}) = 1: a constant encoder carries nothing
  CHECK(multiletter_exponent(m, 0.5 * ln2, 1).value == doctest::Approx(0.0).epsilon(1e-12));
  // but two letters at rate 1/2 bit afford W = 2
  CHECK(multiletter_exponent(m, 0.5 * ln2, 2).value > 0.2);

  // enormous rates clamp W to |X|^n instead of overflowing
  CHECK(multiletter_exponent(m, 200.0, 1).value == doctest::Approx(ln2).epsilon(1e-12));

  CHECK_THROWS_AS(multiletter_exponent(m, ln2, 3), InvalidInput);
  CHECK_THROWS_AS(multiletter_exponent(m, -1.0, 1), InvalidInput);

  // |X|^2 = 9 > 8: enumeration cap
  std::mt19937_64 rng(17);
  const auto ternary = testutil::random_discrete(rng, 3, 2, 2);
  CHECK_THROWS_AS(multiletter_exponent(ternary, ln2, 2), InstanceTooLarge);
}

TEST_CASE("multi-letter sandwich on structured instances") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = testutil::random_centralized_discrete(rng, 2, 2, 2);
    for (double rate_bits : {0.25, 0.5, 1.0}) {
      const double rate_nats = rate_bits * std::numbers::ln2;
      const double e1 = multiletter_exponent(m, rate_nats, 1).value;
      const double e2 = multiletter_exponent(m, rate_nats, 2).value;
      const double theta = lemma1_single_letter(m, rate_nats).value.value;
      CHECK(e1 <= e2 + 1e-9);
      CHECK(e2 <= theta + 1e-6);
    }
  }
}

TEST_CASE("weakened achievability bound") {
  const auto m = copy_instance();
  const auto identity = TestChannel::identity(2, 4);

  SUBCASE("copy instance at full rate gives exactly ln 2") {
    CHECK(sha_weakened_bound(m, identity, std::numbers::ln2).value ==
          doctest::Approx(std::numbers::ln2).epsilon(1e-9));
  }
  SUBCASE("identity channel at half rate violates the rate constraint") {
    CHECK_THROWS_AS(sha_weakened_bound(m, identity, 0.5 * std::numbers::ln2),
                    RateConstraintViolated);
  }
  SUBCASE("channel shape is validated") {
    TestChannel bad;
    bad.ns = 3;
    bad.rows = {1.0, 0.0, 0.0};  // one row only
    CHECK_THROWS_AS(sha_weakened_bound(m, bad, 1.0), ShapeMismatch);
  }
  SUBCASE("floors the single-letter objective of its channel") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 8; ++trial) {
      // the floor needs the null (X, U) marginal at the information
      // projection of the alternative's
      const auto inst = testutil::random_centralized_discrete(rng, 2, 2, 2);
      const auto ch = testutil::random_channel(rng, 2, 4);
      // objective pieces of this channel
      std::vector<double> svu(ch.ns * 2 * 2, 0.0);
      for (int s = 0; s < ch.ns; ++s)
        for (int x = 0; x < 2; ++x)
          for (int u = 0; u < 2; ++u)
            for (int v = 0; v < 2; ++v) {
              svu[(s * 2 + v) * 2 + u] += ch.rows[x * ch.ns + s] * inst.p(x, u, v);
            }
      const double i_sv_u = conditional_mutual_information(svu, ch.ns, 2, 2).value;
      std::vector<double> sxu(ch.ns * 2 * 2, 0.0);
      for (int s = 0; s < ch.ns; ++s)
        for (int x = 0; x < 2; ++x)
          for (int u = 0; u < 2; ++u)
            for (int v = 0; v < 2; ++v) {
              sxu[(s * 2 + x) * 2 + u] += ch.rows[x * ch.ns + s] * inst.p(x, u, v);
            }
      const double rate = conditional_mutual_information(sxu, ch.ns, 2, 2).value + 0.05;
      const double theta_ch = discrete_kl(inst.marginal_xu(), inst.marginal_xu_bar()).value +
                              lemma1_single_letter(inst, 0.0).divergence_v_given_u.value +
                              i_sv_u;
      CHECK(sha_weakened_bound(inst, ch, rate).value >= theta_ch - 1e-6);
    }
  }
}
