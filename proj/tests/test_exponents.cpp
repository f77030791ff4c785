#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "dnl/exponents.hpp"

using namespace dnl;

TEST(Exponents, ConfigAValues) {
  const ModelParams mp(1, 0.5, 3.0, 1.0);
  const auto ex = derive_exponents(mp);
  EXPECT_NEAR(ex.beta, 0.4, 1e-15);
  EXPECT_NEAR(ex.d_beta, 0.4, 1e-15);
  EXPECT_TRUE(std::isinf(ex.q_s));
  EXPECT_NEAR(ex.alpha_smooth, 0.5, 1e-15);
  EXPECT_NEAR(ex.gamma_smooth, 0.5, 1e-15);
  EXPECT_EQ(ex.regime, DecayRegime::superlinear);
  EXPECT_NEAR(ex.tail_exponent, 2.5, 1e-15);
  EXPECT_EQ(ex.log_power, 0.0);
}

TEST(Exponents, ThresholdsAgainstQuadraticRoot) {
  // With d = 1, s = 1/2, m = 1 the transition polynomial is (q^2 + q - 4)/2.
  const ModelParams mp(1, 0.5, 3.0, 1.0);
  const auto ex = derive_exponents(mp);
  EXPECT_NEAR(ex.p_mc, 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(ex.p_one, (-1.0 + std::sqrt(17.0)) / 2.0, 1e-12);
  const double q = ex.p_one;
  EXPECT_LT(std::abs((mp.s * q + mp.d) * mp.m * (q - 1.0) - mp.d), 1e-12);
}

TEST(Exponents, TwoDimensionalPorousCase) {
  const auto ex = derive_exponents(ModelParams(2, 0.5, 2.0, 2.0));
  EXPECT_NEAR(ex.beta, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(ex.d_beta, 2.0 / 3.0, 1e-15);
}

TEST(Exponents, Classification) {
  EXPECT_EQ(derive_exponents(ModelParams(1, 0.5, 3.0, 1.0)).regime, DecayRegime::superlinear);
  EXPECT_EQ(derive_exponents(ModelParams(1, 0.5, 1.45, 1.0)).regime, DecayRegime::sublinear);
  const double p1 = (-1.0 + std::sqrt(17.0)) / 2.0;
  EXPECT_EQ(derive_exponents(ModelParams(1, 0.5, p1, 1.0)).regime, DecayRegime::critical);
  const auto crit = derive_exponents(ModelParams(1, 0.5, p1, 1.0));
  EXPECT_EQ(crit.log_power, 1.0);
}

TEST(Exponents, Errors) {
  EXPECT_THROW(ModelParams(0, 0.5, 2.0, 1.0), ConfigError);
  EXPECT_THROW(ModelParams(1, 1.0, 2.0, 1.0), ConfigError);
  EXPECT_THROW(ModelParams(1, 0.5, 1.0, 1.0), ConfigError);
  EXPECT_THROW(ModelParams(1, 0.5, 2.0, 0.0), ConfigError);
  EXPECT_THROW(derive_exponents(ModelParams(1, 0.5, 1.3, 1.0)), RegimeError);
  EXPECT_THROW(derive_exponents(ModelParams(1, 0.5, 2.0, 1.0)), DegenerateError);
  EXPECT_THROW(derive_exponents(ModelParams(1, 0.25, 4.0, 0.5)), DegenerateError);
}

TEST(Exponents, DecayLaw) {
  const ModelParams a(1, 0.5, 3.0, 1.0);
  const auto ea = derive_exponents(a);
  EXPECT_DOUBLE_EQ(decay_g(1.0, a, ea), 1.0);
  EXPECT_NEAR(decay_g(2.0, a, ea), 0.1767766952966369, 1e-15);
  EXPECT_THROW(decay_g(0.0, a, ea), DomainError);

  const ModelParams b(1, 0.5, 1.45, 1.0);
  const auto eb = derive_exponents(b);
  EXPECT_NEAR(eb.tail_exponent, 0.725 / 0.55, 1e-14);
  EXPECT_NEAR(decay_g(3.0, b, eb), std::pow(3.0, -0.725 / 0.55), 1e-15);

  const double p1 = (-1.0 + std::sqrt(17.0)) / 2.0;
  const ModelParams c(1, 0.5, p1, 1.0);
  const auto ec = derive_exponents(c);
  EXPECT_THROW(decay_g(1.0, c, ec), DomainError);
  EXPECT_GT(decay_g(2.0, c, ec), 0.0);
}

class ExponentSweep : public ::testing::TestWithParam<std::tuple<int, double, double>> {};

TEST_P(ExponentSweep, Invariants) {
  const auto [d, s, m] = GetParam();
  const ModelParams base(d, s, 2.0, m);
  const double pmc = critical_exponent(base);
  const double p1 = decay_transition_exponent(base);
  EXPECT_LT(1.0, pmc);
  EXPECT_LT(pmc, p1);
  EXPECT_LT(p1, 1.0 + 1.0 / m);
  // Both tail laws coincide at the transition point.
  EXPECT_NEAR(d + s * p1, s * p1 / (1.0 - m * (p1 - 1.0)), 1e-9);

  for (double p : {0.5 * (pmc + p1), p1 + 0.3, d / s - 0.2, d / s + 0.4}) {
    if (p <= pmc || std::abs(m * (p - 1.0) - 1.0) < 1e-6 || std::abs(p - d / s) < 1e-6) continue;
    const ModelParams mp(d, s, p, m);
    const auto ex = derive_exponents(mp);
    EXPECT_GT(ex.beta, 0.0);
    if (p < d / s) EXPECT_NEAR(ex.alpha_smooth, ex.d_beta, 1e-12 * std::max(1.0, ex.d_beta));
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 40; ++k) {
      const double r = 1.05 + 0.25 * k;
      const double g = decay_g(r, mp, ex);
      EXPECT_LT(g, prev);
      prev = g;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Grid, ExponentSweep,
                         ::testing::Combine(::testing::Values(1, 2, 3), ::testing::Values(0.25, 0.5, 0.8),
                                            ::testing::Values(0.5, 1.0, 2.0)));
