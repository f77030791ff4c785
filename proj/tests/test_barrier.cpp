#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/hypergeometric_1F1.hpp>
#include <cmath>
#include <numbers>

#include "dnl/barrier.hpp"
#include "dnl/selfsim.hpp"

using namespace dnl;

namespace {
const ModelParams kConfigA{1, 0.5, 3.0, 1.0};
const ModelParams kConfigB{1, 0.5, 1.45, 1.0};

// int_R (f(x) - f(y)) |x - y|^{-1-2s} dy for f = exp(-y^2), from the Fourier
// symbol |xi|^{2s} and the normalising constant of the fractional Laplacian.
double gaussian_pv(double x, double s) {
  using boost::math::tgamma;
  const double pi = std::numbers::pi;
  const double c1s = s * std::pow(4.0, s) * tgamma(0.5 + s) / (std::sqrt(pi) * tgamma(1.0 - s));
  const double lap = std::pow(4.0, s) * tgamma(s + 0.5) / std::sqrt(pi) *
                     boost::math::hypergeometric_1F1(s + 0.5, 0.5, -x * x);
  return lap / c1s;
}

BarrierConstants config_a_barrier() {
  auto ex = derive_exponents(kConfigA);
  auto dom = build_domain(GridMode::full_line, 1, 20.0, 400);
  return build_barrier(kConfigA, ex, datum_stats(box_datum(dom, 1.0, -1.0, 1.0)));
}
}  // namespace

TEST(Matching, Arithmetic) {
  auto c = match_constants(DecayRegime::superlinear, 3.0, 2.0, 4.0, {1, 0.75, 2.0, 1.0});
  EXPECT_DOUBLE_EQ(c.A, 1.5);
  EXPECT_DOUBLE_EQ(c.C2, 3.0 * std::pow(4.0, 1.5));
  EXPECT_DOUBLE_EQ(c.C2, 24.0);
  EXPECT_THROW(match_constants(DecayRegime::superlinear, 1.0, 2.0, 1.0, kConfigA), ConfigError);
  EXPECT_THROW(match_constants(DecayRegime::critical, 1.0, 0.5, 0.9, kConfigA), ConfigError);
}

TEST(Matching, ContinuityAndMonotonicity) {
  const ModelParams crit{1, 0.5, 1.5616, 1.0};
  std::vector<std::pair<ModelParams, BarrierConstants>> cases{
      {kConfigA, match_constants(DecayRegime::superlinear, 3.0, 0.5, 4.0, kConfigA)},
      {crit, match_constants(DecayRegime::critical, 2.0, 0.5, 8.0, crit)},
      {kConfigB, match_constants(DecayRegime::sublinear, 2.0, 0.5, 8.0, kConfigB)},
      {kConfigB, match_sublinear(3.0, 2.0, kConfigB)}};
  for (const auto& [mp, c] : cases) {
    for (double R : {c.R1, c.R2}) {
      auto left = eval_G_branch(R, branch_of(R, c), c, mp);
      auto right = eval_G_branch(R, branch_of(R * (1.0 + 1e-15), c), c, mp);
      EXPECT_NEAR(left, right, 1e-10 * left) << "R = " << R;
    }
    double prev = eval_G(0.0, c, mp);
    for (double r = 0.01; r < 100.0; r *= 1.05) {
      const double g = eval_G(r, c, mp);
      EXPECT_LE(g, prev * (1.0 + 1e-14)) << "r = " << r;
      prev = g;
    }
  }
}

TEST(Matching, SlopeMatchesDifferences) {
  const ModelParams crit{1, 0.5, 1.5616, 1.0};
  auto c = match_constants(DecayRegime::critical, 2.0, 0.5, 8.0, crit);
  for (double r : {0.3, 2.0, 20.0}) {
    const double h = 1e-6 * r;
    const double fd = (eval_G(r + h, c, crit) - eval_G(r - h, c, crit)) / (2.0 * h);
    EXPECT_NEAR(eval_G_slope(r, c, crit), fd, 1e-6 * std::abs(fd) + 1e-12);
  }
}

TEST(SpaceTime, Branches) {
  auto ex = derive_exponents(kConfigA);
  auto c = match_constants(DecayRegime::superlinear, 4.0, 1.0, 16.0, kConfigA);
  EXPECT_DOUBLE_EQ(eval_H(0.5, 0.0, c, kConfigA, ex), 4.0);
  EXPECT_NEAR(eval_H(4.0, 0.0, c, kConfigA, ex), 1.0, 1e-14);
  EXPECT_NEAR(eval_H(-32.0, 0.0, c, kConfigA, ex), c.C2 * std::pow(32.0, -2.5), 1e-14);
  // (t+1)^{-d beta} with d beta = 0.4
  const double t = 31.0;
  EXPECT_NEAR(eval_H(0.0, t, c, kConfigA, ex), 4.0 * std::pow(32.0, -0.4), 1e-13);
  EXPECT_NEAR(eval_H(8.0, t, c, kConfigA, ex), std::pow(32.0, -0.4) * eval_G(8.0 / 4.0, c, kConfigA), 1e-13);
  EXPECT_THROW(eval_H(0.0, -1.0, c, kConfigA, ex), DomainError);
}

TEST(Residual, PvMatchesGaussianOracle) {
  for (double s : {0.3, 0.5, 0.75}) {
    auto gm = [](double r) { return std::exp(-r * r); };
    for (double z : {0.25, 0.7, 1.5, 3.0}) {
      // The oracle is untruncated; a truncation at 1e-9 z would cost ~1e-4 here.
      const double got = detail::radial_pv(gm, z, 1, 2.0 * s, 2.0, {}, 1e-14);
      EXPECT_NEAR(got, gaussian_pv(z, s), 1e-6 * std::max(1.0, std::abs(gaussian_pv(z, s))))
          << "s = " << s << " z = " << z;
    }
  }
  EXPECT_NEAR(gaussian_pv(0.0, 0.5), 2.0 * std::sqrt(std::numbers::pi), 1e-12);
}

TEST(Residual, IntermediateRegion) {
  auto ex = derive_exponents(kConfigA);
  auto c = match_constants(DecayRegime::superlinear, 4.0, 1.0, 16.0, kConfigA);
  EXPECT_THROW(residual_parts(c, 8.0, kConfigA, ex), DomainError);
  EXPECT_EQ(region_of(0.5, c, kConfigA), BarrierRegion::near);
  EXPECT_EQ(region_of(40.0, c, kConfigA), BarrierRegion::far);
  EXPECT_THROW(residual_parts(c, 0.0, kConfigA, ex), DomainError);
}

TEST(Residual, ZeroBarrier) {
  auto ex = derive_exponents(kConfigA);
  EXPECT_EQ(supersolution_residual(BarrierConstants{}, 3.0, kConfigA, ex), 0.0);
}

TEST(Build, ConfigA) {
  auto ex = derive_exponents(kConfigA);
  auto c = config_a_barrier();
  EXPECT_EQ(c.regime, DecayRegime::superlinear);
  EXPECT_FALSE(c.flagged);

  auto dom = build_domain(GridMode::full_line, 1, 20.0, 400);
  auto u0 = box_datum(dom, 1.0, -1.0, 1.0);
  for (int i = 0; i < dom->n; ++i) EXPECT_GE(eval_H(dom->nodes[i], 0.0, c, kConfigA, ex), u0[i]);

  for (double z : far_samples(c, kConfigA, 16, 32.0))
    EXPECT_GE(supersolution_residual(c, z, kConfigA, ex), -1e-6 * ex.beta * c.A) << "z = " << z;
  for (double z : near_samples(c, 8)) EXPECT_GE(supersolution_residual(c, z, kConfigA, ex), 0.0) << "z = " << z;
}

TEST(Build, ShrunkNearConstantFails) {
  // A plateau far below the datum level is no supersolution near the origin.
  auto ex = derive_exponents(kConfigA);
  auto c = config_a_barrier();
  auto weak = match_constants(c.regime, c.C1 / 1000.0, c.R1, c.R2, kConfigA);
  double worst = 1e300;
  for (double z : near_samples(weak, 8)) worst = std::min(worst, supersolution_residual(weak, z, kConfigA, ex));
  EXPECT_LT(worst, 0.0);
}

TEST(Build, ConfigBFallsBackToThreePieces) {
  auto ex = derive_exponents(kConfigB);
  auto dom = build_domain(GridMode::full_line, 1, 20.0, 400);
  auto c = build_barrier(kConfigB, ex, datum_stats(box_datum(dom, 1.0, -1.0, 1.0)));
  EXPECT_EQ(c.regime, DecayRegime::sublinear);
  EXPECT_TRUE(c.three_piece);
  for (double z : far_samples(c, kConfigB, 16, 32.0)) EXPECT_GE(supersolution_residual(c, z, kConfigB, ex), 0.0);
}

TEST(Build, Preconditions) {
  const ModelParams low{1, 0.5, 1.2, 1.0};
  EXPECT_THROW(build_barrier(low, derive_exponents(kConfigA), DatumStats{}), RegimeError);
  auto exa = derive_exponents(kConfigA);
  EXPECT_THROW(build_barrier(kConfigA, exa, DatumStats{1.0, 0.0, 0.0}), ConfigError);
}

TEST(Domination, ConfigABoxRun) {
  auto ex = derive_exponents(kConfigA);
  auto c = config_a_barrier();
  auto dom = build_domain(GridMode::full_line, 1, 20.0, 400);
  auto table = assemble_kernel(dom, 0.0, kConfigA);
  StepConfig cfg;
  cfg.schedule = {ScheduleKind::geometric, 1e-3, 10.0, 40, {}};
  auto traj = march(box_datum(dom, 1.0, -1.0, 1.0), cfg, table, kConfigA.m);
  auto rep = check_domination(traj, c, kConfigA, ex);
  EXPECT_TRUE(rep.passed) << "violation " << rep.max_violation << " at x = " << rep.worst_x;
  EXPECT_LE(rep.max_violation, 0.0);
}

TEST(Domination, ZeroDatumIsDominated) {
  auto ex = derive_exponents(kConfigA);
  auto dom = build_domain(GridMode::full_line, 1, 5.0, 64);
  auto table = assemble_kernel(dom, 0.0, kConfigA);
  StepConfig cfg;
  cfg.schedule = {ScheduleKind::uniform, 0.25, 1.0, 4, {}};
  auto traj = march(Field(dom), cfg, table, kConfigA.m);
  auto c = match_constants(DecayRegime::superlinear, 1e-6, 1.0, 2.0, kConfigA);
  EXPECT_TRUE(check_domination(traj, c, kConfigA, ex).passed);
}
