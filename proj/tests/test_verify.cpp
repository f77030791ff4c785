#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dnl/verify.hpp"

using namespace dnl;

namespace {
const ModelParams kConfigA{1, 0.5, 3.0, 1.0};

struct Run {
  DomainPtr dom;
  KernelTable table;
  StepConfig cfg;
};

Run small_run(const ModelParams& mp, int n = 128, double R = 10.0, int steps = 40, double t1 = 2.0) {
  Run r;
  r.dom = build_domain(GridMode::full_line, 1, R, n);
  r.table = assemble_kernel(r.dom, 0.0, mp);
  r.cfg.schedule = {ScheduleKind::geometric, 1e-3, t1, steps, {}};
  return r;
}

Trajectory manual(const std::vector<double>& times, const std::vector<Field>& snaps) {
  Trajectory t;
  t.times = times;
  t.snapshots = snaps;
  t.newton_tol = 1e-10;
  return t;
}
}  // namespace

TEST(Fit, ExactLine) {
  auto f = fit_line({0.0, 1.0, 2.0, 3.0}, {1.0, -1.5, -4.0, -6.5});
  EXPECT_NEAR(f.slope, -2.5, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_THROW(fit_line({1.0}, {1.0}), WindowError);
}

TEST(Contraction, AgainstZeroAndOrdered) {
  auto r = small_run(kConfigA);
  auto box1 = box_datum(r.dom, 1.0, -1.0, 1.0);
  auto box2 = box_datum(r.dom, 2.0, -1.0, 1.0);
  auto t1 = march(box1, r.cfg, r.table, 1.0);
  auto t2 = march(box2, r.cfg, r.table, 1.0);
  auto t0 = march(Field(r.dom), r.cfg, r.table, 1.0);
  EXPECT_TRUE(check_contraction(t1, t0).passed());
  for (int k = 0; k < t1.size(); ++k) EXPECT_EQ(mass(positive_part(t1.snapshots[k] - t2.snapshots[k])), 0.0);
  EXPECT_TRUE(check_contraction(t1, t2).passed());
}

TEST(Contraction, CrossingPair) {
  auto r = small_run(kConfigA);
  auto a = march(box_datum(r.dom, 1.0, -2.0, 0.5), r.cfg, r.table, 1.0);
  auto b = march(box_datum(r.dom, 1.5, -0.5, 1.5), r.cfg, r.table, 1.0);
  auto rep = check_contraction(a, b);
  EXPECT_TRUE(rep.passed()) << rep.measured;
  const double p0 = mass(positive_part(a.snapshots.front() - b.snapshots.front()));
  const double p1 = mass(positive_part(a.snapshots.back() - b.snapshots.back()));
  EXPECT_LT(p1, p0);
}

TEST(Contraction, GridMismatch) {
  auto r = small_run(kConfigA, 64, 10.0, 5);
  auto a = march(box_datum(r.dom, 1.0, -1.0, 1.0), r.cfg, r.table, 1.0);
  auto b = a;
  b.times.back() *= 2.0;
  EXPECT_THROW(check_contraction(a, b), GridMismatch);
}

TEST(Reflection, BoxOnNegativeSide) {
  auto r = small_run(kConfigA);
  auto traj = march(box_datum(r.dom, 1.0, -2.0, 0.0), r.cfg, r.table, 1.0);
  auto rep = check_reflection(traj, 0.0);
  EXPECT_TRUE(rep.passed()) << rep.measured;

  auto sym = march(box_datum(r.dom, 1.0, -1.0, 1.0), r.cfg, r.table, 1.0);
  // Symmetric data: both sides equal up to round-off.
  EXPECT_LE(check_reflection(sym, 0.0).measured, 1e-12);

  auto wrong = march(box_datum(r.dom, 1.0, 0.0, 2.0), r.cfg, r.table, 1.0);
  EXPECT_THROW(check_reflection(wrong, 0.0), PreconditionError);
}

TEST(Reflection, RadialMonotonicity) {
  auto dom = build_domain(GridMode::radial, 1, 10.0, 128);
  auto table = assemble_kernel(dom, 0.0, kConfigA);
  StepConfig cfg;
  cfg.schedule = {ScheduleKind::geometric, 1e-3, 2.0, 30, {}};
  auto traj = march(bump_datum(dom, 1.0, 2.0), cfg, table, 1.0);
  EXPECT_TRUE(check_radial_monotonicity(traj).passed());

  auto rising = make_field(dom, [](double r) { return r < 2.0 ? r : 0.0; });
  auto bad = march(rising, cfg, table, 1.0);
  EXPECT_THROW(check_radial_monotonicity(bad), PreconditionError);
}

TEST(Mass, ZeroFieldAndInformationalBranch) {
  auto r = small_run(kConfigA, 64, 10.0, 5);
  auto zero = march(Field(r.dom), r.cfg, r.table, 1.0);
  EXPECT_EQ(mass_drift(zero), 0.0);

  const ModelParams low{1, 0.5, 1.45, 1.0};
  auto rl = small_run(low, 64, 10.0, 10);
  auto traj = march(box_datum(rl.dom, 1.0, -1.0, 1.0), rl.cfg, rl.table, 1.0);
  auto rep = check_mass_conservation(traj, traj, low, derive_exponents(low));
  EXPECT_EQ(rep.status, CheckStatus::info);
  EXPECT_GT(rep.measured, 0.0);
}

TEST(TimeDecay, ExactSimilarityData) {
  // t^{-d beta} F(x t^{-beta}) with a plateau at the origin, so the sup norm
  // is exactly t^{-d beta}.
  auto ex = derive_exponents(kConfigA);
  auto dom = build_domain(GridMode::full_line, 1, 40.0, 800);
  auto F = [](double z) { const double e = std::max(0.0, std::abs(z) - 1.0); return 1.0 / (1.0 + e * e); };
  std::vector<double> times;
  std::vector<Field> snaps;
  for (int k = 0; k < 30; ++k) {
    const double t = std::pow(10.0, -1.0 + 2.0 * k / 29.0);
    times.push_back(t);
    snaps.push_back(make_field(dom, [&](double x) { return std::pow(t, -ex.d_beta) * F(x * std::pow(t, -ex.beta)); }));
  }
  auto rep = fit_time_decay(manual(times, snaps), ex, {0.0, 100.0});
  EXPECT_NEAR(rep.measured, -0.4, 1e-6);
  EXPECT_TRUE(rep.passed());
  EXPECT_LE(rep.extra["bound_excess"], 1e-12);
  EXPECT_THROW(fit_time_decay(manual(times, snaps), ex, {1.0, 2.0}), WindowError);
}

TEST(TailDecay, SyntheticPowerLaws) {
  auto dom = build_domain(GridMode::radial, 1, 40.0, 400);
  auto exA = derive_exponents(kConfigA);
  Profile pr{make_field(dom, [](double r) { return std::pow(r, -2.5); }), 1.0, 1.0, kConfigA, exA};
  auto rep = fit_tail_decay(pr);
  EXPECT_NEAR(rep.measured, -2.5, 1e-12);
  EXPECT_TRUE(rep.passed());
  EXPECT_THROW(fit_tail_decay(pr, {5.0, 30.0}), WindowError);
  EXPECT_THROW(fit_tail_decay(pr, {5.0, 5.1}), WindowError);

  const ModelParams crit{1, 0.5, exA.p_one, 1.0};
  auto exC = derive_exponents(crit);
  ASSERT_EQ(exC.regime, DecayRegime::critical);
  Profile pc{make_field(dom, [&](double r) { return std::pow(r, -1.0 - 0.5 * exA.p_one) * std::pow(std::log(r), 1.7); }),
             1.0, 1.0, crit, exC};
  auto rc = fit_tail_decay(pc);
  EXPECT_EQ(rc.status, CheckStatus::info);
  EXPECT_NEAR(rc.extra["kappa"], 1.7, 1e-10);

  const ModelParams sub{1, 0.5, 1.45, 1.0};
  auto exB = derive_exponents(sub);
  Profile pb{make_field(dom, [&](double r) { return std::pow(r, -exB.tail_exponent); }), 1.0, 1.0, sub, exB};
  EXPECT_NEAR(fit_tail_decay(pb).measured, -1.3182, 1e-4);
}

TEST(Dissipation, BruteForceOracle) {
  // Independent double sum with the closed-form kernel and exterior weight.
  const ModelParams mp{1, 0.5, 3.0, 1.0};
  const int n = 16;
  const double R = 2.0;
  auto dom = build_domain(GridMode::full_line, 1, R, n);
  auto table = assemble_kernel(dom, 0.0, mp);
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Field u1(dom), u2(dom);
  for (int i = 0; i < n; ++i) {
    u1.values[i] = U(gen);
    u2.values[i] = U(gen);
  }
  const double h = 2.0 * R / n;
  auto odd2 = [](double a) { return a * std::abs(a); };
  double brute = 0.0;
  for (int i = 0; i < n; ++i) {
    const double xi = -R + (i + 0.5) * h;
    const bool ai = u1.values[i] > u2.values[i];
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double xj = -R + (j + 0.5) * h;
      const bool aj = u1.values[j] > u2.values[j];
      if (ai == aj) continue;
      const double k = std::pow(std::abs(xi - xj), -2.5) * h * h;
      brute += k * std::abs(odd2(u1.values[i] - u1.values[j]) - odd2(u2.values[i] - u2.values[j]));
    }
    if (ai) {
      const double E = (std::pow(R - xi, -1.5) + std::pow(R + xi, -1.5)) / 1.5;
      brute += 2.0 * h * E * std::abs(odd2(u1.values[i]) - odd2(u2.values[i]));
    }
  }
  const double got = dissipation_functional(u1, u2, table, 1.0);
  EXPECT_GT(brute, 0.0);
  EXPECT_NEAR(got, brute, 1e-12 * brute);
}

TEST(Dissipation, EqualAndOrderedPairs) {
  auto r = small_run(kConfigA, 64, 10.0, 10);
  auto a = march(box_datum(r.dom, 1.0, -1.0, 1.0), r.cfg, r.table, 1.0);
  auto b = march(box_datum(r.dom, 2.0, -1.0, 1.0), r.cfg, r.table, 1.0);
  for (int k = 0; k < a.size(); ++k) {
    EXPECT_EQ(dissipation_functional(a.snapshots[k], a.snapshots[k], r.table, 1.0), 0.0);
    EXPECT_EQ(dissipation_functional(a.snapshots[k], b.snapshots[k], r.table, 1.0), 0.0);
  }
  EXPECT_TRUE(dissipation_report(a, b, r.table).passed());
}

TEST(Dissipation, CrossingPairInequality) {
  auto r = small_run(kConfigA);
  auto a = march(box_datum(r.dom, 1.0, -2.0, 0.5), r.cfg, r.table, 1.0);
  auto b = march(box_datum(r.dom, 1.5, -0.5, 1.5), r.cfg, r.table, 1.0);
  auto rep = dissipation_report(a, b, r.table);
  EXPECT_TRUE(rep.passed()) << rep.measured;
  EXPECT_GT(rep.extra["min_I"], 0.0);
  EXPECT_EQ(rep.extra["sign_errors"], 0.0);
  EXPECT_GT(rep.extra["dissipated"], 0.0);
}

TEST(Energy, ZeroTrajectory) {
  auto r = small_run(kConfigA, 64, 10.0, 5);
  auto zero = march(Field(r.dom), r.cfg, r.table, 1.0);
  auto rep = energy_estimate_check(zero, r.table, 1.0);
  EXPECT_EQ(rep.extra["pairing"], 0.0);
  EXPECT_EQ(rep.extra["norm_drop"], 0.0);
  EXPECT_TRUE(rep.passed());
}

TEST(Energy, ConfigAIdentityAndInequality) {
  auto r = small_run(kConfigA, 128, 10.0, 60);
  auto traj = march(box_datum(r.dom, 1.0, -1.0, 1.0), r.cfg, r.table, 1.0);
  for (double q : {0.0, 1.0, 2.0}) {
    auto rep = energy_estimate_check(traj, r.table, q);
    EXPECT_TRUE(rep.passed()) << "q = " << q << " gap " << rep.extra["identity_gap"] << " excess " << rep.measured;
    EXPECT_GT(rep.extra["pairing"], 0.0);
  }
  auto bad = traj;
  bad.diagnostics[3].residual = 1.0;
  EXPECT_THROW(energy_estimate_check(bad, r.table, 1.0), QualityError);
}

TEST(Uniqueness, RepeatedExtractionIsDeterministic) {
  ExtractionConfig cfg;
  cfg.k_schedule = {1.0, 2.0};
  cfg.source = build_domain(GridMode::radial, 1, 40.0, 256);
  cfg.profile_grid = build_domain(GridMode::radial, 1, 10.0, 100);
  cfg.solver.schedule = {ScheduleKind::geometric, 1e-3, 1.0, 30, {}};
  auto a = extract_barenblatt(kConfigA, cfg);
  auto b = extract_barenblatt(kConfigA, cfg);
  EXPECT_LT(relative_l1(a.profile.field, b.profile.field), 1e-10);
}

TEST(Uniqueness, BoxAndBumpAgree) {
  ExtractionConfig cfg;
  cfg.source = build_domain(GridMode::radial, 1, 160.0, 512);
  cfg.profile_grid = build_domain(GridMode::radial, 1, 20.0, 400);
  cfg.solver.schedule = {ScheduleKind::geometric, 1e-3, 1.0, 80, {}};
  auto rep = uniqueness_probe(kConfigA, 1.0, cfg);
  EXPECT_TRUE(rep.passed()) << "distance " << rep.measured << " mass " << rep.extra["mass_rescaling_distance"];
  EXPECT_LT(rep.measured, rep.extra["first_distance"]);
}
