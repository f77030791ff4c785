#pragma once

// Property checks on trajectories and profiles. Each check returns a
// PropertyReport carrying the measured value and the tolerance it was held to.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "dnl/errors.hpp"
#include "dnl/exponents.hpp"
#include "dnl/grid.hpp"
#include "dnl/kernel.hpp"
#include "dnl/nonlocal_op.hpp"
#include "dnl/resolvent.hpp"
#include "dnl/selfsim.hpp"

namespace dnl {

enum class CheckStatus { pass, fail, info };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "PASS";
    case CheckStatus::fail: return "FAIL";
    case CheckStatus::info: return "INFO";
  }
  return "?";
}

struct PropertyReport {
  std::string name;
  CheckStatus status = CheckStatus::info;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string anchor;                   // the property being checked, in words
  std::map<std::string, double> extra;  // secondary measurements

  bool passed() const { return status != CheckStatus::fail; }
};

inline PropertyReport make_report(std::string name, bool ok, double measured, double tol, std::string anchor) {
  return {std::move(name), ok ? CheckStatus::pass : CheckStatus::fail, measured, tol, std::move(anchor), {}};
}

// ---------------------------------------------------------------------------
// Helpers

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  int count = 0;
};

/// Ordinary least squares y = slope x + intercept.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  if (n < 2) throw WindowError("line fit needs at least two points");
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw WindowError("line fit needs distinct abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.count = n;
  return f;
}

inline void require_shared_grid(const Trajectory& a, const Trajectory& b) {
  if (a.size() == 0 || b.size() == 0) throw GridMismatch("empty trajectory");
  if (a.times != b.times) throw GridMismatch("trajectories use different time grids");
  if (!same_domain(*a.domain(), *b.domain())) throw GridMismatch("trajectories use different domains");
}

/// Slack 10 newton_tol per step, accumulated linearly.
inline double step_slack(const Trajectory& traj, int step) { return 10.0 * traj.newton_tol * step; }

inline Field positive_part(const Field& f) {
  Field out = f;
  for (double& x : out.values) x = std::max(x, 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Contraction and order

/// ||[u1 - u2]^+(t)||_1 and ||u1 - u2||_1 never exceed their initial values.
inline PropertyReport check_contraction(const Trajectory& a, const Trajectory& b) {
  require_shared_grid(a, b);
  const Field d0 = a.snapshots[0] - b.snapshots[0];
  const double pos0 = mass(positive_part(d0)), abs0 = lq_norm(d0, 1.0);
  double worst_pos = -std::numeric_limits<double>::infinity(), worst_abs = worst_pos;
  double worst = worst_pos;
  for (int k = 0; k < a.size(); ++k) {
    const Field dk = a.snapshots[k] - b.snapshots[k];
    const double slack = step_slack(a, k);
    const double ep = mass(positive_part(dk)) - pos0 - slack;
    const double ea = lq_norm(dk, 1.0) - abs0 - slack;
    worst_pos = std::max(worst_pos, ep);
    worst_abs = std::max(worst_abs, ea);
    worst = std::max({worst, ep, ea});
  }
  auto rep = make_report("l1_contraction", worst <= 0.0, worst, step_slack(a, a.size() - 1),
                         "L1 contraction and T-accretivity of differences");
  rep.extra["positive_part_excess"] = worst_pos;
  rep.extra["l1_excess"] = worst_abs;
  return rep;
}

/// u(x, t) <= u(2b - x, t) for x > b, d = 1 full line.
inline PropertyReport check_reflection(const Trajectory& traj, double b) {
  if (traj.size() == 0) throw GridMismatch("empty trajectory");
  const Domain& dom = *traj.domain();
  if (dom.mode != GridMode::full_line) throw DomainError("reflection check needs a full-line grid");
  auto excess = [&](const Field& u, double tol) {
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < u.size(); ++i) {
      const double x = dom.nodes[i];
      if (x <= b) continue;
      worst = std::max(worst, u.values[i] - interpolate(u, 2.0 * b - x) - tol);
    }
    return worst;
  };
  const Field& u0 = traj.snapshots[0];
  const double tol0 = 1e-6 * lq_norm(u0, std::numeric_limits<double>::infinity());
  if (excess(u0, tol0) > 0.0) throw PreconditionError("initial datum is not ordered under the reflection");
  double worst = -std::numeric_limits<double>::infinity();
  double tol_used = 0.0;
  for (const Field& u : traj.snapshots) {
    const double tol = 1e-6 * lq_norm(u, std::numeric_limits<double>::infinity());
    const double e = excess(u, tol);
    if (e > worst) {
      worst = e;
      tol_used = tol;
    }
  }
  auto rep = make_report("reflection", worst <= 0.0, worst + tol_used, tol_used, "ordering under reflection");
  rep.extra["reflection_point"] = b;
  return rep;
}

/// Largest increase along |x| relative to the snapshot's sup norm.
inline double radial_increase(const Field& u) {
  const Domain& dom = *u.domain;
  if (dom.mode == GridMode::radial) return max_radial_increase(u);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i + 1 < u.size(); ++i) {
    if (dom.nodes[i] >= 0.0) worst = std::max(worst, u.values[i + 1] - u.values[i]);
    else if (dom.nodes[i + 1] <= 0.0) worst = std::max(worst, u.values[i] - u.values[i + 1]);
  }
  return worst;
}

/// Radially decreasing data stay radially decreasing, nodewise, within 1e-6 sup.
inline PropertyReport check_radial_monotonicity(const Trajectory& traj) {
  if (traj.size() == 0) throw GridMismatch("empty trajectory");
  auto scaled = [](const Field& u) {
    const double linf = lq_norm(u, std::numeric_limits<double>::infinity());
    return linf > 0.0 ? radial_increase(u) / linf : 0.0;
  };
  if (scaled(traj.snapshots[0]) > 1e-6) throw PreconditionError("initial datum is not radially decreasing");
  double worst = -std::numeric_limits<double>::infinity();
  for (const Field& u : traj.snapshots) worst = std::max(worst, scaled(u));
  return make_report("radial_monotonicity", worst <= 1e-6, worst, 1e-6, "radial symmetry and monotonicity");
}

// ---------------------------------------------------------------------------
// Mass

/// max_k |M(t_k) - M(0)| / M(0); zero for the zero field.
inline double mass_drift(const Trajectory& traj) {
  const double m0 = mass(traj.snapshots.at(0));
  double worst = 0.0;
  for (const Field& u : traj.snapshots) {
    const double m = mass(u);
    if (m0 == 0.0) worst = std::max(worst, std::abs(m));
    else worst = std::max(worst, std::abs(m - m0) / std::abs(m0));
  }
  return worst;
}

/// Drift below 1% at the reference resolution and at most 0.6 times that
/// after refinement. Below p_one mass conservation is not expected and the
/// report is informational (measured: final mass loss).
inline PropertyReport check_mass_conservation(const Trajectory& reference, const Trajectory& refined,
                                              const ModelParams& mp, const ExponentSet& ex) {
  for (double x : reference.snapshots.at(0).values)
    if (x < 0.0) throw PreconditionError("mass conservation check needs nonnegative data");
  if (mp.p < ex.p_one - kRegimeTolerance) {
    const double m0 = mass(reference.snapshots.front());
    PropertyReport rep{"mass_conservation", CheckStatus::info,
                       m0 > 0.0 ? 1.0 - mass(reference.snapshots.back()) / m0 : 0.0, 0.0,
                       "mass loss below p_one (outside the conservation regime)", {}};
    return rep;
  }
  const double d1 = mass_drift(reference), d2 = mass_drift(refined);
  const double ratio = d1 > 0.0 ? d2 / d1 : 0.0;
  auto rep = make_report("mass_conservation", d1 < 0.01 && ratio <= 0.6, d1, 0.01, "conservation of mass for p >= p_one");
  rep.extra["refined_drift"] = d2;
  rep.extra["refinement_ratio"] = ratio;
  rep.extra["ratio_tolerance"] = 0.6;
  return rep;
}

// ---------------------------------------------------------------------------
// Decay in time and space

/// Snapshots with t in [t_lo, t_hi].
struct TimeWindow {
  double t_lo = 0.0;
  double t_hi = std::numeric_limits<double>::infinity();
};

/// Last decade of the run.
inline TimeWindow late_window(const Trajectory& traj) { return {traj.times.back() / 10.0, traj.times.back()}; }

/// Slope of log ||u||_inf against log t over the window, compared with
/// -d beta; and the smoothing bound ||u||_inf <= C t^{-alpha} M^{gamma},
/// with C the smallest constant valid on the window, checked at every
/// snapshot.
inline PropertyReport fit_time_decay(const Trajectory& traj, const ExponentSet& ex, TimeWindow w) {
  std::vector<double> lx, ly;
  const double M = lq_norm(traj.snapshots.at(0), 1.0);
  const double Mg = std::pow(M, ex.gamma_smooth);
  auto linf = [&](int k) { return lq_norm(traj.snapshots[k], std::numeric_limits<double>::infinity()); };
  double C = 0.0;
  for (int k = 0; k < traj.size(); ++k) {
    const double t = traj.times[k];
    if (t <= 0.0 || t < w.t_lo || t > w.t_hi) continue;
    const double v = linf(k);
    if (!(v > 0.0)) continue;
    lx.push_back(std::log(t));
    ly.push_back(std::log(v));
    C = std::max(C, v * std::pow(t, ex.alpha_smooth) / Mg);
  }
  if (lx.size() < 10) throw WindowError("time-decay window holds " + std::to_string(lx.size()) + " snapshots, need 10");
  const auto fit = fit_line(lx, ly);
  const double target = -ex.d_beta;
  const double rel = std::abs(fit.slope - target) / std::abs(target);

  double bound_excess = -std::numeric_limits<double>::infinity();
  double ratio_lo = std::numeric_limits<double>::infinity(), ratio_hi = 0.0;
  for (int k = 0; k < traj.size(); ++k) {
    const double t = traj.times[k];
    if (t <= 0.0) continue;
    const double v = linf(k), bound = C * std::pow(t, -ex.alpha_smooth) * Mg;
    bound_excess = std::max(bound_excess, (v - bound) / bound);
    const double ratio = v * std::pow(t, ex.alpha_smooth) / Mg;
    if (t >= w.t_lo && t <= w.t_hi) {
      ratio_lo = std::min(ratio_lo, ratio);
      ratio_hi = std::max(ratio_hi, ratio);
    }
  }
  auto rep = make_report("time_decay", rel <= 0.1 && bound_excess <= 1e-12, fit.slope, 0.1 * std::abs(target),
                         "uniform decay at the sharp rate d beta; L1-Linf smoothing bound");
  rep.extra["target_slope"] = target;
  rep.extra["relative_error"] = rel;
  rep.extra["fitted_C"] = C;
  rep.extra["bound_excess"] = bound_excess;
  rep.extra["window_ratio_spread"] = ratio_lo > 0.0 ? ratio_hi / ratio_lo : 0.0;
  rep.extra["window_points"] = fit.count;
  return rep;
}

inline PropertyReport fit_time_decay(const Trajectory& traj, const ExponentSet& ex) {
  return fit_time_decay(traj, ex, late_window(traj));
}

struct RadialWindow {
  double r_a = 0.0;
  double r_b = 0.0;
};

/// Default tail window [R/8, R/2] of a profile grid: the outer quarter and
/// beyond is left out.
inline RadialWindow tail_window(const Domain& dom) { return {dom.R / 8.0, dom.R / 2.0}; }

/// Power-law fit of the profile tail. Superlinear and sublinear regimes are
/// held to 10% of the predicted exponent; in the critical regime the log
/// power kappa of F ~ c r^{-(d+sp)} log(r)^kappa is reported.
inline PropertyReport fit_tail_decay(const Profile& pr, RadialWindow w) {
  const Domain& dom = *pr.field.domain;
  const auto& mp = pr.params;
  const auto& ex = pr.exps;
  if (!(w.r_a > 0.0 && w.r_b > w.r_a)) throw WindowError("tail window needs 0 < r_a < r_b");
  if (w.r_b > 0.5 * dom.R * (1.0 + 1e-12)) throw WindowError("tail window must end before R/2");
  const bool critical = ex.regime == DecayRegime::critical;
  std::vector<double> lx, ly;
  for (int i = 0; i < dom.n; ++i) {
    const double r = std::abs(dom.nodes[i]);
    if (dom.mode == GridMode::full_line && dom.nodes[i] < 0.0) continue;
    if (r < w.r_a || r > w.r_b || !(pr.field[i] > 0.0)) continue;
    if (critical && r <= 1.0) continue;
    if (critical) {
      lx.push_back(std::log(std::log(r)));
      ly.push_back(std::log(pr.field[i]) + ex.tail_exponent * std::log(r));
    } else {
      lx.push_back(std::log(r));
      ly.push_back(std::log(pr.field[i]));
    }
  }
  if (lx.size() < 10) throw WindowError("tail window holds " + std::to_string(lx.size()) + " positive nodes, need 10");
  const auto fit = fit_line(lx, ly);
  PropertyReport rep;
  rep.name = std::string("tail_decay_") + to_string(ex.regime);
  rep.extra["r_a"] = w.r_a;
  rep.extra["r_b"] = w.r_b;
  rep.extra["window_points"] = fit.count;
  if (critical) {
    rep.status = CheckStatus::info;
    rep.measured = fit.slope;
    rep.anchor = "critical tail r^{-(d+sp)} log(r)^kappa, kappa reported";
    rep.extra["kappa"] = fit.slope;
    rep.extra["log_power_of_barrier"] = 1.0 / (1.0 - mp.homogeneity());
    return rep;
  }
  const double target = -ex.tail_exponent;
  const double rel = std::abs(fit.slope - target) / std::abs(target);
  rep.status = rel <= 0.1 ? CheckStatus::pass : CheckStatus::fail;
  rep.measured = fit.slope;
  rep.tolerance = 0.1 * std::abs(target);
  rep.anchor = "decay of the self-similar profile at infinity";
  rep.extra["target_slope"] = target;
  rep.extra["relative_error"] = rel;
  return rep;
}

inline PropertyReport fit_tail_decay(const Profile& pr) { return fit_tail_decay(pr, tail_window(*pr.field.domain)); }

// ---------------------------------------------------------------------------
// Dissipation of differences

/// Discrete I: sum over pairs (i, j) with exactly one of u1 > u2 at i, j of
/// w_i K_ij |(v1_i - v1_j)^{p-1} - (v2_i - v2_j)^{p-1}|, plus both orderings
/// of pairs with one point outside the truncation radius, where u1 = u2 = 0.
inline double dissipation_functional(const Field& u1, const Field& u2, const KernelTable& t, double m) {
  detail::require_table(u1, t);
  require_same_domain(u1, u2);
  const int n = t.n();
  const double q = t.p - 1.0;
  const auto& w = u1.domain->weights;
  const Field v1 = odd_power(u1, m), v2 = odd_power(u2, m);
  std::vector<char> above(n);
  for (int i = 0; i < n; ++i) above[i] = u1.values[i] > u2.values[i];
  std::vector<double> rows(n, 0.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const double* row = t.K.data() + static_cast<std::ptrdiff_t>(i) * n;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      if (above[i] == above[j]) continue;
      acc += row[j] * std::abs(odd_power(v1.values[i] - v1.values[j], q) - odd_power(v2.values[i] - v2.values[j], q));
    }
    if (above[i]) acc += 2.0 * t.exterior[i] * std::abs(odd_power(v1.values[i], q) - odd_power(v2.values[i], q));
    rows[i] = w[i] * acc;
  }
  double total = 0.0;
  for (double r : rows) total += r;
  return total;
}

/// I >= 0 at every snapshot, I > 0 exactly when both sign sets are nonempty,
/// and the implicit-step form of the dissipation inequality
/// P(t_{k+1}) <= P(t_k) - (dt / 2) I(t_{k+1}), P = ||[u1 - u2]^+||_1.
inline PropertyReport dissipation_report(const Trajectory& a, const Trajectory& b, const KernelTable& t) {
  require_shared_grid(a, b);
  if (a.m != b.m) throw GridMismatch("trajectories use different m");
  const int n = t.n();
  double min_I = std::numeric_limits<double>::infinity();
  int sign_errors = 0;
  double worst = -std::numeric_limits<double>::infinity();
  double integral = 0.0;
  std::vector<double> I(a.size());
  for (int k = 0; k < a.size(); ++k) {
    I[k] = dissipation_functional(a.snapshots[k], b.snapshots[k], t, a.m);
    min_I = std::min(min_I, I[k]);
    int up = 0;
    for (int i = 0; i < n; ++i) up += a.snapshots[k][i] > b.snapshots[k][i];
    // The exterior always lies in {u1 <= u2}.
    const bool both = up > 0 && (up < n || t.exterior_enabled);
    if (both != (I[k] > 0.0)) ++sign_errors;
  }
  const double P0 = mass(positive_part(a.snapshots[0] - b.snapshots[0]));
  for (int k = 1; k < a.size(); ++k) {
    const double dt = a.times[k] - a.times[k - 1];
    integral += 0.5 * dt * I[k];
    const double Pk = mass(positive_part(a.snapshots[k] - b.snapshots[k]));
    worst = std::max(worst, Pk - (P0 - integral) - step_slack(a, k));
  }
  if (a.size() < 2) worst = 0.0;
  auto rep = make_report("dissipation", min_I >= 0.0 && sign_errors == 0 && worst <= 0.0, worst,
                         step_slack(a, a.size() - 1), "L1 dissipation of positive parts of differences");
  rep.extra["min_I"] = min_I;
  rep.extra["sign_errors"] = sign_errors;
  rep.extra["dissipated"] = integral;
  return rep;
}

// ---------------------------------------------------------------------------
// Energy estimate

/// With xi_k = u_k^q the implicit step gives the discrete identity
///   sum_k dt_k <v_k, xi_k> + sum_k sum_i w_i (u_k - u_{k-1})_i xi_k,i = 0
/// up to the solver residual, and by convexity of u^{q+1}/(q+1)
///   sum_k dt_k <v_k, xi_k> <= (||u(t_1)||^{q+1} - ||u(t_2)||^{q+1}) / (q+1).
/// Both are checked with slack 10 newton_tol per step, scaled by ||xi||_2.
inline PropertyReport energy_estimate_check(const Trajectory& traj, const KernelTable& t, double q) {
  if (!(q >= 0.0)) throw ConfigError("energy estimate needs q >= 0");
  for (const auto& dg : traj.diagnostics)
    if (dg.residual > traj.newton_tol * (1.0 + 1e-9))
      throw QualityError("step " + std::to_string(dg.step) + " residual " + std::to_string(dg.residual) +
                         " exceeds the solver tolerance");
  const auto& w = traj.domain()->weights;
  auto xi_of = [&](const Field& u) {
    Field xi(u.domain);
    for (int i = 0; i < u.size(); ++i) xi.values[i] = q == 0.0 ? (u.values[i] != 0.0 ? 1.0 : 0.0) : odd_power(u.values[i], q);
    return xi;
  };
  auto norm_q1 = [&](const Field& u) {
    double acc = 0.0;
    for (int i = 0; i < u.size(); ++i) acc += w[i] * std::pow(std::abs(u.values[i]), q + 1.0);
    return acc;
  };
  double pairing = 0.0, increments = 0.0, slack = 0.0;
  for (int k = 1; k < traj.size(); ++k) {
    const Field& u = traj.snapshots[k];
    const Field& prev = traj.snapshots[k - 1];
    const Field xi = xi_of(u);
    const double dt = traj.times[k] - traj.times[k - 1];
    pairing += dt * weak_pairing(odd_power(u, traj.m), xi, t);
    for (int i = 0; i < u.size(); ++i) increments += w[i] * (u.values[i] - prev.values[i]) * xi.values[i];
    slack += 10.0 * traj.newton_tol * std::max(1.0, lq_norm(xi, 2.0));
  }
  const double drop = (norm_q1(traj.snapshots.front()) - norm_q1(traj.snapshots.back())) / (q + 1.0);
  const double identity_gap = std::abs(pairing + increments);
  const double excess = pairing - drop;
  char name[48];
  std::snprintf(name, sizeof name, "energy_estimate_q%g", q);
  auto rep = make_report(name, identity_gap <= slack && excess <= slack, excess,
                         slack, "integrated energy estimate for powers of u");
  rep.extra["pairing"] = pairing;
  rep.extra["norm_drop"] = drop;
  rep.extra["identity_gap"] = identity_gap;
  return rep;
}

// ---------------------------------------------------------------------------
// Uniqueness probe

/// Profiles extracted from box and bump data of equal mass; distance must
/// shrink along the schedule and end below 5%. The mass-scaling relation is
/// checked by extracting at mass 2 and comparing with the rescaled unit
/// profile.
inline PropertyReport uniqueness_probe(const ModelParams& mp, double M, ExtractionConfig cfg) {
  cfg.M = M;
  cfg.shape = DatumShape::box;
  const auto box = extract_barenblatt(mp, cfg);
  cfg.shape = DatumShape::bump;
  const auto bump = extract_barenblatt(mp, cfg);
  std::vector<double> dist;
  for (std::size_t j = 0; j < box.profiles.size(); ++j)
    dist.push_back(relative_l1(box.profiles[j].field, bump.profiles[j].field));
  const bool shrinks = dist.size() < 2 || dist.back() < dist.front();

  // Unit-mass profile rescaled to mass 2 against a direct extraction at 2.
  Profile unit = bump.profile;
  if (M != 1.0) {
    cfg.M = 1.0;
    unit = extract_barenblatt(mp, cfg).profile;
  }
  cfg.M = 2.0;
  const auto doubled = extract_barenblatt(mp, cfg);
  const double mass_dist = relative_l1(rescale_profile_mass(unit, 2.0).field, doubled.profile.field);

  auto rep = make_report("uniqueness_probe", shrinks && dist.back() < 0.05 && mass_dist < 0.05, dist.back(), 0.05,
                         "uniqueness of the self-similar limit");
  rep.extra["first_distance"] = dist.front();
  rep.extra["mass_rescaling_distance"] = mass_dist;
  return rep;
}

}  // namespace dnl
