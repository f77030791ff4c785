#pragma once

// Scaling symmetries, self-similar variables and Barenblatt extraction by
// nascent-delta rescaling.

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dnl/errors.hpp"
#include "dnl/exponents.hpp"
#include "dnl/grid.hpp"
#include "dnl/kernel.hpp"
#include "dnl/nonlocal_op.hpp"
#include "dnl/resolvent.hpp"

namespace dnl {

// ---------------------------------------------------------------------------
// Initial data

/// Cell average of height * 1_{a < x < b}; radial cells are averaged in the
/// r^{d-1} measure.
inline Field box_datum(const DomainPtr& dom, double height, double a, double b) {
  Field f(dom);
  const double h = dom->h;
  for (int i = 0; i < dom->n; ++i) {
    const double lo = dom->nodes[i] - 0.5 * h, hi = dom->nodes[i] + 0.5 * h;
    const double l = std::max(lo, a), r = std::min(hi, b);
    if (r <= l) continue;
    if (dom->mode == GridMode::full_line) {
      f.values[i] = height * (r - l) / h;
    } else {
      const int d = dom->d;
      f.values[i] = height * (std::pow(r, d) - std::pow(l, d)) / (std::pow(hi, d) - std::pow(lo, d));
    }
  }
  return f;
}

/// cos^2(pi |x| / 2) on the unit ball.
inline double bump_shape(double x) {
  const double r = std::abs(x);
  if (r >= 1.0) return 0.0;
  const double c = std::cos(0.5 * std::numbers::pi * r);
  return c * c;
}

/// Rescale a nonnegative field to the given discrete mass.
inline Field with_mass(const Field& f, double M) {
  const double m0 = mass(f);
  if (!(m0 > 0.0)) throw ResolutionError("datum has no resolved mass on this grid");
  return (M / m0) * f;
}

inline Field bump_datum(const DomainPtr& dom, double M, double radius = 1.0) {
  return with_mass(make_field(dom, [&](double x) { return bump_shape(x / radius); }), M);
}

// ---------------------------------------------------------------------------
// Scaling transforms

struct ScaledDatum {
  Field field;
  double time_factor = 1.0;
};

/// k^d u0(k x) on the same grid, and the factor k^{d(m(p-1)-1)+sp} that maps
/// the time of the transformed problem to the original one.
inline ScaledDatum transform_Tk(const Field& u0, double k, const ModelParams& mp) {
  if (!(k > 0.0)) throw ConfigError("k must be positive");
  const int d = u0.domain->d;
  ScaledDatum out{resample(u0, u0.domain, k, std::pow(k, d)),
                  std::pow(k, d * (mp.homogeneity() - 1.0) + mp.sp())};
  if (k == 1.0) out.field = u0;
  const bool had_support = std::any_of(u0.values.begin(), u0.values.end(), [](double x) { return x != 0.0; });
  const auto cells = std::count_if(out.field.values.begin(), out.field.values.end(),
                                   [](double x) { return x != 0.0; });
  if (had_support && cells < 8)
    throw ResolutionError("compressed support spans " + std::to_string(cells) + " cells (need >= 8)");
  return out;
}

/// M u0 and the time factor M^{m(p-1)-1}.
inline ScaledDatum transform_mass(const Field& u0, double M, const ModelParams& mp) {
  if (!(M > 0.0)) throw ConfigError("M must be positive");
  return {M * u0, std::pow(M, mp.homogeneity() - 1.0)};
}

// ---------------------------------------------------------------------------
// Profiles

struct Profile {
  Field field;
  double mass = 0.0;
  double source_time = 0.0;
  ModelParams params;
  ExponentSet exps;
};

/// V(y) = t^{d beta} u(y t^beta), sampled on the profile grid.
inline Profile to_profile(const Field& u, double t, const ModelParams& mp, const ExponentSet& ex,
                          const DomainPtr& profile_domain = nullptr) {
  if (!(t > 0.0)) throw ConfigError("profile time must be positive");
  const DomainPtr target = profile_domain ? profile_domain : u.domain;
  Profile pr;
  pr.field = resample(u, target, std::pow(t, ex.beta), std::pow(t, ex.d_beta));
  if (t == 1.0 && target == u.domain) pr.field = u;
  pr.mass = mass(pr.field);
  pr.source_time = t;
  pr.params = mp;
  pr.exps = ex;
  return pr;
}

/// Relative L1 distance |a - b|_1 / |b|_1.
inline double relative_l1(const Field& a, const Field& b) {
  const double den = lq_norm(b, 1.0);
  const double num = lq_norm(a - b, 1.0);
  return den > 0.0 ? num / den : num;
}

/// Nodal residual of the radial profile equation
///   PV(F^m) - beta r^{1-d} (r^d F)_r,
/// with (r^d F)_r = d r^{d-1} F + r^d F_r and F_r by centred differences
/// (even reflection at the origin, zero beyond R).
inline Field profile_residual(const Field& F, const KernelTable& t, double m, double beta) {
  if (F.domain->mode != GridMode::radial) throw DomainError("profile_residual needs a radial grid");
  const Domain& dom = *F.domain;
  const auto pv = apply_doubly_nonlinear(F, t, m);
  Field res(F.domain);
  const int n = dom.n;
  for (int i = 0; i < n; ++i) {
    const double left = i > 0 ? F.values[i - 1] : F.values[0];
    const double right = i + 1 < n ? F.values[i + 1] : 0.0;
    const double dF = (right - left) / (2.0 * dom.h);
    const double r = dom.nodes[i];
    res.values[i] = pv.values.values[i] - beta * (dom.d * F.values[i] + r * dF);
  }
  return res;
}

/// Weighted L1 norm of a field restricted to r <= r_max.
inline double weighted_l1_within(const Field& f, double r_max) {
  double acc = 0.0;
  for (int i = 0; i < f.size(); ++i)
    if (std::abs(f.domain->nodes[i]) <= r_max) acc += f.domain->weights[i] * std::abs(f.values[i]);
  return acc;
}

/// Largest increase F(r_{i+1}) - F(r_i) over the radial grid (<= 0 for a
/// non-increasing profile).
inline double max_radial_increase(const Field& f) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i + 1 < f.size(); ++i) worst = std::max(worst, f.values[i + 1] - f.values[i]);
  return worst;
}

/// F(z; M) = M^{sp beta} F1(M^{-(m(p-1)-1) beta} z) from a unit-mass profile.
inline Profile rescale_profile_mass(const Profile& F1, double M) {
  if (!(M > 0.0)) throw ConfigError("M must be positive");
  if (std::abs(F1.mass - 1.0) > 0.02)
    throw MassError("profile mass " + std::to_string(F1.mass) + " deviates from 1 by more than 2%");
  const auto& mp = F1.params;
  const double beta = F1.exps.beta;
  Profile out = F1;
  out.field = resample(F1.field, F1.field.domain, std::pow(M, -(mp.homogeneity() - 1.0) * beta),
                       std::pow(M, mp.sp() * beta));
  if (M == 1.0) out.field = F1.field;
  out.mass = mass(out.field);
  return out;
}

// ---------------------------------------------------------------------------
// Barenblatt extraction

enum class ExtractionMode { tau_shift, nascent_delta };

inline ExtractionMode extraction_mode_from_string(const std::string& s) {
  if (s == "tau_shift") return ExtractionMode::tau_shift;
  if (s == "nascent_delta") return ExtractionMode::nascent_delta;
  throw ConfigError("unknown extraction mode '" + s + "'");
}

enum class DatumShape { bump, box };

struct ExtractionConfig {
  double M = 1.0;
  std::vector<double> k_schedule{1, 2, 4, 8};
  double t_star = 1.0;
  ExtractionMode mode = ExtractionMode::tau_shift;
  DatumShape shape = DatumShape::bump;
  DomainPtr source;        // grid of the evolution
  DomainPtr profile_grid;  // grid of the similarity variable
  StepConfig solver;       // schedule.t0 and schedule.steps are used; t1 is derived
  bool exterior = true;    // exterior closure of the kernel
};

struct ExtractionResult {
  Profile profile;                 // last profile of the schedule
  std::vector<Profile> profiles;   // one per k
  std::vector<double> distances;   // relative L1 between successive profiles
  std::vector<double> source_times;
  std::optional<Trajectory> base;  // tau-shift mode only
};

inline Field extraction_datum(const ExtractionConfig& cfg, const DomainPtr& dom) {
  if (cfg.shape == DatumShape::bump) return bump_datum(dom, cfg.M);
  return with_mass(box_datum(dom, 1.0, -1.0, 1.0), cfg.M);
}

/// Profiles of the nascent-delta solutions k^d u0(kx) at t*.
///
/// In tau_shift mode a single run of u0 is sampled at T_k = k^{1/beta} t*,
/// which by the scaling symmetry gives the same profiles as separate runs.
inline ExtractionResult extract_barenblatt(const ModelParams& mp, const ExtractionConfig& cfg) {
  const auto ex = derive_exponents(mp);
  if (mp.m < 1.0) throw RegimeError("Barenblatt extraction requires m >= 1");
  if (cfg.k_schedule.empty()) throw ConfigError("empty k schedule");
  if (!cfg.source || !cfg.profile_grid) throw ConfigError("extraction needs source and profile grids");
  for (std::size_t j = 1; j < cfg.k_schedule.size(); ++j)
    if (!(cfg.k_schedule[j] > cfg.k_schedule[j - 1])) throw ConfigError("k schedule must increase");

  const auto table = assemble_kernel(cfg.source, 0.0, mp, cfg.exterior);
  ExtractionResult out;

  if (cfg.mode == ExtractionMode::tau_shift) {
    std::vector<double> targets;
    for (double k : cfg.k_schedule) targets.push_back(std::pow(k, 1.0 / ex.beta) * cfg.t_star);
    // Geometric grid up to the last target, with the targets replacing their
    // nearest neighbours.
    TimeSchedule geo = cfg.solver.schedule;
    geo.kind = ScheduleKind::geometric;
    geo.t1 = targets.back();
    if (!(geo.t0 < geo.t1)) geo.t0 = geo.t1 * 1e-3;
    std::vector<double> merged = geo.times();
    for (double tt : targets) {
      auto it = std::lower_bound(merged.begin(), merged.end(), tt);
      if (it != merged.end() && *it == tt) continue;
      merged.insert(it, tt);
    }
    std::vector<double> cleaned;
    for (double t : merged) {
      const bool is_target = std::find(targets.begin(), targets.end(), t) != targets.end();
      if (!cleaned.empty() && t < cleaned.back() * (1.0 + 1e-9)) {
        if (is_target) cleaned.back() = t;
        continue;
      }
      cleaned.push_back(t);
    }
    merged = std::move(cleaned);
    StepConfig sc = cfg.solver;
    sc.schedule.kind = ScheduleKind::explicit_times;
    sc.schedule.explicit_times = merged;
    const Field u0 = extraction_datum(cfg, cfg.source);
    Trajectory tr = march(u0, sc, table, mp.m);
    for (double tt : targets) {
      int idx = -1;
      for (int i = 0; i < tr.size(); ++i)
        if (tr.times[i] == tt) idx = i;
      out.profiles.push_back(to_profile(tr.snapshots[idx], tt, mp, ex, cfg.profile_grid));
      out.source_times.push_back(tt);
    }
    out.base = std::move(tr);
  } else {
    const Field u0 = extraction_datum(cfg, cfg.source);
    const int nk = static_cast<int>(cfg.k_schedule.size());
    std::vector<std::optional<Profile>> slots(nk);
    std::vector<std::exception_ptr> errors(nk);
#pragma omp parallel for schedule(dynamic, 1)
    for (int j = 0; j < nk; ++j) {
      try {
        const auto scaled = transform_Tk(u0, cfg.k_schedule[j], mp);
        StepConfig sc = cfg.solver;
        sc.schedule.kind = ScheduleKind::geometric;
        sc.schedule.t1 = cfg.t_star;
        if (!(sc.schedule.t0 < sc.schedule.t1)) sc.schedule.t0 = cfg.t_star * 1e-3;
        const Trajectory tr = march(with_mass(scaled.field, cfg.M), sc, table, mp.m);
        slots[j] = to_profile(tr.snapshots.back(), cfg.t_star, mp, ex, cfg.profile_grid);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
    for (int j = 0; j < nk; ++j) {
      if (errors[j]) std::rethrow_exception(errors[j]);
      out.profiles.push_back(*slots[j]);
      out.source_times.push_back(cfg.t_star);
    }
  }

  for (std::size_t j = 1; j < out.profiles.size(); ++j)
    out.distances.push_back(relative_l1(out.profiles[j].field, out.profiles[j - 1].field));
  out.profile = out.profiles.back();
  for (std::size_t j = 1; j < out.distances.size(); ++j) {
    if (out.distances[j] < out.distances[j - 1]) continue;
    std::string seq;
    for (double d : out.distances) seq += (seq.empty() ? "" : ", ") + std::to_string(d);
    throw NonConvergence("successive profile distances do not decrease: " + seq, out.distances[j]);
  }
  return out;
}

}  // namespace dnl
