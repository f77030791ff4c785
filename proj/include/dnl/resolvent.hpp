#pragma once

// Resolvent u + lambda (-Delta_p)^s u^m = f by convex minimisation in
// v = u^m, and the implicit Euler march built from it.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dnl/errors.hpp"
#include "dnl/grid.hpp"
#include "dnl/kernel.hpp"
#include "dnl/nonlocal_op.hpp"

namespace dnl {

enum class ScheduleKind { uniform, geometric, explicit_times };

inline const char* to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::uniform: return "uniform";
    case ScheduleKind::geometric: return "geometric";
    case ScheduleKind::explicit_times: return "explicit";
  }
  return "?";
}

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "uniform") return ScheduleKind::uniform;
  if (s == "geometric") return ScheduleKind::geometric;
  if (s == "explicit") return ScheduleKind::explicit_times;
  throw ConfigError("unknown time schedule '" + s + "'");
}

/// Output times t_1 < ... < t_steps; the march starts from t = 0, so the
/// first step has length t_1 = t0.
struct TimeSchedule {
  ScheduleKind kind = ScheduleKind::geometric;
  double t0 = 1e-3;
  double t1 = 10.0;
  int steps = 200;
  std::vector<double> explicit_times;

  void validate() const {
    if (kind == ScheduleKind::explicit_times) {
      if (explicit_times.empty()) throw ConfigError("explicit schedule needs at least one time");
      double prev = 0.0;
      for (double t : explicit_times) {
        if (!(t > prev)) throw ConfigError("explicit times must be positive and strictly increasing");
        prev = t;
      }
      return;
    }
    if (!(t0 > 0.0)) throw ConfigError("t0 must be positive");
    if (!(t0 < t1)) throw ConfigError("t0 must be smaller than t1");
    if (steps < 1) throw ConfigError("steps must be >= 1");
  }

  /// Geometric ratio between consecutive output times.
  double ratio() const {
    return steps > 1 ? std::pow(t1 / t0, 1.0 / (steps - 1)) : 1.0;
  }

  std::vector<double> times() const {
    validate();
    if (kind == ScheduleKind::explicit_times) return explicit_times;
    std::vector<double> out(steps);
    for (int k = 0; k < steps; ++k) {
      const double f = steps > 1 ? static_cast<double>(k) / (steps - 1) : 1.0;
      out[k] = kind == ScheduleKind::geometric ? t0 * std::pow(t1 / t0, f) : t0 + f * (t1 - t0);
    }
    if (steps > 1) out.back() = t1;
    return out;
  }
};

struct StepConfig {
  TimeSchedule schedule;
  double newton_tol = 1e-10;
  int max_newton = 80;
  double ls_shrink = 0.5;

  void validate() const {
    schedule.validate();
    if (!(newton_tol > 0.0)) throw ConfigError("newton_tol must be positive");
    if (max_newton < 1) throw ConfigError("max_newton must be >= 1");
    if (!(ls_shrink > 0.0 && ls_shrink < 1.0)) throw ConfigError("ls_shrink must lie in (0,1)");
  }
};

struct ResolventResult {
  Field u;
  Field v;
  int iterations = 0;
  double residual = 0.0;      // sqrt(sum_i w_i F_i^2)
  double residual_max = 0.0;  // max_i |F_i|
  int gradient_steps = 0;
};

namespace detail {

struct ResolventProblem {
  const KernelTable& t;
  const Field& f;
  double lambda;
  double m;

  int n() const { return t.n(); }
  const std::vector<double>& w() const { return t.domain->weights; }

  /// Nodal residual odd(v,1/m) + lambda * PV(v) - f.
  void residual(const Eigen::VectorXd& v, Eigen::VectorXd& F) const {
    const int nn = n();
    const double q = t.p - 1.0;
    const double dead = dead_zone(v);
    F.resize(nn);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nn; ++i) {
      const double* row = t.K.data() + static_cast<std::ptrdiff_t>(i) * nn;
      const double vi = v[i];
      double acc = 0.0;
      for (int j = 0; j < nn; ++j) {
        const double delta = vi - v[j];
        if (std::abs(delta) > dead) acc += row[j] * odd_power(delta, q);
      }
      acc += t.exterior[i] * odd_power(vi, q);
      F[i] = odd_power(vi, 1.0 / m) + lambda * acc - f.values[i];
    }
  }

  /// For p < 2 the slope of |x|^{p-2} x is unbounded at 0, so differences at
  /// rounding level relative to the field would make the residual noisy at
  /// the 1e-10 level. They are treated as exact zeros.
  double dead_zone(const Eigen::VectorXd& v) const {
    if (t.p >= 2.0 || v.size() == 0) return 0.0;
    return 64.0 * std::numeric_limits<double>::epsilon() * v.cwiseAbs().maxCoeff();
  }

  /// Residual plus the symmetric matrix W * dF/dv (without the zero-order
  /// part when with_phi is false).
  void linearise(const Eigen::VectorXd& v, Eigen::VectorXd& F, Eigen::MatrixXd& H, Eigen::VectorXd& diag,
                 bool with_phi = true) const {
    const int nn = n();
    const double q = t.p - 1.0;
    const auto& ww = w();
    const double scale = std::max(v.cwiseAbs().maxCoeff(), 1e-300);
    // |x|^{p-2} is unbounded at 0 when p < 2; floor the argument.
    const double floor = t.p < 2.0 ? 1e-14 * scale : 0.0;
    // Exact Newton on |x|^{q-1} x with q < 1 maps x to x (1 - 1/q) and so
    // oscillates with growing amplitude near 0. Small differences use the
    // secant slope |x|^{q-1} instead, which contracts monotonically.
    const double band = t.p < 2.0 ? 1e-8 * scale : 0.0;
    const double floor_slope = floor > 0.0 ? std::pow(floor, q - 1.0) : 0.0;
    const double dead = dead_zone(v);
    F.resize(nn);
    diag.resize(nn);
    H.resize(nn, nn);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nn; ++i) {
      const double* row = t.K.data() + static_cast<std::ptrdiff_t>(i) * nn;
      const double vi = v[i];
      double acc = 0.0, dsum = 0.0;
      for (int j = 0; j < nn; ++j) {
        const double delta = vi - v[j];
        const double a = std::abs(delta);
        double pw, slope;
        if (q == 1.0) {
          pw = delta;
          slope = 1.0;
        } else if (q == 2.0) {
          pw = delta * a;
          slope = 2.0 * a;
        } else if (a >= floor) {
          const double mag = a > 0.0 ? std::pow(a, q - 1.0) : 0.0;
          pw = std::copysign(mag * a, delta);
          slope = a < band ? mag : q * mag;
        } else {
          pw = a > dead ? odd_power(delta, q) : 0.0;
          slope = floor_slope;
        }
        acc += row[j] * pw;
        const double c = row[j] * slope;
        H(j, i) = -lambda * ww[i] * c;  // symmetric; column i is contiguous
        dsum += c;
      }
      const double ext = t.exterior[i];
      const double av = std::abs(vi);
      acc += ext * odd_power(vi, q);
      const double ext_slope = q == 1.0   ? 1.0
                               : av < floor ? floor_slope
                                            : (av < band ? 1.0 : q) * abs_power(av, q - 1.0);
      dsum += ext * ext_slope;
      const double phi_slope =
          !with_phi ? 0.0 : (m == 1.0 ? 1.0 : std::pow(std::max(av, 1e-12), 1.0 / m - 1.0) / m);
      F[i] = odd_power(vi, 1.0 / m) + lambda * acc - f.values[i];
      H(i, i) = ww[i] * (phi_slope + lambda * dsum);
      diag[i] = H(i, i);
    }
  }

  /// Psi(v) = sum w (m/(m+1)) |v|^{(m+1)/m} + lambda/(2p) [v]^p - sum w f v.
  double objective(const Eigen::VectorXd& v) const {
    const int nn = n();
    const auto& ww = w();
    const double e = (m + 1.0) / m;
    std::vector<double> rows(nn);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nn; ++i) {
      const double* row = t.K.data() + static_cast<std::ptrdiff_t>(i) * nn;
      const double vi = v[i];
      double acc = 0.0;
      for (int j = 0; j < nn; ++j) acc += row[j] * abs_power(vi - v[j], t.p);
      acc += 2.0 * t.exterior[i] * abs_power(vi, t.p);
      rows[i] = ww[i] * ((m / (m + 1.0)) * abs_power(vi, e) + lambda / (2.0 * t.p) * acc -
                         f.values[i] * vi);
    }
    double total = 0.0;
    for (double r : rows) total += r;
    return total;
  }

  std::pair<double, double> norms(const Eigen::VectorXd& F) const {
    const auto& ww = w();
    double l2 = 0.0, mx = 0.0;
    for (int i = 0; i < n(); ++i) {
      l2 += ww[i] * F[i] * F[i];
      mx = std::max(mx, std::abs(F[i]));
    }
    return {std::sqrt(l2), mx};
  }
};

}  // namespace detail

namespace detail {

inline bool converged(std::pair<double, double> nr, double tol) { return nr.first <= tol && nr.second <= tol; }

/// Damped Newton on the nodal system in v with Armijo backtracking on Psi.
inline std::pair<double, double> newton_in_v(const ResolventProblem& prob, Eigen::VectorXd& v,
                                             const StepConfig& cfg, ResolventResult& res) {
  const int n = prob.n();
  const auto& w = prob.w();
  Eigen::VectorXd F, diag, dir, trial, Ftrial, grad(n);
  Eigen::MatrixXd H;
  double psi = prob.objective(v);
  std::pair<double, double> nr;
  for (int it = 0; it < cfg.max_newton; ++it) {
    prob.linearise(v, F, H, diag);
    nr = prob.norms(F);
    if (converged(nr, cfg.newton_tol)) return nr;
    for (int i = 0; i < n; ++i) grad[i] = w[i] * F[i];

    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(H);
    bool newton_ok = llt.info() == Eigen::Success;
    if (newton_ok) {
      dir = -llt.solve(grad);
      newton_ok = dir.allFinite() && grad.dot(dir) < 0.0;
    }
    if (!newton_ok) {
      // Diagonally preconditioned steepest descent.
      dir = -grad.cwiseQuotient(diag.cwiseMax(1e-300));
      ++res.gradient_steps;
    }

    const double slope = grad.dot(dir);
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60 && !accepted; ++ls, alpha *= cfg.ls_shrink) {
      trial = v + alpha * dir;
      const double psi_trial = prob.objective(trial);
      // Near the minimiser Psi stagnates at rounding level; then accept any
      // step that reduces the residual instead.
      const double allowance = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(psi) + 1.0);
      if (psi_trial <= psi + 1e-4 * alpha * slope) {
        accepted = true;
      } else if (psi_trial <= psi + allowance) {
        prob.residual(trial, Ftrial);
        accepted = prob.norms(Ftrial).first < nr.first;
      }
      if (accepted) {
        v = trial;
        psi = psi_trial;
      }
    }
    ++res.iterations;
    if (!accepted)
      throw NonConvergence("resolvent line search exhausted (residual " + std::to_string(nr.first) + ")",
                           nr.first);
  }
  prob.residual(v, F);
  nr = prob.norms(F);
  if (!converged(nr, cfg.newton_tol))
    throw NonConvergence("resolvent did not reach tolerance after " + std::to_string(cfg.max_newton) +
                             " iterations (residual " + std::to_string(nr.first) + ")",
                         nr.first);
  return nr;
}

/// Newton on u + lambda PV(u^m) - f = 0 with backtracking on the weighted
/// residual norm. On return v holds u^m.
inline std::pair<double, double> newton_in_u(const ResolventProblem& prob, Eigen::VectorXd& v,
                                             const StepConfig& cfg, ResolventResult& res) {
  const int n = prob.n();
  const auto& w = prob.w();
  const double m = prob.m;
  Eigen::VectorXd u(n), F, diag, dir, trial_u, trial_v(n), Ftrial, slope_v(n);
  for (int i = 0; i < n; ++i) u[i] = odd_power(v[i], 1.0 / m);
  Eigen::MatrixXd H;
  std::pair<double, double> nr;
  for (int it = 0; it < cfg.max_newton; ++it) {
    for (int i = 0; i < n; ++i) v[i] = odd_power(u[i], m);
    prob.linearise(v, F, H, diag, false);
    nr = prob.norms(F);
    if (converged(nr, cfg.newton_tol)) return nr;
    // J = I + W^{-1} H diag(m |u|^{m-1})
    for (int j = 0; j < n; ++j) slope_v[j] = m * abs_power(u[j], m - 1.0);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) H(i, j) = H(i, j) / w[i] * slope_v[j] + (i == j ? 1.0 : 0.0);
    dir = -H.partialPivLu().solve(F);
    if (!dir.allFinite()) throw NonConvergence("singular Newton system in u", nr.first);

    const double merit = nr.first * nr.first;
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40 && !accepted; ++ls, alpha *= cfg.ls_shrink) {
      trial_u = u + alpha * dir;
      for (int i = 0; i < n; ++i) trial_v[i] = odd_power(trial_u[i], m);
      prob.residual(trial_v, Ftrial);
      const double tn = prob.norms(Ftrial).first;
      if (tn * tn <= (1.0 - 1e-4 * alpha) * merit) {
        u = trial_u;
        accepted = true;
      }
    }
    ++res.iterations;
    if (!accepted) throw NonConvergence("Newton in u stalled", nr.first);
  }
  for (int i = 0; i < n; ++i) v[i] = odd_power(u[i], m);
  prob.residual(v, F);
  nr = prob.norms(F);
  if (!converged(nr, cfg.newton_tol)) throw NonConvergence("Newton in u did not converge", nr.first);
  return nr;
}

}  // namespace detail

/// Solve odd(v,1/m) + lambda PV(v) = f for v = u^m. The initial guess
/// defaults to f^m.
inline ResolventResult solve_resolvent(const Field& f, double lambda, const KernelTable& t, double m,
                                       const StepConfig& cfg, const Field* guess = nullptr) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  if (!f.domain || !same_domain(*f.domain, *t.domain))
    throw DomainMismatch("kernel table does not match the datum's domain");
  for (double x : f.values)
    if (!std::isfinite(x)) throw DomainError("resolvent datum must be finite");

  ResolventResult res;
  const int n = t.n();
  const bool zero = std::all_of(f.values.begin(), f.values.end(), [](double x) { return x == 0.0; });
  if (lambda == 0.0 || zero) {
    res.u = f;
    res.v = odd_power(f, m);
    return res;
  }

  detail::ResolventProblem prob{t, f, lambda, m};
  Eigen::VectorXd v(n);
  const Field start = guess ? *guess : odd_power(f, m);
  for (int i = 0; i < n; ++i) v[i] = start.values[i];

  std::pair<double, double> nr;
  if (m > 1.0) {
    // The zero-order term v^{1/m} has unbounded slope at v = 0; iterate on u
    // instead and fall back to the v iteration if that stalls.
    try {
      nr = detail::newton_in_u(prob, v, cfg, res);
    } catch (const NonConvergence&) {
      nr = detail::newton_in_v(prob, v, cfg, res);
    }
  } else {
    nr = detail::newton_in_v(prob, v, cfg, res);
  }

  res.v = Field(t.domain);
  for (int i = 0; i < n; ++i) res.v.values[i] = v[i];
  res.u = odd_power(res.v, 1.0 / m);
  res.residual = nr.first;
  res.residual_max = nr.second;
  return res;
}

inline Field resolvent(const Field& f, double lambda, const KernelTable& t, double m, const StepConfig& cfg) {
  return solve_resolvent(f, lambda, t, m, cfg).u;
}

/// Objective of the resolvent minimisation, exposed for independent checks.
inline double resolvent_objective(const Field& v, const Field& f, double lambda, const KernelTable& t, double m) {
  detail::ResolventProblem prob{t, f, lambda, m};
  Eigen::Map<const Eigen::VectorXd> vv(v.values.data(), v.size());
  return prob.objective(vv);
}

struct StepDiagnostics {
  int step = 0;
  double t = 0.0;
  int newton_iters = 0;
  double residual = 0.0;
  double residual_max = 0.0;
  double mass = 0.0;
  double linf = 0.0;
  double energy = 0.0;  // J(v) = [v]^p / (2p)
};

/// Snapshots at t = 0 (the datum) and at every output time.
struct Trajectory {
  std::vector<double> times;
  std::vector<Field> snapshots;
  std::vector<StepDiagnostics> diagnostics;
  double newton_tol = 0.0;
  double m = 1.0;

  int size() const { return static_cast<int>(times.size()); }
  const DomainPtr& domain() const { return snapshots.front().domain; }
};

inline Trajectory march(const Field& u0, const StepConfig& cfg, const KernelTable& t, double m,
                        const std::function<void(const StepDiagnostics&)>& on_step = {}) {
  cfg.validate();
  if (!u0.domain || !same_domain(*u0.domain, *t.domain))
    throw DomainMismatch("kernel table does not match the initial datum's domain");
  Trajectory traj;
  traj.newton_tol = cfg.newton_tol;
  traj.m = m;
  const auto out_times = cfg.schedule.times();
  traj.times.reserve(out_times.size() + 1);
  traj.snapshots.reserve(out_times.size() + 1);

  auto record = [&](int step, double time, const Field& u, const Field& v, int iters, double r, double rmax) {
    StepDiagnostics dg{step, time, iters, r, rmax, mass(u), lq_norm(u, std::numeric_limits<double>::infinity()),
                       energy(v, t)};
    traj.times.push_back(time);
    traj.snapshots.push_back(u);
    traj.diagnostics.push_back(dg);
    if (on_step) on_step(dg);
  };

  Field v = odd_power(u0, m);
  record(0, 0.0, u0, v, 0, 0.0, 0.0);
  double prev = 0.0;
  Field u = u0;
  for (std::size_t k = 0; k < out_times.size(); ++k) {
    const double dt = out_times[k] - prev;
    ResolventResult r;
    try {
      r = solve_resolvent(u, dt, t, m, cfg, &v);
    } catch (const NonConvergence& e) {
      throw NonConvergence(std::string(e.what()) + " at step " + std::to_string(k + 1), e.last_residual(),
                           static_cast<int>(k + 1));
    }
    u = r.u;
    v = r.v;
    record(static_cast<int>(k + 1), out_times[k], u, v, r.iterations, r.residual, r.residual_max);
    prev = out_times[k];
  }
  return traj;
}

}  // namespace dnl
