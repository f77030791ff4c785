#pragma once

// Global barriers: the piecewise profile G, its space-time version H, the
// supersolution residual of the profile equation and trajectory domination.

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dnl/errors.hpp"
#include "dnl/exponents.hpp"
#include "dnl/kernel.hpp"
#include "dnl/nonlocal_op.hpp"
#include "dnl/resolvent.hpp"

namespace dnl {

struct BarrierConstants {
  DecayRegime regime = DecayRegime::superlinear;
  double A = 0.0, C1 = 0.0, C2 = 0.0, R1 = 0.0, R2 = 0.0;
  double log_power = 0.0;  // gamma in the critical regime
  bool three_piece = true;  // plateau, C1 |z|^{-d}, C2 g; false: plateau and tail only
  int iterations = 0;
  bool flagged = false;     // calibration needed more than 10 enlargements
};

/// Exponent of the sublinear tail, sp / (1 - m(p-1)).
inline double sublinear_exponent(const ModelParams& mp) { return mp.sp() / (1.0 - mp.homogeneity()); }

/// A = C1 R1^{-d} and C2 = C1 / (R2^d g(R2)): C1 R2^{sp} when superlinear,
/// divided by log(R2)^gamma when critical, C1 R2^{sp/(1-m(p-1)) - d} when
/// sublinear.
inline BarrierConstants match_constants(DecayRegime regime, double C1, double R1, double R2, const ModelParams& mp) {
  if (!(C1 > 0.0 && R1 > 0.0 && R2 >= R1)) throw ConfigError("barrier needs C1, R1 > 0 and R2 >= R1");
  BarrierConstants c;
  c.regime = regime;
  c.C1 = C1;
  c.R1 = R1;
  c.R2 = R2;
  c.A = C1 * std::pow(R1, -mp.d);
  switch (regime) {
    case DecayRegime::superlinear:
      c.C2 = C1 * std::pow(R2, mp.sp());
      break;
    case DecayRegime::critical:
      if (!(R2 > 1.0)) throw ConfigError("critical barrier needs R2 > 1");
      c.log_power = 1.0 / (1.0 - mp.homogeneity());
      c.C2 = C1 * std::pow(R2, mp.sp()) / std::pow(std::log(R2), c.log_power);
      break;
    case DecayRegime::sublinear:
      c.C2 = C1 * std::pow(R2, sublinear_exponent(mp) - mp.d);
      break;
  }
  return c;
}

/// Sublinear form: A = C2 R2^{-sp/(1-m(p-1))}, no intermediate region (R1 = R2).
inline BarrierConstants match_sublinear(double C2, double R2, const ModelParams& mp) {
  if (!(C2 > 0.0 && R2 > 0.0)) throw ConfigError("barrier needs C2, R2 > 0");
  BarrierConstants c;
  c.regime = DecayRegime::sublinear;
  c.C2 = C2;
  c.R2 = c.R1 = R2;
  c.A = C2 * std::pow(R2, -sublinear_exponent(mp));
  c.C1 = c.A * std::pow(R2, mp.d);
  c.three_piece = false;
  return c;
}

enum class BarrierBranch { plateau, middle, tail };

inline const char* to_string(BarrierBranch b) {
  switch (b) {
    case BarrierBranch::plateau: return "plateau";
    case BarrierBranch::middle: return "middle";
    case BarrierBranch::tail: return "tail";
  }
  return "?";
}

inline BarrierBranch branch_of(double r, const BarrierConstants& c) {
  if (r <= c.R1) return BarrierBranch::plateau;
  if (c.three_piece && r <= c.R2) return BarrierBranch::middle;
  return BarrierBranch::tail;
}

/// Formula of one branch, evaluated anywhere (used for one-sided limits).
inline double eval_G_branch(double r, BarrierBranch b, const BarrierConstants& c, const ModelParams& mp) {
  switch (b) {
    case BarrierBranch::plateau:
      return c.A;
    case BarrierBranch::middle:
      return c.C1 * std::pow(r, -mp.d);
    case BarrierBranch::tail:
      switch (c.regime) {
        case DecayRegime::superlinear:
          return c.C2 * std::pow(r, -(mp.d + mp.sp()));
        case DecayRegime::critical:
          return c.C2 * std::pow(r, -(mp.d + mp.sp())) * std::pow(std::log(r), c.log_power);
        case DecayRegime::sublinear:
          return c.C2 * std::pow(r, -sublinear_exponent(mp));
      }
  }
  return 0.0;
}

inline double eval_G(double r, const BarrierConstants& c, const ModelParams& mp) {
  r = std::abs(r);
  return eval_G_branch(r, branch_of(r, c), c, mp);
}

/// dG/dr away from the branch points.
inline double eval_G_slope(double r, const BarrierConstants& c, const ModelParams& mp) {
  const double d = mp.d, sp = mp.sp();
  switch (branch_of(r, c)) {
    case BarrierBranch::plateau:
      return 0.0;
    case BarrierBranch::middle:
      return -d * c.C1 * std::pow(r, -d - 1.0);
    case BarrierBranch::tail:
      switch (c.regime) {
        case DecayRegime::superlinear:
          return -(d + sp) * c.C2 * std::pow(r, -(d + sp) - 1.0);
        case DecayRegime::critical: {
          const double L = std::log(r);
          return c.C2 * std::pow(r, -(d + sp) - 1.0) * std::pow(L, c.log_power - 1.0) *
                 (c.log_power - (d + sp) * L);
        }
        case DecayRegime::sublinear: {
          const double g = sublinear_exponent(mp);
          return -g * c.C2 * std::pow(r, -g - 1.0);
        }
      }
  }
  return 0.0;
}

/// H(x, t) = (t + 1)^{-d beta} G(|x| (t + 1)^{-beta}).
inline double eval_H(double x, double t, const BarrierConstants& c, const ModelParams& mp, const ExponentSet& ex) {
  if (!(t >= 0.0)) throw DomainError("eval_H needs t >= 0");
  const double T = t + 1.0;
  return std::pow(T, -ex.d_beta) * eval_G(std::abs(x) * std::pow(T, -ex.beta), c, mp);
}

// ---------------------------------------------------------------------------
// Supersolution residual

enum class BarrierRegion { near, far };

/// Region of z in which the residual is meaningful. The intermediate region
/// is controlled by the a-priori |x|^{-d} bound instead.
inline BarrierRegion region_of(double z, const BarrierConstants& c, const ModelParams& mp) {
  switch (c.regime) {
    case DecayRegime::superlinear:
      if (z <= c.R1) return BarrierRegion::near;
      if (z >= 2.0 * c.R2) return BarrierRegion::far;
      break;
    case DecayRegime::critical:
      if (z <= c.R1) return BarrierRegion::near;
      if (z > std::min(2.0 * c.R2, 2.0 * std::exp(c.log_power / mp.sp()))) return BarrierRegion::far;
      break;
    case DecayRegime::sublinear:
      if (!c.three_piece) return z <= c.R2 ? BarrierRegion::near : BarrierRegion::far;
      if (z <= c.R1) return BarrierRegion::near;
      if (z >= 2.0 * c.R2) return BarrierRegion::far;
      break;
  }
  throw DomainError("z = " + std::to_string(z) + " lies in the intermediate region");
}

/// Lower edge of the far region.
inline double far_region_start(const BarrierConstants& c, const ModelParams& mp) {
  switch (c.regime) {
    case DecayRegime::superlinear:
      return 2.0 * c.R2;
    case DecayRegime::critical:
      return std::min(2.0 * c.R2, 2.0 * std::exp(c.log_power / mp.sp()));
    case DecayRegime::sublinear:
      return c.three_piece ? 2.0 * c.R2 : c.R2;
  }
  return 0.0;
}

namespace detail {

/// epsilon-truncated principal value at radius z of a radial function given
/// by gm (already raised to the power m), with kinks at `breaks`.
inline double radial_pv(const std::function<double(double)>& gm, double z, int d, double sp, double p,
                        std::vector<double> breaks, double eps_rel = 1e-9) {
  const double q = p - 1.0;
  const double gz = gm(z);
  auto f = [&](double rho) { return odd_power(gz - gm(rho), q) * angular_kernel(z, rho, d, sp); };

  double delta = 0.5 * z;
  for (double b : breaks)
    if (b != z) delta = std::min(delta, 0.5 * std::abs(z - b));
  double total = 0.0;

  // Symmetric pairs around the singularity. The paired integrand is a
  // near power law in t but loses digits to cancellation, so use a fixed
  // rule on geometric cells rather than an error-driven one.
  auto pair = [&](double t) { return f(z + t) + f(z - t); };
  using boost::math::quadrature::gauss;
  // Below t0 the difference g(z) - g(z +- t) is mostly round-off, which the
  // kernel amplifies like t^{-sp}. The cells scale like a power of t there,
  // so [eps, t0] is summed as a geometric series from the first two cells.
  const double eps = eps_rel * z;
  const double t0 = std::min(std::max(1e-4 * z, eps), delta);
  std::vector<double> cell;
  for (double a = t0, b = std::min(delta, 2.0 * a); a < delta; a = b, b = std::min(delta, 2.0 * b)) {
    cell.push_back(gauss<double, 20>::integrate(pair, a, b));
    total += cell.back();
  }
  if (cell.size() >= 2 && t0 > eps) {
    const double r = cell[1] / cell[0];
    if (r > 1.0) {
      const double levels = std::log2(t0 / eps);
      total += cell[0] * (1.0 - std::pow(r, -levels)) / (r - 1.0);
    }
  }

  // Outer pieces on geometric cells, split at the kinks.
  // Shallow refinement: on a plateau cell the integrand can be zero to
  // round-off and a deep relative tolerance never settles.
  auto shallow = [&](double lo, double hi) {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 6, 1e-9);
  };
  auto cells = [&](std::vector<double> pts) {
    std::sort(pts.begin(), pts.end());
    double acc = 0.0;
    for (std::size_t k = 1; k < pts.size(); ++k) {
      double lo = pts[k - 1];
      const double hi = pts[k];
      if (hi <= lo) continue;
      while (lo > 0.0 && hi > 4.0 * lo) {
        acc += shallow(lo, 4.0 * lo);
        lo *= 4.0;
      }
      acc += shallow(lo, hi);
    }
    return acc;
  };
  std::vector<double> below{0.0, z - delta}, above{z + delta};
  double top = z;
  for (double b : breaks) {
    if (b < z - delta) below.push_back(b);
    if (b > z + delta) above.push_back(b);
    top = std::max(top, b);
  }
  above.push_back(std::max(256.0 * top, z + 2.0 * delta));
  total += cells(below) + cells(above);
  const double upper = *std::max_element(above.begin(), above.end());
  boost::math::quadrature::exp_sinh<double> tail;
  total += tail.integrate(f, upper, std::numeric_limits<double>::infinity());
  return total;
}

}  // namespace detail

struct ResidualParts {
  double operator_term = 0.0;  // (-Delta_p)^s_eps G^m (z)
  double drift_term = 0.0;     // -beta r^{1-d} (r^d G)'(z)
  double total() const { return operator_term + drift_term; }
  /// Residual with every negative contribution counted twice (safety factor 2
  /// on the constant of each inequality).
  double with_safety(double factor = 2.0) const {
    auto s = [&](double x) { return x >= 0.0 ? x : factor * x; };
    return s(operator_term) + s(drift_term);
  }
};

inline ResidualParts residual_parts(const BarrierConstants& c, double z, const ModelParams& mp,
                                    const ExponentSet& ex) {
  if (!(z > 0.0)) throw DomainError("residual needs z > 0");
  region_of(z, c, mp);
  const std::function<double(double)> gm = [&](double r) { return odd_power(eval_G(r, c, mp), mp.m); };
  std::vector<double> breaks{c.R1};
  if (c.R2 != c.R1) breaks.push_back(c.R2);
  ResidualParts out;
  out.operator_term = detail::radial_pv(gm, z, mp.d, mp.sp(), mp.p, breaks);
  out.drift_term = -ex.beta * (mp.d * eval_G(z, c, mp) + z * eval_G_slope(z, c, mp));
  return out;
}

/// Residual of the profile equation for G at radius z; >= 0 means G is a
/// supersolution there.
inline double supersolution_residual(const BarrierConstants& c, double z, const ModelParams& mp,
                                     const ExponentSet& ex) {
  if (c.A == 0.0 && c.C1 == 0.0 && c.C2 == 0.0) return 0.0;
  return residual_parts(c, z, mp, ex).total();
}

// ---------------------------------------------------------------------------
// Construction

struct DatumStats {
  double support_radius = 1.0;
  double sup_norm = 1.0;
  double mass = 2.0;
};

inline DatumStats datum_stats(const Field& u0) {
  DatumStats st{0.0, 0.0, lq_norm(u0, 1.0)};
  st.sup_norm = sup_norm_with_origin(u0);
  const double h = u0.domain->h;
  for (int i = 0; i < u0.size(); ++i)
    if (u0.values[i] != 0.0) st.support_radius = std::max(st.support_radius, std::abs(u0.domain->nodes[i]) + 0.5 * h);
  return st;
}

struct BarrierOptions {
  int near_samples = 8;
  int far_samples = 16;
  double far_span = 32.0;  // far samples cover [z0, far_span * z0]
  int max_iterations = 60;
  double safety = 2.0;
};

inline std::vector<double> near_samples(const BarrierConstants& c, int n) {
  std::vector<double> z;
  for (int j = 0; j < n; ++j) z.push_back(c.R1 * (j + 0.5) / n);
  return z;
}

inline std::vector<double> far_samples(const BarrierConstants& c, const ModelParams& mp, int n, double span) {
  const double z0 = far_region_start(c, mp) * (1.0 + 1e-9);
  std::vector<double> z;
  for (int j = 0; j < n; ++j) z.push_back(z0 * std::pow(span, n > 1 ? static_cast<double>(j) / (n - 1) : 0.0));
  return z;
}

inline double min_residual(const BarrierConstants& c, const std::vector<double>& zs, const ModelParams& mp,
                           const ExponentSet& ex, double safety) {
  std::vector<double> vals(zs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (int j = 0; j < static_cast<int>(zs.size()); ++j) vals[j] = residual_parts(c, zs[j], mp, ex).with_safety(safety);
  return *std::min_element(vals.begin(), vals.end());
}

namespace detail {

/// Two-piece sublinear profile. The residual is invariant under r -> r / h
/// with C2 fixed, so only C2 is searched; R2 then follows from domination.
/// Returns false when the near and far conditions admit no common C2 or
/// the admissible C2 cannot dominate the datum.
inline bool build_two_piece(const ModelParams& mp, const ExponentSet& ex, const DatumStats& st,
                            const BarrierOptions& opt, BarrierConstants& out, int& it) {
  const double g = sublinear_exponent(mp);
  const double need = st.sup_norm * std::pow(st.support_radius, g);
  double C2 = need;
  bool lowered = false, raised = false;
  for (; it < opt.max_iterations; ++it) {
    auto c = match_sublinear(C2, 1.0, mp);
    const bool near_ok = min_residual(c, near_samples(c, opt.near_samples), mp, ex, opt.safety) >= 0.0;
    const bool far_ok = min_residual(c, far_samples(c, mp, opt.far_samples, opt.far_span), mp, ex, opt.safety) >= 0.0;
    if (near_ok && far_ok) {
      if (C2 < need) return false;
      out = match_sublinear(C2, st.support_radius, mp);
      return true;
    }
    if (near_ok == far_ok) return false;
    if (!far_ok) {
      if (lowered) return false;
      C2 *= 2.0;
      raised = true;
    } else {
      if (raised) return false;
      C2 *= 0.5;
      lowered = true;
    }
  }
  return false;
}

}  // namespace detail

/// Calibrate barrier constants for data with the given statistics. Unknown
/// constants are estimated by sampling the residual; every inequality is
/// enforced with the safety factor on its constant. In the sublinear regime
/// the two-piece profile is tried first and the three-piece profile with the
/// sublinear tail is used when the two-piece conditions are incompatible.
inline BarrierConstants build_barrier(const ModelParams& mp, const ExponentSet& ex, const DatumStats& st,
                                      const BarrierOptions& opt = {}) {
  if (mp.p <= critical_exponent(mp)) throw RegimeError("barrier construction needs p > p_mc");
  if (!(st.support_radius > 0.0 && st.sup_norm > 0.0)) throw ConfigError("datum must be nonzero");
  int it = 0;
  if (ex.regime == DecayRegime::sublinear) {
    BarrierConstants c;
    if (detail::build_two_piece(mp, ex, st, opt, c, it)) {
      c.iterations = it;
      c.flagged = it > 10;
      return c;
    }
  }

  const double h = mp.homogeneity();
  double R1 = st.support_radius;
  double C1 = std::max(st.sup_norm * std::pow(R1, mp.d), st.mass);
  double R2 = 2.0 * R1;
  if (ex.regime == DecayRegime::critical) {
    // G must decrease on the tail: (d + sp) log r > gamma.
    const double gamma = 1.0 / (1.0 - h);
    R2 = std::max(R2, 1.01 * std::exp(gamma / (mp.d + mp.sp())));
  }
  for (;; ++it) {
    if (it >= opt.max_iterations)
      throw SearchFailure("barrier calibration did not settle after " + std::to_string(it) + " iterations");
    auto c = match_constants(ex.regime, C1, R1, std::max(R2, R1), mp);
    if (eval_G(st.support_radius, c, mp) < st.sup_norm || C1 < st.mass) {
      C1 *= 2.0;
      continue;
    }
    if (min_residual(c, near_samples(c, opt.near_samples), mp, ex, opt.safety) < 0.0) {
      if (h > 1.0) C1 *= 2.0;
      else R1 *= 0.5;
      continue;
    }
    if (min_residual(c, far_samples(c, mp, opt.far_samples, opt.far_span), mp, ex, opt.safety) < 0.0) {
      R2 *= 2.0;
      continue;
    }
    c.iterations = it;
    c.flagged = it > 10;
    return c;
  }
}

// ---------------------------------------------------------------------------
// Domination

struct DominationReport {
  double max_violation = 0.0;  // max over snapshots of max_i (|u_i| - H_i) / max(H_i, floor)
  int worst_step = 0;
  double worst_x = 0.0;
  bool passed = true;
};

inline DominationReport check_domination(const Trajectory& traj, const BarrierConstants& c, const ModelParams& mp,
                                         const ExponentSet& ex, double tolerance = 1e-3) {
  DominationReport rep;
  rep.max_violation = -std::numeric_limits<double>::infinity();
  const double floor = 1e-12 * std::max(c.A, 1e-300);
  for (int k = 0; k < traj.size(); ++k) {
    const Field& u = traj.snapshots[k];
    for (int i = 0; i < u.size(); ++i) {
      const double x = u.domain->nodes[i];
      const double H = eval_H(x, traj.times[k], c, mp, ex);
      const double v = (std::abs(u.values[i]) - H) / std::max(H, floor);
      if (v > rep.max_violation) {
        rep.max_violation = v;
        rep.worst_step = k;
        rep.worst_x = x;
      }
    }
  }
  if (traj.size() == 0) rep.max_violation = 0.0;
  rep.passed = rep.max_violation <= tolerance;
  return rep;
}

}  // namespace dnl
