#pragma once

// Model parameters and the exponent algebra of the doubly nonlinear
// nonlocal diffusion equation  u_t + (-Delta_p)^s u^m = 0.

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "dnl/errors.hpp"

namespace dnl {

/// Physical parameters (d, s, p, m).
struct ModelParams {
  int d = 1;
  double s = 0.5;
  double p = 2.0;
  double m = 1.0;

  ModelParams() = default;
  ModelParams(int d_, double s_, double p_, double m_) : d(d_), s(s_), p(p_), m(m_) { validate(); }

  void validate() const {
    std::ostringstream os;
    if (d < 1) os << "dimension d must be >= 1 (got " << d << ")";
    else if (!(s > 0.0 && s < 1.0)) os << "s must lie in (0,1) (got " << s << ")";
    else if (!(p > 1.0)) os << "p must be > 1 (got " << p << ")";
    else if (!(m > 0.0)) os << "m must be > 0 (got " << m << ")";
    if (!os.str().empty()) throw ConfigError(os.str());
  }

  double sp() const { return s * p; }
  /// Homogeneity degree m(p-1) of the composed operator.
  double homogeneity() const { return m * (p - 1.0); }
};

enum class DecayRegime { sublinear, critical, superlinear };

inline const char* to_string(DecayRegime r) {
  switch (r) {
    case DecayRegime::sublinear: return "sublinear";
    case DecayRegime::critical: return "critical";
    case DecayRegime::superlinear: return "superlinear";
  }
  return "?";
}

inline constexpr double kRegimeTolerance = 1e-9;

struct ExponentSet {
  double beta = 0.0;
  double d_beta = 0.0;
  double p_mc = 0.0;
  double p_one = 0.0;
  double q_s = 0.0;  // +inf when p > d/s
  double alpha_smooth = 0.0;
  double gamma_smooth = 0.0;
  double tail_exponent = 0.0;
  double log_power = 0.0;
  DecayRegime regime = DecayRegime::superlinear;
};

/// Critical exponent d(1+m)/(md+s); beta > 0 exactly when p exceeds it.
inline double critical_exponent(const ModelParams& mp) {
  return mp.d * (1.0 + mp.m) / (mp.m * mp.d + mp.s);
}

/// Root of (s q + d) m (q - 1) - d on (1, 1 + 1/m) by bisection.
inline double decay_transition_exponent(const ModelParams& mp) {
  auto f = [&](double q) { return (mp.s * q + mp.d) * mp.m * (q - 1.0) - mp.d; };
  double lo = 1.0 + 1e-9;
  double hi = 1.0 + 1.0 / mp.m - 1e-9;
  if (!(f(lo) < 0.0 && f(hi) > 0.0)) throw DegenerateError("p_one bracket failed");
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline DecayRegime classify_regime(const ModelParams& mp, const ExponentSet& ex) {
  if (mp.p <= ex.p_mc)
    throw RegimeError("p = " + std::to_string(mp.p) + " <= p_mc = " + std::to_string(ex.p_mc));
  if (mp.p > ex.p_one + kRegimeTolerance) return DecayRegime::superlinear;
  if (std::abs(mp.p - ex.p_one) <= kRegimeTolerance) return DecayRegime::critical;
  return DecayRegime::sublinear;
}

inline ExponentSet derive_exponents(const ModelParams& mp) {
  mp.validate();
  ExponentSet ex;
  ex.p_mc = critical_exponent(mp);
  if (mp.p <= ex.p_mc)
    throw RegimeError("p = " + std::to_string(mp.p) + " must exceed p_mc = " +
                      std::to_string(ex.p_mc) + " for a positive self-similar exponent");
  const double hom = mp.homogeneity();
  if (std::abs(hom - 1.0) <= 1e-12) throw DegenerateError("m(p-1) = 1 is excluded");
  const double sobolev_edge = mp.d / mp.s;
  if (std::abs(mp.p - sobolev_edge) <= 1e-12)
    throw DegenerateError("p = d/s (borderline Sobolev exponent) is not supported");

  ex.beta = 1.0 / (mp.d * (hom - 1.0) + mp.sp());
  ex.d_beta = mp.d * ex.beta;
  ex.p_one = decay_transition_exponent(mp);

  double p_over_qs = 0.0;
  if (mp.p < sobolev_edge) {
    ex.q_s = 1.0 / (1.0 / mp.p - mp.s / mp.d);
    p_over_qs = mp.p / ex.q_s;
  } else {
    ex.q_s = std::numeric_limits<double>::infinity();
  }
  ex.alpha_smooth = 1.0 / (hom - p_over_qs);
  ex.gamma_smooth = (1.0 - p_over_qs) / (hom - p_over_qs);

  ex.regime = classify_regime(mp, ex);
  switch (ex.regime) {
    case DecayRegime::superlinear:
      ex.tail_exponent = mp.d + mp.sp();
      ex.log_power = 0.0;
      break;
    case DecayRegime::critical:
      ex.tail_exponent = mp.d + mp.sp();
      ex.log_power = 1.0;
      break;
    case DecayRegime::sublinear:
      ex.tail_exponent = mp.sp() / (1.0 - hom);
      ex.log_power = 0.0;
      break;
  }
  return ex;
}

/// Decay law g(r) of the tail in each regime.
inline double decay_g(double r, const ModelParams& mp, const ExponentSet& ex) {
  if (!(r > 0.0)) throw DomainError("decay_g requires r > 0");
  switch (ex.regime) {
    case DecayRegime::superlinear:
      return std::pow(r, -(mp.d + mp.sp()));
    case DecayRegime::critical:
      if (!(r > 1.0)) throw DomainError("critical decay_g requires r > 1");
      return std::pow(r, -(mp.d + mp.sp())) * std::log(r);
    case DecayRegime::sublinear:
      return std::pow(r, -mp.sp() / (1.0 - mp.homogeneity()));
  }
  return 0.0;
}

}  // namespace dnl
