#pragma once

// Truncated uniform cell-centred grids, grid functions and quadrature
// functionals. Values outside the truncation radius are exactly zero.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "dnl/errors.hpp"

namespace dnl {

enum class GridMode { full_line, radial };

inline const char* to_string(GridMode m) { return m == GridMode::full_line ? "full_line" : "radial"; }

inline GridMode grid_mode_from_string(const std::string& s) {
  if (s == "full_line") return GridMode::full_line;
  if (s == "radial") return GridMode::radial;
  throw ConfigError("unknown grid mode '" + s + "'");
}

/// Surface area of the unit sphere in R^d (omega_1 = 2 counts both half-lines).
inline double unit_sphere_area(int d) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

struct Domain {
  GridMode mode = GridMode::full_line;
  int d = 1;
  double R = 1.0;
  int n = 0;
  double h = 0.0;
  std::vector<double> nodes;
  std::vector<double> weights;

  /// Coordinate of the (virtual) node index i, valid for any integer i.
  double coord(long i) const {
    return mode == GridMode::full_line ? -R + (static_cast<double>(i) + 0.5) * h
                                       : (static_cast<double>(i) + 0.5) * h;
  }

  bool same_layout(const Domain& o) const {
    return mode == o.mode && d == o.d && n == o.n && R == o.R;
  }
};

using DomainPtr = std::shared_ptr<const Domain>;

inline DomainPtr build_domain(GridMode mode, int d, double R, int n) {
  if (!(R > 0.0)) throw ConfigError("truncation radius R must be positive");
  if (n < 2) throw ConfigError("node count n must be at least 2");
  if (d < 1) throw ConfigError("dimension must be >= 1");
  if (mode == GridMode::full_line && d != 1) throw ConfigError("full_line mode requires d = 1");

  auto dom = std::make_shared<Domain>();
  dom->mode = mode;
  dom->d = d;
  dom->R = R;
  dom->n = n;
  dom->h = (mode == GridMode::full_line ? 2.0 * R : R) / n;
  dom->nodes.resize(n);
  dom->weights.resize(n);
  const double omega = unit_sphere_area(d);
  for (int i = 0; i < n; ++i) {
    const double x = dom->coord(i);
    dom->nodes[i] = x;
    dom->weights[i] = mode == GridMode::full_line ? dom->h : omega * std::pow(x, d - 1) * dom->h;
  }
  return dom;
}

/// A grid function. Value semantics; the domain is shared and immutable.
struct Field {
  DomainPtr domain;
  std::vector<double> values;

  Field() = default;
  explicit Field(DomainPtr dom) : domain(std::move(dom)), values(domain->n, 0.0) {}
  Field(DomainPtr dom, std::vector<double> v) : domain(std::move(dom)), values(std::move(v)) {
    if (static_cast<int>(values.size()) != domain->n)
      throw DomainMismatch("field length does not match node count");
    for (double x : values)
      if (!std::isfinite(x)) throw DomainError("field values must be finite");
  }

  int size() const { return static_cast<int>(values.size()); }
  double operator[](int i) const { return values[i]; }
  double& operator[](int i) { return values[i]; }
  std::span<const double> span() const { return values; }
};

inline bool same_domain(const Domain& a, const Domain& b) { return &a == &b || a.same_layout(b); }

inline void require_same_domain(const Field& a, const Field& b) {
  if (!a.domain || !b.domain || !same_domain(*a.domain, *b.domain))
    throw DomainMismatch("fields live on different domains");
}

template <class F>
Field make_field(const DomainPtr& dom, F&& fn) {
  Field f(dom);
  for (int i = 0; i < dom->n; ++i) f.values[i] = fn(dom->nodes[i]);
  return f;
}

inline double mass(const Field& f) {
  double acc = 0.0;
  const auto& w = f.domain->weights;
  for (int i = 0; i < f.size(); ++i) acc += w[i] * f.values[i];
  return acc;
}

inline double lq_norm(const Field& f, double q) {
  if (std::isinf(q)) {
    double mx = 0.0;
    for (double v : f.values) mx = std::max(mx, std::abs(v));
    return mx;
  }
  if (!(q >= 1.0)) throw DomainError("lq_norm requires q >= 1");
  const auto& w = f.domain->weights;
  double acc = 0.0;
  for (int i = 0; i < f.size(); ++i) acc += w[i] * std::pow(std::abs(f.values[i]), q);
  return std::pow(acc, 1.0 / q);
}

inline double positive_part_integral(const Field& f, const Field& g) {
  require_same_domain(f, g);
  const auto& w = f.domain->weights;
  double acc = 0.0;
  for (int i = 0; i < f.size(); ++i) acc += w[i] * std::max(f.values[i] - g.values[i], 0.0);
  return acc;
}

inline Field operator-(const Field& a, const Field& b) {
  require_same_domain(a, b);
  Field out(a.domain);
  for (int i = 0; i < a.size(); ++i) out.values[i] = a.values[i] - b.values[i];
  return out;
}

inline Field operator+(const Field& a, const Field& b) {
  require_same_domain(a, b);
  Field out(a.domain);
  for (int i = 0; i < a.size(); ++i) out.values[i] = a.values[i] + b.values[i];
  return out;
}

inline Field operator*(double c, const Field& a) {
  Field out(a.domain);
  for (int i = 0; i < a.size(); ++i) out.values[i] = c * a.values[i];
  return out;
}

/// Sup-norm including the origin value, which for radial grids is recovered
/// by extrapolating the even profile a + b r^2 through the first two nodes.
inline double sup_norm_with_origin(const Field& f) {
  double mx = lq_norm(f, std::numeric_limits<double>::infinity());
  if (f.domain->mode == GridMode::radial && f.size() >= 2) {
    const double r0 = f.domain->nodes[0], r1 = f.domain->nodes[1];
    const double b = (f.values[1] - f.values[0]) / (r1 * r1 - r0 * r0);
    const double origin = f.values[0] - b * r0 * r0;
    mx = std::max(mx, std::abs(origin));
  }
  return mx;
}

/// Linear interpolation of a field at an arbitrary coordinate. Full-line
/// fields are zero beyond the ghost nodes at +-(R + h/2); radial fields are
/// even in r and vanish beyond R + h/2.
inline double interpolate(const Field& f, double x) {
  const Domain& dom = *f.domain;
  if (dom.mode == GridMode::radial) x = std::abs(x);
  const double u = (dom.mode == GridMode::full_line ? (x + dom.R) : x) / dom.h - 0.5;
  const double fl = std::floor(u);
  const long i0 = static_cast<long>(fl);
  const double t = u - fl;
  auto value = [&](long i) -> double {
    if (i >= 0 && i < dom.n) return f.values[i];
    if (dom.mode == GridMode::radial && i < 0) return f.values[std::min<long>(-i - 1, dom.n - 1)];
    return 0.0;
  };
  if (i0 < -1 || i0 > dom.n) return 0.0;
  return (1.0 - t) * value(i0) + t * value(i0 + 1);
}

/// Resample a field onto another domain by linear interpolation. A radial
/// target sampled from a full-line source uses the symmetric average.
inline Field resample(const Field& src, const DomainPtr& target, double x_scale = 1.0,
                      double amplitude = 1.0) {
  Field out(target);
  const bool fold = target->mode == GridMode::radial && src.domain->mode == GridMode::full_line;
  for (int i = 0; i < target->n; ++i) {
    const double x = target->nodes[i] * x_scale;
    const double v = fold ? 0.5 * (interpolate(src, x) + interpolate(src, -x)) : interpolate(src, x);
    out.values[i] = amplitude * v;
  }
  return out;
}

}  // namespace dnl
