#pragma once

// Dense epsilon-truncated interaction kernel |x-y|^{-d-sp}, with the angular
// pre-integration used for radially symmetric fields and the closed-form
// exterior closure for the region beyond the truncation radius.

#include <Eigen/Dense>
#include <bit>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "dnl/errors.hpp"
#include "dnl/exponents.hpp"
#include "dnl/grid.hpp"

namespace dnl {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

inline double adaptive(auto&& f, double a, double b) {
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0;
  return gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-10, &err);
}

/// int_0^pi ((r-rho)^2 + 4 r rho sin^2(t/2))^{-q} sin^{d-2}(t) dt
inline double angular_integral(double r, double rho, int d, double sp) {
  const double q = 0.5 * (d + sp);
  const double diff2 = (r - rho) * (r - rho);
  const double c = 4.0 * r * rho;
  if (c == 0.0) {
    // sin^{d-2} integrates to sqrt(pi) Gamma((d-1)/2) / Gamma(d/2)
    const double sphere =
        std::sqrt(std::numbers::pi) * std::tgamma(0.5 * (d - 1)) / std::tgamma(0.5 * d);
    return std::pow(diff2, -q) * sphere;
  }
  if (d == 3) {
    // diff2^{1-q} - (r+rho)^{2(1-q)}, written to stay accurate when r*rho is tiny
    const double b = 2.0 * r * rho, plus2 = (r + rho) * (r + rho);
    const double lead = std::pow(plus2, 1.0 - q);
    return lead * std::expm1((1.0 - q) * std::log1p(-2.0 * b / plus2)) / (b * (q - 1.0));
  }
  auto f = [&](double t) {
    const double s2 = std::sin(0.5 * t);
    const double base = std::pow(diff2 + c * s2 * s2, -q);
    return d == 2 ? base : base * std::pow(std::sin(t), d - 2);
  };
  // The integrand peaks at t = 0 with width ~ |r - rho| / sqrt(r rho); split
  // geometrically away from the peak.
  double width = std::abs(r - rho) / std::sqrt(r * rho);
  double total = 0.0, a = 0.0;
  double b = std::min(std::numbers::pi, width);
  while (a < std::numbers::pi) {
    total += adaptive(f, a, b);
    a = b;
    b = std::min(std::numbers::pi, b * 4.0);
  }
  return total;
}

}  // namespace detail

/// Kernel per unit radius for radially symmetric fields: the interaction
/// |x-y|^{-d-sp} integrated over the sphere |y| = rho. For d = 1 this is the
/// fold of the negative half-line onto the positive one.
inline double angular_kernel(double r, double rho, int d, double sp) {
  if (!(r >= 0.0 && rho > 0.0)) throw DomainError("angular_kernel requires r >= 0, rho > 0");
  if (r == rho) throw SingularError("angular_kernel is singular at r = rho");
  if (d == 1) return std::pow(std::abs(r - rho), -(1.0 + sp)) + std::pow(r + rho, -(1.0 + sp));
  return std::pow(rho, d - 1) * unit_sphere_area(d - 1) * detail::angular_integral(r, rho, d, sp);
}

inline double angular_kernel(double r, double rho, const ModelParams& mp) {
  return angular_kernel(r, rho, mp.d, mp.sp());
}

/// Integral of the kernel over the exterior of the ball of radius R, seen from
/// a point at distance r < R from the origin.
inline double exterior_weight(double r, double R, int d, double sp) {
  if (d == 1) return (std::pow(R - r, -sp) + std::pow(R + r, -sp)) / sp;
  auto f = [&](double rho) { return angular_kernel(r, rho, d, sp); };
  const double gap = R - r;
  double total = 0.0, a = R, b = R + gap;
  for (int k = 0; k < 6; ++k) {
    total += detail::adaptive(f, a, b);
    a = b;
    b = R + (b - R) * 4.0;
  }
  boost::math::quadrature::exp_sinh<double> tail;
  total += tail.integrate(f, a, std::numeric_limits<double>::infinity());
  return total;
}

struct DiagonalRule {
  /// Exclusion radius around each node; every node other than the node itself
  /// sits at least one spacing away, so only the self-cell is dropped.
  double effective_epsilon = 0.0;
  std::string describe() const {
    return "exclude self-cell ball of radius " + std::to_string(effective_epsilon);
  }
};

struct KernelTable {
  DomainPtr domain;
  double epsilon = 0.0;
  double s = 0.0;
  double p = 0.0;
  RowMatrix K;                  // K(i,j) = kernel(i,j) * measure of cell j
  std::vector<double> exterior;  // E(i): closed-form exterior integral
  bool exterior_enabled = true;
  DiagonalRule diagonal_rule;

  int n() const { return domain->n; }
  double sp() const { return s * p; }
};

inline KernelTable assemble_kernel(const DomainPtr& domain, double epsilon, const ModelParams& mp,
                                   bool exterior = true) {
  const Domain& dom = *domain;
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be nonnegative");
  if (epsilon >= dom.h) throw ConfigError("epsilon must be smaller than the grid spacing");
  if (dom.d != mp.d) throw ConfigError("domain dimension differs from model dimension");

  KernelTable t;
  t.domain = domain;
  t.epsilon = epsilon;
  t.s = mp.s;
  t.p = mp.p;
  t.exterior_enabled = exterior;
  t.diagonal_rule.effective_epsilon = epsilon > 0.0 ? epsilon : 0.5 * dom.h;
  const int n = dom.n;
  const double sp = mp.sp();
  t.K.setZero(n, n);
  t.exterior.assign(n, 0.0);

  if (dom.mode == GridMode::full_line) {
    // Translation invariance: tabulate by index offset.
    std::vector<double> by_offset(n, 0.0);
    for (int k = 1; k < n; ++k) by_offset[k] = std::pow(k * dom.h, -(1.0 + sp)) * dom.h;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) t.K(i, j) = by_offset[std::abs(i - j)];
  } else if (dom.d == 1) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) t.K(i, j) = angular_kernel(dom.nodes[i], dom.nodes[j], 1, sp) * dom.h;
  } else {
    // angular_kernel(r, rho) / rho^{d-1} is symmetric in (r, rho).
#pragma omp parallel for schedule(dynamic, 4)
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double ri = dom.nodes[i], rj = dom.nodes[j];
        const double sym = angular_kernel(ri, rj, dom.d, sp) / std::pow(rj, dom.d - 1);
        t.K(i, j) = sym * std::pow(rj, dom.d - 1) * dom.h;
        t.K(j, i) = sym * std::pow(ri, dom.d - 1) * dom.h;
      }
    }
  }

  if (exterior) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
      t.exterior[i] = exterior_weight(std::abs(dom.nodes[i]), dom.R, dom.d, sp);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Binary cache: 8-byte magic, key tuple (mode, d, s, p, R, n, epsilon,
// exterior flag), then K row-major and E, all little-endian 8-byte values.

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
  os.write(reinterpret_cast<const char*>(&v), 8);
}
inline void put_f64(std::ostream& os, double x) { put_u64(os, std::bit_cast<std::uint64_t>(x)); }
inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  if (!is) throw ConfigError("truncated kernel cache");
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
  return v;
}
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline constexpr char kCacheMagic[8] = {'D', 'N', 'L', 'K', 'E', 'R', 'N', '1'};

}  // namespace detail

inline void save_kernel_cache(const KernelTable& t, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write kernel cache " + path);
  const Domain& dom = *t.domain;
  os.write(detail::kCacheMagic, 8);
  detail::put_u64(os, dom.mode == GridMode::full_line ? 0 : 1);
  detail::put_u64(os, static_cast<std::uint64_t>(dom.d));
  detail::put_f64(os, t.s);
  detail::put_f64(os, t.p);
  detail::put_f64(os, dom.R);
  detail::put_u64(os, static_cast<std::uint64_t>(dom.n));
  detail::put_f64(os, t.epsilon);
  detail::put_u64(os, t.exterior_enabled ? 1 : 0);
  for (int i = 0; i < dom.n; ++i)
    for (int j = 0; j < dom.n; ++j) detail::put_f64(os, t.K(i, j));
  for (double e : t.exterior) detail::put_f64(os, e);
}

/// Load a cached table; the stored key must match the requested one exactly.
inline KernelTable load_kernel_cache(const std::string& path, const DomainPtr& domain, double epsilon,
                                     const ModelParams& mp, bool exterior = true) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open kernel cache " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, detail::kCacheMagic, 8) != 0) throw ConfigError("bad cache magic");
  const Domain& dom = *domain;
  const bool key_ok = detail::get_u64(is) == (dom.mode == GridMode::full_line ? 0u : 1u) &&
                      detail::get_u64(is) == static_cast<std::uint64_t>(dom.d) &&
                      detail::get_f64(is) == mp.s && detail::get_f64(is) == mp.p &&
                      detail::get_f64(is) == dom.R &&
                      detail::get_u64(is) == static_cast<std::uint64_t>(dom.n) &&
                      detail::get_f64(is) == epsilon &&
                      detail::get_u64(is) == (exterior ? 1u : 0u);
  if (!key_ok) throw ConfigError("kernel cache key mismatch for " + path);
  KernelTable t;
  t.domain = domain;
  t.epsilon = epsilon;
  t.s = mp.s;
  t.p = mp.p;
  t.exterior_enabled = exterior;
  t.diagonal_rule.effective_epsilon = epsilon > 0.0 ? epsilon : 0.5 * dom.h;
  t.K.resize(dom.n, dom.n);
  for (int i = 0; i < dom.n; ++i)
    for (int j = 0; j < dom.n; ++j) t.K(i, j) = detail::get_f64(is);
  t.exterior.resize(dom.n);
  for (double& e : t.exterior) e = detail::get_f64(is);
  return t;
}

}  // namespace dnl
