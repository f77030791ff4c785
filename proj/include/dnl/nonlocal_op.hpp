#pragma once

// The doubly nonlinear nonlocal operator (-Delta_p)^s v^m on a grid, its
// Gagliardo energy and the weak pairing.

#include <cmath>
#include <vector>

#include "dnl/errors.hpp"
#include "dnl/grid.hpp"
#include "dnl/kernel.hpp"

namespace dnl {

/// Sign-preserving power |a|^{q-1} a, exactly 0 at a = 0.
inline double odd_power(double a, double q) {
  if (a == 0.0) return 0.0;
  if (q == 1.0) return a;
  if (q == 2.0) return a * std::abs(a);
  if (q == 3.0) return a * a * a;
  return std::copysign(std::pow(std::abs(a), q), a);
}

/// |a|^q with integer fast paths.
inline double abs_power(double a, double q) {
  const double b = std::abs(a);
  if (b == 0.0) return q == 0.0 ? 1.0 : 0.0;
  if (q == 1.0) return b;
  if (q == 2.0) return b * b;
  if (q == 3.0) return b * b * b;
  return std::pow(b, q);
}

inline Field odd_power(const Field& f, double q) {
  Field out(f.domain);
  for (int i = 0; i < f.size(); ++i) out.values[i] = odd_power(f.values[i], q);
  return out;
}

struct OperatorOutput {
  Field values;
  double epsilon_used = 0.0;
};

namespace detail {
inline void require_table(const Field& v, const KernelTable& t) {
  if (!v.domain || !same_domain(*v.domain, *t.domain))
    throw DomainMismatch("kernel table does not match the field's domain");
}
}  // namespace detail

/// One row of the principal-value sum at node i.
inline double apply_pv_at(const Field& v, const KernelTable& t, int i) {
  const double q = t.p - 1.0;
  const double vi = v.values[i];
  const double* row = t.K.data() + static_cast<std::ptrdiff_t>(i) * t.n();
  double acc = 0.0;
  for (int j = 0; j < t.n(); ++j) acc += row[j] * odd_power(vi - v.values[j], q);
  return acc + t.exterior[i] * odd_power(vi, q);
}

inline OperatorOutput apply_pv(const Field& v, const KernelTable& t) {
  detail::require_table(v, t);
  OperatorOutput out{Field(v.domain), t.diagonal_rule.effective_epsilon};
#pragma omp parallel for schedule(static)
  for (int i = 0; i < t.n(); ++i) out.values.values[i] = apply_pv_at(v, t, i);
  return out;
}

inline OperatorOutput apply_doubly_nonlinear(const Field& u, const KernelTable& t, double m) {
  return apply_pv(odd_power(u, m), t);
}

/// Discrete [v]_{s,p}^p: full double sum plus the exterior counted from both
/// slots of the double integral.
inline double seminorm_p(const Field& v, const KernelTable& t) {
  detail::require_table(v, t);
  const auto& w = v.domain->weights;
  const int n = t.n();
  std::vector<double> rows(n, 0.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const double* row = t.K.data() + static_cast<std::ptrdiff_t>(i) * n;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += row[j] * abs_power(v.values[i] - v.values[j], t.p);
    rows[i] = w[i] * (acc + 2.0 * t.exterior[i] * abs_power(v.values[i], t.p));
  }
  double total = 0.0;
  for (double r : rows) total += r;
  return total;
}

/// Gagliardo energy J(v) = [v]^p / (2p).
inline double energy(const Field& v, const KernelTable& t) { return seminorm_p(v, t) / (2.0 * t.p); }

/// (1/2) sum_ij w_i K_ij (v_i - v_j)^{p-1} (xi_i - xi_j) + exterior pairing.
inline double weak_pairing(const Field& v, const Field& xi, const KernelTable& t) {
  detail::require_table(v, t);
  require_same_domain(v, xi);
  const auto& w = v.domain->weights;
  const int n = t.n();
  const double q = t.p - 1.0;
  std::vector<double> rows(n, 0.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const double* row = t.K.data() + static_cast<std::ptrdiff_t>(i) * n;
    double acc = 0.0;
    for (int j = 0; j < n; ++j)
      acc += row[j] * odd_power(v.values[i] - v.values[j], q) * (xi.values[i] - xi.values[j]);
    rows[i] = w[i] * (0.5 * acc + t.exterior[i] * odd_power(v.values[i], q) * xi.values[i]);
  }
  double total = 0.0;
  for (double r : rows) total += r;
  return total;
}

}  // namespace dnl
