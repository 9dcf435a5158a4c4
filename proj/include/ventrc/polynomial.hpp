#pragma once

// Real polynomials in the delay operator z^-1, stored lowest power first:
//   c[0] + c[1] z^-1 + ... + c[n] z^-n
// The same coefficient vector read highest-power-first is the polynomial in z
// whose roots are the zeros/poles of the z^-1 form.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "ventrc/errors.hpp"

namespace ventrc {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// Evaluate c(z^-1) at z = e^{i omega} (omega in radians/sample).
inline Complex poly_eval(std::span<const double> c, double omega) {
  // Horner in w = e^{-i omega}
  const Complex w = std::polar(1.0, -omega);
  Complex acc{0.0, 0.0};
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * w + *it;
  return acc;
}

inline Complex poly_eval(std::span<const Complex> c, double omega) {
  const Complex w = std::polar(1.0, -omega);
  Complex acc{0.0, 0.0};
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * w + *it;
  return acc;
}

inline std::vector<double> poly_multiply(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

inline std::vector<double> poly_add(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
  return out;
}

/// Multiply by z^-shift.
inline std::vector<double> poly_delay(std::span<const double> a, int shift) {
  std::vector<double> out(static_cast<std::size_t>(shift), 0.0);
  out.insert(out.end(), a.begin(), a.end());
  return out;
}

inline double poly_sum(std::span<const double> c) {
  double s = 0.0;
  for (double v : c) s += v;
  return s;
}

/// Roots in z of c(z^-1); leading (c[0]) must be nonzero. Trailing zeros
/// lower the degree and contribute no roots.
inline std::vector<Complex> poly_roots(std::span<const double> c) {
  if (c.empty() || c.front() == 0.0)
    throw DomainError("poly_roots: leading coefficient must be nonzero");
  std::size_t n = c.size();
  while (n > 1 && c[n - 1] == 0.0) --n;
  const int degree = static_cast<int>(n) - 1;
  if (degree == 0) return {};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (int j = 0; j < degree; ++j) companion(0, j) = -c[j + 1] / c[0];
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  if (solver.info() != Eigen::Success) throw NumericalError("poly_roots: eigenvalue solver failed");
  std::vector<Complex> roots(degree);
  for (int i = 0; i < degree; ++i) roots[i] = solver.eigenvalues()[i];
  // Newton polish on the polynomial in z, c[0] z^d + ... + c[d]; a step is
  // kept only if it lowers the residual.
  auto eval_z = [&](Complex r, Complex& derivative) {
    Complex p{c[0], 0.0};
    derivative = Complex{};
    for (int k = 1; k <= degree; ++k) {
      derivative = derivative * r + p;
      p = p * r + c[k];
    }
    return p;
  };
  for (Complex& r : roots) {
    for (int it = 0; it < 3; ++it) {
      Complex dp;
      const Complex p = eval_z(r, dp);
      if (std::abs(dp) == 0.0) break;
      const Complex next = r - p / dp;
      Complex unused;
      if (!(std::abs(eval_z(next, unused)) < std::abs(p))) break;
      r = next;
    }
    if (std::abs(r.imag()) <= 1e-14 * std::abs(r)) r = Complex{r.real(), 0.0};
  }
  return roots;
}

/// gain * prod (1 - r z^-1). Conjugate pairs must be complete so the result
/// is real; the residual imaginary parts are dropped.
inline std::vector<double> poly_from_roots(std::span<const Complex> roots, double gain = 1.0) {
  std::vector<Complex> acc{Complex{gain, 0.0}};
  for (const Complex& r : roots) {
    std::vector<Complex> next(acc.size() + 1, Complex{});
    for (std::size_t i = 0; i < acc.size(); ++i) {
      next[i] += acc[i];
      next[i + 1] -= acc[i] * r;
    }
    acc = std::move(next);
  }
  std::vector<double> out(acc.size());
  std::transform(acc.begin(), acc.end(), out.begin(), [](Complex v) { return v.real(); });
  return out;
}

/// Schur-Cohn step-down test: true iff all roots of the monic-normalized
/// a(z^-1) lie strictly inside the unit circle. O(n^2).
inline bool poly_is_schur_stable(std::span<const double> a) {
  if (a.empty() || a.front() == 0.0) return false;
  std::vector<double> cur(a.begin(), a.end());
  for (double& v : cur) v /= a.front();
  while (cur.size() > 1 && cur.back() == 0.0) cur.pop_back();
  for (std::size_t m = cur.size() - 1; m >= 1; --m) {
    const double k = cur[m];
    if (!(std::abs(k) < 1.0)) return false;
    const double scale = 1.0 - k * k;
    std::vector<double> next(m, 0.0);
    next[0] = 1.0;
    for (std::size_t i = 1; i < m; ++i) next[i] = (cur[i] - k * cur[m - i]) / scale;
    cur = std::move(next);
  }
  return true;
}

}  // namespace ventrc
