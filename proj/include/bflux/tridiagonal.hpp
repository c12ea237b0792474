#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace bflux {

/// Tridiagonal matrix stored by diagonals: lower[i] = A(i, i-1) (lower[0]
/// unused), diag[i] = A(i, i), upper[i] = A(i, i+1) (upper[n-1] unused).
struct Tridiagonal {
  std::vector<double> lower, diag, upper;

  explicit Tridiagonal(std::size_t n) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}
  [[nodiscard]] std::size_t size() const { return diag.size(); }
};

/// Thomas elimination without pivoting; fine for the diagonally dominant
/// M-matrices produced by the implicit step. Solves in place into rhs.
inline void solve_in_place(const Tridiagonal& a, std::span<double> rhs) {
  const std::size_t n = a.size();
  std::vector<double> c(n);
  double denom = a.diag[0];
  if (denom == 0.0) throw std::runtime_error("tridiagonal solve: zero pivot");
  c[0] = a.upper[0] / denom;
  rhs[0] /= denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = a.diag[i] - a.lower[i] * c[i - 1];
    if (denom == 0.0) throw std::runtime_error("tridiagonal solve: zero pivot");
    c[i] = (i + 1 < n) ? a.upper[i] / denom : 0.0;
    rhs[i] = (rhs[i] - a.lower[i] * rhs[i - 1]) / denom;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
}

}  // namespace bflux
