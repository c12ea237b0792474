/// @file data.hpp
/// @brief Initial data families used by the experiments.

#pragma once

#include <bflux/grid.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace bflux::data {

/// min(|x - center|^(-a), cap) with cap the value at distance h from the
/// singular point. With a in (1/r0, 1/r) the continuum profile lies in L^r
/// but not in L^r0.
[[nodiscard]] inline Field singular(Mesh1D mesh, double a, double scale = 1.0,
                                    double center = -1.0) {
  const double c = center < 0.0 ? 0.5 * mesh.length() : center;
  const double cap = scale * std::pow(mesh.spacing(), -a);
  return Field::from_function(mesh, [&](double x) {
    const double dist = std::abs(x - c);
    return dist < 0.5 * mesh.spacing() ? cap : std::min(cap, scale * std::pow(dist, -a));
  });
}

[[nodiscard]] inline Field flat(Mesh1D mesh, double level) { return Field(mesh, level); }

/// Smooth random data: level * (1 + sum_k a_k cos(k pi x / l)) / norm, k <= modes,
/// nonnegative when `positive` (shifted by its minimum).
[[nodiscard]] inline Field random_smooth(Mesh1D mesh, double level, unsigned long long seed,
                                         bool positive = false, int modes = 5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::vector<double> a(modes + 1), b(modes + 1);
  for (int k = 0; k <= modes; ++k) {
    a[k] = coef(rng);
    b[k] = coef(rng);
  }
  Field u = Field::from_function(mesh, [&](double x) {
    double v = a[0];
    for (int k = 1; k <= modes; ++k) {
      const double arg = k * std::numbers::pi * x / mesh.length();
      v += (a[k] * std::cos(arg) + b[k] * std::sin(arg)) / k;
    }
    return v;
  });
  if (positive) {
    double lo = u[0];
    for (double v : u.values()) lo = std::min(lo, v);
    for (double& v : u.values()) v -= lo;
  }
  const double m = sup_norm(u);
  if (m > 0.0)
    for (double& v : u.values()) v *= level / m;
  return u;
}

}  // namespace bflux::data
