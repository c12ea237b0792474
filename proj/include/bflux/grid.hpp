/// @file grid.hpp
/// @brief Uniform 1D mesh on (0, l), nodal fields, trapezoid norms and the
/// discrete Poincare/trace inequality checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace bflux {

/// Nodes x_i = i h, i = 0..n-1; the boundary is {x_0, x_{n-1}}.
class Mesh1D {
 public:
  Mesh1D(std::size_t n, double length) : n_(n), length_(length) {
    if (n < 3) throw std::invalid_argument("Mesh1D needs at least 3 nodes");
    if (!(length > 0.0)) throw std::invalid_argument("Mesh1D length must be positive");
    h_ = length / static_cast<double>(n - 1);
  }

  [[nodiscard]] std::size_t size() const { return n_; }
  [[nodiscard]] double length() const { return length_; }
  [[nodiscard]] double spacing() const { return h_; }
  [[nodiscard]] double node(std::size_t i) const {
    return i + 1 == n_ ? length_ : static_cast<double>(i) * h_;
  }
  /// Trapezoid weight of node i.
  [[nodiscard]] double weight(std::size_t i) const {
    return (i == 0 || i + 1 == n_) ? 0.5 * h_ : h_;
  }

  friend bool operator==(const Mesh1D&, const Mesh1D&) = default;

 private:
  std::size_t n_;
  double length_;
  double h_{};
};

/// Nodal values on a mesh.
class Field {
 public:
  explicit Field(Mesh1D mesh, double fill = 0.0) : mesh_(mesh), values_(mesh.size(), fill) {}
  Field(Mesh1D mesh, std::vector<double> values) : mesh_(mesh), values_(std::move(values)) {
    if (values_.size() != mesh_.size())
      throw std::invalid_argument("Field: value count does not match mesh");
  }

  template <typename Fn>
  static Field from_function(Mesh1D mesh, Fn&& fn) {
    Field u(mesh);
    for (std::size_t i = 0; i < mesh.size(); ++i) u.values_[i] = fn(mesh.node(i));
    return u;
  }

  [[nodiscard]] const Mesh1D& mesh() const { return mesh_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<double> values() { return values_; }
  [[nodiscard]] double front() const { return values_.front(); }
  [[nodiscard]] double back() const { return values_.back(); }

  [[nodiscard]] bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  Field& operator-=(const Field& o) {
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  friend Field operator-(Field a, const Field& b) { return a -= b; }

 private:
  Mesh1D mesh_;
  std::vector<double> values_;
};

[[nodiscard]] inline double sup_norm(const Field& u) {
  double m = 0.0;
  for (double v : u.values()) m = std::max(m, std::abs(v));
  return m;
}

/// Trapezoid integral of u.
[[nodiscard]] inline double integral(const Field& u) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u.mesh().weight(i) * u[i];
  return s;
}

/// Trapezoid approximation of int |u|^sigma (no root).
[[nodiscard]] inline double power_integral(const Field& u, double sigma) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u.mesh().weight(i) * std::pow(std::abs(u[i]), sigma);
  return s;
}

/// (int |u|^sigma)^(1/sigma), trapezoid quadrature.
[[nodiscard]] inline double lebesgue_norm(const Field& u, double sigma) {
  if (sigma < 1.0) throw std::invalid_argument("lebesgue_norm: sigma must be >= 1");
  return std::pow(power_integral(u, sigma), 1.0 / sigma);
}

/// sum ((w_{i+1} - w_i)/h)^2 h with w = |u|^(sigma/2).
[[nodiscard]] inline double grad_power_norm(const Field& u, double sigma) {
  if (sigma < 1.0) throw std::invalid_argument("grad_power_norm: sigma must be >= 1");
  const double h = u.mesh().spacing();
  double s = 0.0;
  double prev = std::pow(std::abs(u[0]), 0.5 * sigma);
  for (std::size_t i = 1; i < u.size(); ++i) {
    const double w = std::pow(std::abs(u[i]), 0.5 * sigma);
    s += (w - prev) * (w - prev) / h;
    prev = w;
  }
  return s;
}

/// int_Gamma |u|^sigma = |u(0)|^sigma + |u(l)|^sigma.
[[nodiscard]] inline double trace_norm(const Field& u, double sigma) {
  if (sigma < 1.0) throw std::invalid_argument("trace_norm: sigma must be >= 1");
  return std::pow(std::abs(u.front()), sigma) + std::pow(std::abs(u.back()), sigma);
}

/// Sum of |u_{i+1} - u_i|, i.e. the exact L1 norm of the derivative of the
/// piecewise-linear interpolant.
[[nodiscard]] inline double gradient_l1(const Field& u) {
  double s = 0.0;
  for (std::size_t i = 1; i < u.size(); ++i) s += std::abs(u[i] - u[i - 1]);
  return s;
}

struct InequalityReport {
  double lhs{};
  double rhs{};
  double constant_used{};
  bool satisfied{};
};

inline constexpr double kInequalitySlack = 1e-9;

[[nodiscard]] inline InequalityReport make_report(double lhs, double rhs, double c) {
  return {lhs, rhs, c, lhs <= rhs + kInequalitySlack};
}

/// ||u - mean_Gamma u||_L1 <= c0 ||u'||_L1.
[[nodiscard]] inline InequalityReport poincare_check(const Field& u, double c0) {
  const double mean = 0.5 * (u.front() + u.back());
  double lhs = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) lhs += u.mesh().weight(i) * std::abs(u[i] - mean);
  return make_report(lhs, c0 * gradient_l1(u), c0);
}

/// int_Gamma |u|^sigma <= delta int |(|u|^(sigma/2))'|^2 + C_delta ||u||_sigma^sigma.
[[nodiscard]] inline InequalityReport trace_inequality_check(const Field& u, double sigma,
                                                             double delta, double c_delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("trace_inequality_check: delta must be > 0");
  const double lhs = trace_norm(u, sigma);
  const double rhs = delta * grad_power_norm(u, sigma) + c_delta * power_integral(u, sigma);
  return make_report(lhs, rhs, c_delta);
}

/// Random trigonometric polynomials a0 + sum_k (a_k cos(k pi x / l) + b_k sin(k pi x / l)).
[[nodiscard]] inline std::vector<Field> trig_corpus(Mesh1D mesh, std::size_t count,
                                                    unsigned long long seed, int max_mode = 6) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_int_distribution<int> modes(1, max_mode);
  std::vector<Field> out;
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    const int m = modes(rng);
    std::vector<double> a(m + 1), b(m + 1);
    for (int k = 0; k <= m; ++k) {
      a[k] = coef(rng);
      b[k] = coef(rng);
    }
    out.push_back(Field::from_function(mesh, [&](double x) {
      double v = a[0];
      for (int k = 1; k <= m; ++k) {
        const double arg = k * std::numbers::pi * x / mesh.length();
        v += a[k] * std::cos(arg) + b[k] * std::sin(arg);
      }
      return v;
    }));
  }
  return out;
}

/// Smallest c0 that makes every corpus field satisfy the Poincare check,
/// times the safety factor.
[[nodiscard]] inline double calibrate_poincare(std::span<const Field> corpus, double safety = 2.0) {
  double worst = 0.0;
  for (const auto& u : corpus) {
    const auto r = poincare_check(u, 1.0);
    if (r.rhs > 0.0) worst = std::max(worst, r.lhs / r.rhs);
  }
  return safety * worst;
}

/// Smallest C_delta for the trace inequality on the corpus, times the safety factor.
[[nodiscard]] inline double calibrate_trace(std::span<const Field> corpus, double sigma,
                                            double delta, double safety = 2.0) {
  double worst = 0.0;
  for (const auto& u : corpus) {
    const double mass = power_integral(u, sigma);
    if (mass <= 0.0) continue;
    worst = std::max(worst, (trace_norm(u, sigma) - delta * grad_power_norm(u, sigma)) / mass);
  }
  return safety * worst;
}

}  // namespace bflux
