/// @file nonlinearity.hpp
/// @brief Reaction and flux models, slope-clamped truncations, envelopes and
/// the p+1 vs 2q balance classifier.

#pragma once

#include <bflux/error.hpp>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <utility>

namespace bflux {

/// Value and first derivative of a scalar nonlinearity at one point.
struct ValueSlope {
  double value{};
  double slope{};
};

/// Anything the integrator can use as f or g.
template <typename N>
concept Nonlinearity = requires(const N& n, double s) {
  { n.evaluate(s) } -> std::same_as<ValueSlope>;
  { n.growth_exponent() } -> std::convertible_to<double>;
};

/// s -> c |s|^(p-1) s + d s + e.
///
/// With c > 0 and p > 1 the derivative bound
///   p c |s|^(p-1) - A0 <= f'(s) <= p c |s|^(p-1) + A1
/// holds with A0 = max(0, -d), A1 = max(0, d). Other values of c are
/// admitted for affine and sign-reversed test models; see satisfies_growth().
struct PowerNonlinearity {
  double c{1.0};
  double p{2.0};
  double d{0.0};
  double e{0.0};

  static PowerNonlinearity zero() { return {0.0, 2.0, 0.0, 0.0}; }
  static PowerNonlinearity affine(double slope, double offset) {
    return {0.0, 2.0, slope, offset};
  }

  [[nodiscard]] ValueSlope evaluate(double s) const {
    const double a = std::abs(s);
    // |s|^(p-1) is continuous at 0 for p > 1; guard the 0^0 case of p == 1.
    const double ap = (a == 0.0) ? 0.0 : std::pow(a, p - 1.0);
    return {c * ap * s + d * s + e, c * p * ap + d};
  }

  [[nodiscard]] double operator()(double s) const { return evaluate(s).value; }
  [[nodiscard]] double growth_exponent() const { return p; }

  [[nodiscard]] bool satisfies_growth() const { return c > 0.0 && p > 1.0; }
  [[nodiscard]] double lower_slope_deficit() const { return std::max(0.0, -d); }  // A0 / B0
  [[nodiscard]] double upper_slope_excess() const { return std::max(0.0, d); }    // A1 / B1
  [[nodiscard]] double at_zero() const { return e; }
};

/// g_K: equals g on [a_K, b_K], continued linearly with slope K outside.
class TruncatedNonlinearity {
 public:
  TruncatedNonlinearity(PowerNonlinearity base, double clamp, double lower_cut,
                        double upper_cut)
      : base_(base), clamp_(clamp), lower_(lower_cut), upper_(upper_cut),
        g_lower_(base.evaluate(lower_cut).value), g_upper_(base.evaluate(upper_cut).value) {
    if (!std::isfinite(lower_)) g_lower_ = 0.0;
    if (!std::isfinite(upper_)) g_upper_ = 0.0;
  }

  [[nodiscard]] ValueSlope evaluate(double s) const {
    if (s > upper_) return {g_upper_ + clamp_ * (s - upper_), clamp_};
    if (s < lower_) return {g_lower_ + clamp_ * (s - lower_), clamp_};
    return base_.evaluate(s);
  }

  [[nodiscard]] double operator()(double s) const { return evaluate(s).value; }
  [[nodiscard]] double growth_exponent() const { return base_.p; }

  [[nodiscard]] const PowerNonlinearity& base() const { return base_; }
  [[nodiscard]] double clamp() const { return clamp_; }
  [[nodiscard]] double lower_cut() const { return lower_; }
  [[nodiscard]] double upper_cut() const { return upper_; }

 private:
  PowerNonlinearity base_;
  double clamp_;
  double lower_;
  double upper_;
  double g_lower_;
  double g_upper_;
};

template <Nonlinearity N>
[[nodiscard]] ValueSlope eval_with_derivative(const N& n, double s) {
  return n.evaluate(s);
}

/// Cut where g' = K and continue with slope K.
///
/// For the power family g' = q c |s|^(q-1) + d is even and increasing in |s|,
/// so the cut points are symmetric: b_K = ((K - d) / (q c))^(1/(q-1)).
[[nodiscard]] inline TruncatedNonlinearity truncate(const PowerNonlinearity& g, double K) {
  if (!(K > g.d)) throw InvalidClamp("slope clamp K must exceed g'(0) = d");
  if (g.c < 0.0) throw InvalidClamp("truncation needs c >= 0 (g' bounded below)");
  if (g.c == 0.0 || g.p <= 1.0) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {g, K, -inf, inf};
  }
  const double b = std::pow((K - g.d) / (g.p * g.c), 1.0 / (g.p - 1.0));
  return {g, K, -b, b};
}

enum class Balance { Dissipative, Critical, Explosive };

[[nodiscard]] inline const char* to_string(Balance b) {
  switch (b) {
    case Balance::Dissipative: return "Dissipative";
    case Balance::Critical: return "Critical";
    case Balance::Explosive: return "Explosive";
  }
  return "?";
}

struct BalanceReport {
  Balance classification{Balance::Dissipative};
  double r0{};
  /// (1, r0) when r0 > 1.
  std::optional<std::pair<double, double>> supercritical_range;
};

/// Classification depends only on the exponents: p+1 against 2q.
[[nodiscard]] inline BalanceReport classify_balance(const PowerNonlinearity& f,
                                                    const PowerNonlinearity& g, int N) {
  constexpr double tie = 1e-12;
  const double gap = (f.p + 1.0) - 2.0 * g.p;
  BalanceReport r;
  r.classification = gap > tie ? Balance::Dissipative
                               : (gap < -tie ? Balance::Explosive : Balance::Critical);
  r.r0 = std::max(N * (f.p - 1.0) / 2.0, N * (g.p - 1.0));
  if (r.r0 > 1.0) r.supercritical_range = std::make_pair(1.0, r.r0);
  return r;
}

/// Comparison envelopes for sign-changing data.
///   f_minus <= f, f_minus(0) <= 0;  g_plus >= g_K on s >= 0, g_plus(0) >= 0
///   f_plus  >= f, f_plus(0)  >= 0;  g_minus <= g_K on s <= 0, g_minus(0) <= 0
/// g_K lies below g on s >= 0 and above it on s <= 0 for every K, so the
/// shifted copies of g dominate on the half-line where the comparison
/// function keeps its sign.
struct EnvelopeSet {
  PowerNonlinearity f_minus;
  PowerNonlinearity g_plus;
  PowerNonlinearity f_plus;
  PowerNonlinearity g_minus;
};

[[nodiscard]] inline EnvelopeSet envelope_pair(const PowerNonlinearity& f,
                                               const PowerNonlinearity& g) {
  auto shifted = [](PowerNonlinearity n, double by) {
    n.e += by;
    return n;
  };
  return {
      shifted(f, -std::max(f.e, 0.0)),
      shifted(g, std::max(-g.e, 0.0)),
      shifted(f, std::max(-f.e, 0.0)),
      shifted(g, -std::max(g.e, 0.0)),
  };
}

}  // namespace bflux
