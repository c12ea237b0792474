/// @file asymptotics.hpp
/// @brief Equilibria of -u'' + f(u) = 0, du/dn = g(u); extremal equilibria
/// reached by long-time integration from +-M; absorbing-set probes.

#pragma once

#include <bflux/cascade.hpp>
#include <bflux/error.hpp>
#include <bflux/grid.hpp>
#include <bflux/integrator.hpp>
#include <bflux/nonlinearity.hpp>
#include <bflux/tridiagonal.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace bflux {

inline constexpr double kEquilibriumTol = 1e-9;

struct Equilibrium {
  enum class Tag { FromAbove, FromBelow, NewtonFound };
  Field field;
  double residual{};
  Tag stability_tag{Tag::NewtonFound};
};

struct ExtremalPair {
  Equilibrium phi_min;
  Equilibrium phi_max;
  double M{};
  bool monotone_from_above{};
  bool monotone_from_below{};
  double settle_time_above{};
  double settle_time_below{};
};

namespace detail {

/// Stationary residual scaled by h^2/2 (the Laplacian diagonal):
///   F_i = (h^2/2) (-Lap_h phi + f(phi))_i, flux folded in at the ends.
template <Nonlinearity F, Nonlinearity G>
void elliptic_residual(const Field& phi, const F& f, const G& g, std::span<double> out) {
  const std::size_t n = phi.size();
  const double h = phi.mesh().spacing();
  const double ih2 = 1.0 / (h * h);
  const double scale = 0.5 * h * h;
  for (std::size_t i = 0; i < n; ++i) {
    double lap;
    if (i == 0)
      lap = 2.0 * (phi[1] - phi[0]) * ih2 + 2.0 * g.evaluate(phi[0]).value / h;
    else if (i + 1 == n)
      lap = 2.0 * (phi[n - 2] - phi[n - 1]) * ih2 + 2.0 * g.evaluate(phi[n - 1]).value / h;
    else
      lap = (phi[i - 1] - 2.0 * phi[i] + phi[i + 1]) * ih2;
    out[i] = scale * (-lap + f.evaluate(phi[i]).value);
  }
}

template <Nonlinearity F, Nonlinearity G>
Tridiagonal elliptic_jacobian(const Field& phi, const F& f, const G& g) {
  const std::size_t n = phi.size();
  const double h = phi.mesh().spacing();
  const double scale = 0.5 * h * h;
  Tridiagonal J(n);
  for (std::size_t i = 0; i < n; ++i) {
    J.diag[i] = 1.0 + scale * f.evaluate(phi[i]).slope;
    if (i > 0) J.lower[i] = -0.5;
    if (i + 1 < n) J.upper[i] = -0.5;
  }
  J.upper[0] = -1.0;
  J.lower[n - 1] = -1.0;
  J.diag[0] -= h * g.evaluate(phi[0]).slope;
  J.diag[n - 1] -= h * g.evaluate(phi[n - 1]).slope;
  return J;
}

}  // namespace detail

template <Nonlinearity F, Nonlinearity G>
[[nodiscard]] double elliptic_residual_norm(const Field& phi, const F& f, const G& g) {
  std::vector<double> r(phi.size());
  detail::elliptic_residual(phi, f, g, r);
  return detail::max_abs(r);
}

/// Pseudo-transient continuation followed by damped Newton. The continuation
/// phase takes linearized backward-Euler steps of the gradient flow
/// phi_t = phi'' - f(phi) with pseudo step tau, growing tau (at most doubling)
/// as the residual falls, so the iterate lands in the equilibrium the flow from
/// `guess` reaches rather than jumping to a degenerate root. pseudo_dt = 0
/// skips it.
template <Nonlinearity F, Nonlinearity G>
[[nodiscard]] Equilibrium solve_equilibrium(const Field& guess, const F& f, const G& g,
                                            double tol = kEquilibriumTol, int max_iter = 100,
                                            double pseudo_dt = 1e-2) {
  const std::size_t n = guess.size();
  Field phi = guess;
  std::vector<double> r(n), trial_r(n), delta(n);
  detail::elliptic_residual(phi, f, g, r);
  double rnorm = detail::max_abs(r);
  const double h = guess.mesh().spacing();
  double tau = pseudo_dt;
  for (int it = 0; pseudo_dt > 0.0 && it < 4 * max_iter && rnorm > tol; ++it) {
    Tridiagonal J = detail::elliptic_jacobian(phi, f, g);
    for (double& d : J.diag) d += 0.5 * h * h / tau;
    delta = r;
    try {
      solve_in_place(J, delta);
    } catch (const std::runtime_error&) {
      break;
    }
    for (std::size_t i = 0; i < n; ++i) phi[i] -= delta[i];
    detail::elliptic_residual(phi, f, g, r);
    const double next = detail::max_abs(r);
    if (!std::isfinite(next)) throw NoConvergence("solve_equilibrium: continuation diverged");
    tau *= std::clamp(rnorm / next, 0.5, 2.0);
    rnorm = next;
  }
  // Iterate until the residual stops decreasing: the h^2 scaling hides
  // O(1/h^2) amplification of the residual into the solution error, and
  // degenerate roots converge only linearly.
  for (int it = 0; it < max_iter && rnorm > 0.0; ++it) {
    delta = r;
    try {
      solve_in_place(detail::elliptic_jacobian(phi, f, g), delta);
    } catch (const std::runtime_error&) {
      break;
    }
    double lambda = 1.0;
    bool improved = false;
    for (int k = 0; k <= 30; ++k, lambda *= 0.5) {
      Field trial = phi;
      for (std::size_t i = 0; i < n; ++i) trial[i] -= lambda * delta[i];
      detail::elliptic_residual(trial, f, g, trial_r);
      const double tn = detail::max_abs(trial_r);
      if (tn < rnorm) {
        phi = std::move(trial);
        std::swap(r, trial_r);
        rnorm = tn;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  if (!(rnorm <= tol)) throw NoConvergence("solve_equilibrium: Newton did not converge");
  return {std::move(phi), rnorm, Equilibrium::Tag::NewtonFound};
}

struct SettleResult {
  Field state;
  double time{};
  bool monotone{true};
};

/// Steps from u0 until ||u(t+D) - u(t)||_inf < tol * D with D = 10 dt.
/// `direction` = -1 expects a nodewise nonincreasing path, +1 nondecreasing.
template <Nonlinearity F, Nonlinearity G>
[[nodiscard]] SettleResult settle(const Field& u0, const F& f, const G& g, const StepConfig& cfg,
                                  double T_max, double tol, int direction) {
  constexpr int kWindow = 10;
  constexpr double kOrderTol = 1e-9;
  SettleResult out{u0, 0.0, true};
  Field anchor = u0;
  long long k = 0;
  while (out.time < T_max) {
    Field next = step(out.state, f, g, cfg, cfg.dt, out.time);
    for (std::size_t i = 0; i < next.size(); ++i)
      if (direction * (next[i] - out.state[i]) < -kOrderTol * std::max(1.0, std::abs(out.state[i])))
        out.monotone = false;
    out.state = std::move(next);
    ++k;
    out.time = static_cast<double>(k) * cfg.dt;
    if (k % kWindow == 0) {
      if (sup_norm(out.state - anchor) < tol * kWindow * cfg.dt) return out;
      anchor = out.state;
    }
  }
  throw NotSettled("extremal_equilibria: T_max reached before the settle tolerance");
}

/// Integrates from u0 = +M and u0 = -M, raising M (doubling, at most
/// `max_raises` times) until both paths are monotone from the first step,
/// then polishes the settled states with Newton.
template <Nonlinearity F, Nonlinearity G>
[[nodiscard]] ExtremalPair extremal_equilibria(Mesh1D mesh, double M, double T_max, double tol,
                                               const F& f, const G& g, const StepConfig& cfg,
                                               int max_raises = 8) {
  if (!(M > 0.0)) throw std::invalid_argument("extremal_equilibria: M must be positive");
  StepConfig fixed = cfg;
  fixed.growth_rate = 0.0;
  // Stiff boundary rows at moderate M need deeper sub-stepping than transient runs.
  fixed.max_dt_halvings = std::max(fixed.max_dt_halvings, 12);
  for (int attempt = 0;; ++attempt, M *= 2.0) {
    const SettleResult above = settle(Field(mesh, M), f, g, fixed, T_max, tol, -1);
    const SettleResult below = settle(Field(mesh, -M), f, g, fixed, T_max, tol, +1);
    if ((!above.monotone || !below.monotone) && attempt < max_raises) continue;
    ExtremalPair pair{solve_equilibrium(below.state, f, g), solve_equilibrium(above.state, f, g), M,
                      above.monotone, below.monotone, above.time, below.time};
    pair.phi_min.stability_tag = Equilibrium::Tag::FromBelow;
    pair.phi_max.stability_tag = Equilibrium::Tag::FromAbove;
    return pair;
  }
}

/// Linear interpolation of `e` onto `fine`, then Newton on the fine mesh.
template <Nonlinearity F, Nonlinearity G>
[[nodiscard]] Equilibrium refine(const Equilibrium& e, Mesh1D fine, const F& f, const G& g,
                                 double tol = kEquilibriumTol) {
  const Field& c = e.field;
  const double h = c.mesh().spacing();
  Field guess = Field::from_function(fine, [&](double x) {
    const auto j = std::min(static_cast<std::size_t>(x / h), c.size() - 2);
    const double w = x / h - static_cast<double>(j);
    return (1.0 - w) * c[j] + w * c[j + 1];
  });
  Equilibrium out = solve_equilibrium(guess, f, g, tol);
  out.stability_tag = e.stability_tag;
  return out;
}

/// phi_min <= phi <= phi_max nodewise (+1e-9) for every equilibrium in `found`.
[[nodiscard]] inline bool equilibria_order_check(std::span<const Equilibrium> found,
                                                 const ExtremalPair& pair, double tol = 1e-9) {
  for (const auto& e : found)
    for (std::size_t i = 0; i < e.field.size(); ++i)
      if (e.field[i] < pair.phi_min.field[i] - tol || e.field[i] > pair.phi_max.field[i] + tol)
        return false;
  return true;
}

struct AbsorbingReport {
  std::vector<double> sup_norms;
  double uniform_bound{};
};

/// sup over saved t in [epsilon, T] of ||u(t)||_inf for each initial datum,
/// with g truncated at the top of its default K schedule. Throws on blow-up.
template <Nonlinearity F>
[[nodiscard]] AbsorbingReport absorbing_probe(std::span<const Field> data_set, double epsilon,
                                              double T, const F& f, const PowerNonlinearity& g,
                                              const StepConfig& cfg) {
  if (data_set.empty()) throw std::invalid_argument("absorbing_probe: empty data set");
  AbsorbingReport rep;
  for (const auto& u0 : data_set) {
    const double K = default_k_schedule(g, u0).back();
    const Trajectory tr = solve_truncated(u0, f, g, K, T, cfg);
    if (tr.status.blown_up())
      throw BlownUp("absorbing_probe: trajectory ended with " + to_string(tr.status));
    if (!tr.status.completed())
      throw NewtonFailed("absorbing_probe: trajectory ended with " + to_string(tr.status),
                         tr.status.time);
    double s = 0.0;
    for (std::size_t j = 0; j < tr.size(); ++j)
      if (tr.times[j] >= epsilon - 1e-12) s = std::max(s, sup_norm(tr.snapshots[j]));
    rep.sup_norms.push_back(s);
    rep.uniform_bound = std::max(rep.uniform_bound, s);
  }
  return rep;
}

/// max over saved t >= t_settle of how far u(t) leaves [phi_min - tol, phi_max + tol].
[[nodiscard]] inline double sandwich_excess(const Trajectory& tr, const ExtremalPair& pair,
                                            double t_settle) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < tr.size(); ++j) {
    if (tr.times[j] < t_settle) continue;
    for (std::size_t i = 0; i < tr.snapshots[j].size(); ++i) {
      const double v = tr.snapshots[j][i];
      worst = std::max({worst, v - pair.phi_max.field[i], pair.phi_min.field[i] - v});
    }
  }
  return worst;
}

}  // namespace bflux
