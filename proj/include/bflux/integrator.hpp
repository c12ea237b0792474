/// @file integrator.hpp
/// @brief Backward-Euler time stepping for u_t - u_xx + f(u) = 0 on (0, l)
/// with flux condition du/dn = g(u) imposed through ghost nodes.
///
/// The discrete operator at the end nodes folds the ghost value
/// u_ghost = u_inner + 2 h g(u_boundary) into the Laplacian, which makes the
/// scheme conservative for the trapezoid rule:
///   d/dt sum_i w_i u_i = g(u_0) + g(u_{n-1}) - sum_i w_i f(u_i).

#pragma once

#include <bflux/error.hpp>
#include <bflux/grid.hpp>
#include <bflux/nonlinearity.hpp>
#include <bflux/tridiagonal.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bflux {

struct StepConfig {
  double dt{1e-3};
  double theta{1.0};  // implicitness of diffusion; only backward Euler is implemented
  double newton_tol{1e-11};
  int newton_max{50};
  double blowup_threshold{1e8};
  int max_dt_halvings{4};
  /// Relative sup-norm growth allowed per unit of base dt; 0 keeps the step
  /// fixed at dt. When positive, the step shrinks so each accepted step grows
  /// ||u||_inf by at most growth_rate * dt (relative to max(1, ||u||_inf)).
  double growth_rate{0.0};
  /// Keep every save_every-th step (the final state is always kept).
  int save_every{1};

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("StepConfig: dt must be positive");
    if (!(newton_tol > 0.0)) throw std::invalid_argument("StepConfig: newton_tol must be positive");
    if (!(blowup_threshold > 0.0))
      throw std::invalid_argument("StepConfig: blowup_threshold must be positive");
    if (theta != 1.0) throw std::invalid_argument("StepConfig: only theta = 1 is supported");
    if (save_every < 1) throw std::invalid_argument("StepConfig: save_every must be >= 1");
  }
};

struct Status {
  enum class Kind { Completed, BlownUp, NewtonFailed };
  Kind kind{Kind::Completed};
  double time{0.0};

  [[nodiscard]] bool completed() const { return kind == Kind::Completed; }
  [[nodiscard]] bool blown_up() const { return kind == Kind::BlownUp; }
};

[[nodiscard]] inline std::string to_string(const Status& s) {
  switch (s.kind) {
    case Status::Kind::Completed: return "Completed";
    case Status::Kind::BlownUp: return "BlownUp(" + std::to_string(s.time) + ")";
    case Status::Kind::NewtonFailed: return "NewtonFailed(" + std::to_string(s.time) + ")";
  }
  return "?";
}

/// Raw per-step terms of the L^sigma energy balance, evaluated at the new
/// state v of a step u -> v of length dt:
///   rate   = (||v||_s^s - ||u||_s^s) / (s dt)
///   grad   = 2 (s-1)/s^2 * int |(|v|^(s/2))'|^2
///   absorb = ||v||_{s+p-1}^{s+p-1}
struct EnergySample {
  double t{};
  double dt{};
  double sigma{};
  double rate{};
  double grad{};
  double absorb{};

  [[nodiscard]] double residual(double A, double B) const { return rate + grad + A * absorb - B; }
};

struct NormSeries {
  double sigma{};
  std::vector<double> values;  // aligned with Trajectory::times
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Field> snapshots;
  std::vector<NormSeries> norm_series;
  std::vector<EnergySample> energy_series;
  Status status;

  [[nodiscard]] std::size_t size() const { return times.size(); }
  [[nodiscard]] const Field& final_state() const { return snapshots.back(); }

  [[nodiscard]] const NormSeries* norms_for(double sigma) const {
    for (const auto& s : norm_series)
      if (s.sigma == sigma) return &s;
    return nullptr;
  }

  void record(double t, Field u) {
    for (auto& s : norm_series)
      s.values.push_back(u.all_finite() ? lebesgue_norm(u, s.sigma)
                                        : std::numeric_limits<double>::infinity());
    times.push_back(t);
    snapshots.push_back(std::move(u));
  }
};

namespace detail {

template <Nonlinearity F, Nonlinearity G>
void implicit_residual(const Field& v, const Field& u, const F& f, const G& g, double dt,
                       std::span<double> out) {
  const std::size_t n = v.size();
  const double h = v.mesh().spacing();
  const double ih2 = 1.0 / (h * h);
  for (std::size_t i = 0; i < n; ++i) {
    double lap;
    if (i == 0)
      lap = 2.0 * (v[1] - v[0]) * ih2 + 2.0 * g.evaluate(v[0]).value / h;
    else if (i + 1 == n)
      lap = 2.0 * (v[n - 2] - v[n - 1]) * ih2 + 2.0 * g.evaluate(v[n - 1]).value / h;
    else
      lap = (v[i - 1] - 2.0 * v[i] + v[i + 1]) * ih2;
    out[i] = v[i] - u[i] - dt * (lap - f.evaluate(v[i]).value);
  }
}

template <Nonlinearity F, Nonlinearity G>
Tridiagonal implicit_jacobian(const Field& v, const F& f, const G& g, double dt) {
  const std::size_t n = v.size();
  const double h = v.mesh().spacing();
  const double k = dt / (h * h);
  Tridiagonal J(n);
  for (std::size_t i = 0; i < n; ++i) {
    J.diag[i] = 1.0 + 2.0 * k + dt * f.evaluate(v[i]).slope;
    if (i > 0) J.lower[i] = -k;
    if (i + 1 < n) J.upper[i] = -k;
  }
  J.upper[0] = -2.0 * k;
  J.lower[n - 1] = -2.0 * k;
  J.diag[0] -= 2.0 * dt * g.evaluate(v[0]).slope / h;
  J.diag[n - 1] -= 2.0 * dt * g.evaluate(v[n - 1]).slope / h;
  return J;
}

/// A tridiagonal Z-matrix is a nonsingular M-matrix iff every pivot of its
/// LU elimination is positive. Outside this regime the implicit equation can
/// have spurious roots and the step map loses its comparison property.
inline bool is_m_matrix(const Tridiagonal& J) {
  const std::size_t n = J.size();
  for (std::size_t i = 0; i < n; ++i)
    if ((i > 0 && J.lower[i] > 0.0) || (i + 1 < n && J.upper[i] > 0.0)) return false;
  double pivot = J.diag[0];
  if (!(pivot > 0.0)) return false;
  for (std::size_t i = 1; i < n; ++i) {
    pivot = J.diag[i] - J.lower[i] * J.upper[i - 1] / pivot;
    if (!(pivot > 0.0)) return false;
  }
  return true;
}

inline double max_abs(std::span<const double> r) {
  double m = 0.0;
  for (double x : r) {
    if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
    m = std::max(m, std::abs(x));
  }
  return m;
}

/// Damped Newton for one backward-Euler step of length dt. Empty on failure.
template <Nonlinearity F, Nonlinearity G>
std::optional<Field> implicit_solve(const Field& u, const F& f, const G& g, double dt,
                                    const StepConfig& cfg) {
  constexpr int kMaxDamping = 20;
  const std::size_t n = u.size();
  const double tol = cfg.newton_tol * std::max(1.0, sup_norm(u));
  Field v = u;
  std::vector<double> r(n), trial_r(n), delta(n);
  implicit_residual(v, u, f, g, dt, r);
  double rnorm = max_abs(r);
  for (int it = 0; it < cfg.newton_max; ++it) {
    if (rnorm <= tol) break;
    delta = r;
    solve_in_place(implicit_jacobian(v, f, g, dt), delta);
    double lambda = 1.0;
    bool improved = false;
    for (int k = 0; k <= kMaxDamping; ++k, lambda *= 0.5) {
      Field trial = v;
      for (std::size_t i = 0; i < n; ++i) trial[i] -= lambda * delta[i];
      implicit_residual(trial, u, f, g, dt, trial_r);
      const double tn = max_abs(trial_r);
      if (tn < rnorm) {
        v = std::move(trial);
        std::swap(r, trial_r);
        rnorm = tn;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  if (rnorm <= tol && is_m_matrix(implicit_jacobian(v, f, g, dt))) return v;
  return std::nullopt;
}

template <Nonlinearity F, Nonlinearity G>
std::optional<Field> step_with_halving(const Field& u, const F& f, const G& g, double dt,
                                       const StepConfig& cfg, int depth) {
  if (auto v = implicit_solve(u, f, g, dt, cfg)) return v;
  if (depth >= cfg.max_dt_halvings) return std::nullopt;
  auto mid = step_with_halving(u, f, g, 0.5 * dt, cfg, depth + 1);
  if (!mid) return std::nullopt;
  return step_with_halving(*mid, f, g, 0.5 * dt, cfg, depth + 1);
}

}  // namespace detail

/// One backward-Euler step of length dt (defaults to cfg.dt):
///   (v - u)/dt = Lap_h v - f(v),  ghost relation at both ends.
/// Falls back to up to cfg.max_dt_halvings recursive halvings before throwing.
template <Nonlinearity F, Nonlinearity G>
[[nodiscard]] Field step(const Field& u, const F& f, const G& g, const StepConfig& cfg,
                         std::optional<double> dt = std::nullopt, double t_now = 0.0) {
  const double h = dt.value_or(cfg.dt);
  if (auto v = detail::step_with_halving(u, f, g, h, cfg, 0)) return std::move(*v);
  throw NewtonFailed("Newton iteration did not converge after dt halvings", t_now);
}

namespace detail {

inline void start_trajectory(Trajectory& tr, const Field& u0, std::span<const double> sigmas) {
  for (double s : sigmas) tr.norm_series.push_back({s, {}});
  tr.record(0.0, u0);
}

template <Nonlinearity F>
void push_energy(Trajectory& tr, const Field& u, const Field& v, const F& f, double t, double dt) {
  const double p = f.growth_exponent();
  for (const auto& ns : tr.norm_series) {
    const double s = ns.sigma;
    EnergySample e;
    e.t = t;
    e.dt = dt;
    e.sigma = s;
    e.rate = (power_integral(v, s) - power_integral(u, s)) / (s * dt);
    e.grad = 2.0 * (s - 1.0) / (s * s) * grad_power_norm(v, s);
    e.absorb = power_integral(v, s + p - 1.0);
    tr.energy_series.push_back(e);
  }
}

}  // namespace detail

/// Integrates from u0 to T. Norms are recorded for every sigma in `sigmas` at
/// each saved time, energy terms at every step.
template <Nonlinearity F, Nonlinearity G>
[[nodiscard]] Trajectory integrate(const Field& u0, double T, const F& f, const G& g,
                                   const StepConfig& cfg, std::span<const double> sigmas = {}) {
  if (!(T > 0.0)) throw std::invalid_argument("integrate: T must be positive");
  cfg.validate();
  Trajectory tr;
  detail::start_trajectory(tr, u0, sigmas);

  const bool adaptive = cfg.growth_rate > 0.0;
  const double growth_limit = cfg.growth_rate * cfg.dt;
  const double min_dt = cfg.dt * 1e-12;
  Field u = u0;
  double t = 0.0;
  double dt_try = cfg.dt;
  long long k = 0;
  while (true) {
    // Fixed-step runs place the k-th state exactly at k * dt.
    const double remaining = T - t;
    if (remaining <= 1e-12 * T) break;
    double h = std::min(dt_try, remaining);
    if (remaining - h < 1e-9 * cfg.dt) h = remaining;

    Field v{u.mesh()};
    try {
      v = step(u, f, g, cfg, h, t);
    } catch (const NewtonFailed&) {
      if (adaptive && h > min_dt) {
        dt_try = 0.25 * h;
        continue;
      }
      tr.status = {Status::Kind::NewtonFailed, t};
      if (tr.times.back() != t) tr.record(t, u);
      return tr;
    }

    const double su = sup_norm(u);
    const double sv = v.all_finite() ? sup_norm(v) : std::numeric_limits<double>::infinity();
    if (adaptive && std::isfinite(sv)) {
      const double rho = (sv - su) / std::max(1.0, su);
      if (rho > 2.0 * growth_limit && h > min_dt) {
        dt_try = 0.5 * h;
        continue;
      }
      dt_try = rho > 0.0 ? std::min({cfg.dt, 2.0 * h, h * growth_limit / rho})
                         : std::min(cfg.dt, 2.0 * h);
    }

    ++k;
    const double t_new = (!adaptive && h == cfg.dt) ? static_cast<double>(k) * cfg.dt : t + h;
    if (std::isfinite(sv)) detail::push_energy(tr, u, v, f, t_new, h);
    t = t_new;
    u = std::move(v);

    if (!std::isfinite(sv) || sv > cfg.blowup_threshold) {
      tr.status = {Status::Kind::BlownUp, t};
      tr.record(t, u);
      return tr;
    }
    if (k % cfg.save_every == 0 || T - t <= 1e-12 * T) tr.record(t, u);
  }
  if (tr.times.back() != t) tr.record(t, u);
  tr.status = {Status::Kind::Completed, t};
  return tr;
}

/// U_t - U_xx = L U + A in (0, l),  dU/dn = K U + D on the boundary.
struct RobinLinearProblem {
  double L{0.0};
  double A{0.0};
  double K{0.0};
  double D{0.0};
  Field u0;
};

namespace detail {

/// Backward-Euler step matrix of the Robin problem for time step dt.
inline Tridiagonal robin_matrix(const RobinLinearProblem& prob, double dt) {
  const std::size_t n = prob.u0.size();
  const double h = prob.u0.mesh().spacing();
  const double k = dt / (h * h);
  Tridiagonal M(n);
  for (std::size_t i = 0; i < n; ++i) {
    M.diag[i] = 1.0 + 2.0 * k - dt * prob.L;
    if (i > 0) M.lower[i] = -k;
    if (i + 1 < n) M.upper[i] = -k;
  }
  M.upper[0] = -2.0 * k;
  M.lower[n - 1] = -2.0 * k;
  M.diag[0] -= 2.0 * dt * prob.K / h;
  M.diag[n - 1] -= 2.0 * dt * prob.K / h;
  return M;
}

}  // namespace detail

/// Smallest power of two m such that the Robin step matrix for dt/m is an
/// M-matrix, which makes the step positivity preserving.
[[nodiscard]] inline long long robin_substeps(const RobinLinearProblem& prob, double dt) {
  constexpr int kMaxSplits = 30;
  for (int s = 0; s <= kMaxSplits; ++s) {
    const long long m = 1LL << s;
    if (detail::is_m_matrix(detail::robin_matrix(prob, dt / static_cast<double>(m)))) return m;
  }
  throw std::invalid_argument("robin_substeps: no positive substep for this K and mesh");
}

/// Backward Euler for the linear Robin problem on the same time grid as a
/// fixed-step integrate() with the same cfg. Each step is split into
/// robin_substeps() equal substeps, so nonnegative data and sources give a
/// nonnegative solution.
[[nodiscard]] inline Trajectory solve_robin(const RobinLinearProblem& prob, double T,
                                            const StepConfig& cfg,
                                            std::span<const double> sigmas = {}) {
  if (!(T > 0.0)) throw std::invalid_argument("solve_robin: T must be positive");
  cfg.validate();
  if (!(cfg.dt < 1.0 / std::max(prob.L, 1.0)))
    throw std::invalid_argument("solve_robin: need dt < 1/max(L, 1)");
  const std::size_t n = prob.u0.size();
  const double h = prob.u0.mesh().spacing();

  struct Plan {
    Tridiagonal M;
    long long substeps;
    double dt;
  };
  auto plan = [&](double dt) {
    const long long m = robin_substeps(prob, dt);
    const double sub = dt / static_cast<double>(m);
    return Plan{detail::robin_matrix(prob, sub), m, sub};
  };
  const Plan full = plan(cfg.dt);

  Trajectory tr;
  detail::start_trajectory(tr, prob.u0, sigmas);
  Field u = prob.u0;
  double t = 0.0;
  long long k = 0;
  while (T - t > 1e-12 * T) {
    double dt = std::min(cfg.dt, T - t);
    if (T - t - dt < 1e-9 * cfg.dt) dt = T - t;
    const Plan partial = dt == cfg.dt ? Plan{Tridiagonal(0), 0, 0.0} : plan(dt);
    const Plan& P = dt == cfg.dt ? full : partial;
    for (long long s = 0; s < P.substeps; ++s) {
      for (std::size_t i = 0; i < n; ++i) u[i] += P.dt * prob.A;
      u[0] += 2.0 * P.dt * prob.D / h;
      u[n - 1] += 2.0 * P.dt * prob.D / h;
      solve_in_place(P.M, u.values());
    }
    ++k;
    t = dt == cfg.dt ? static_cast<double>(k) * cfg.dt : t + dt;
    if (k % cfg.save_every == 0 || T - t <= 1e-12 * T) tr.record(t, u);
  }
  tr.status = {Status::Kind::Completed, t};
  return tr;
}

struct BlowupVerdict {
  bool confirmed{false};
  std::vector<double> t_star_estimates;
};

/// Runs the factory once per dt of a decreasing schedule. Blow-up is confirmed
/// when every run crosses the threshold and successive t* gaps shrink by at
/// least `min_contraction`. Throws Inconclusive when the gaps grow.
[[nodiscard]] inline BlowupVerdict detect_blowup(
    const std::function<Trajectory(double dt)>& factory, std::span<const double> dt_schedule,
    double min_contraction = 1.5) {
  if (dt_schedule.size() < 3) throw std::invalid_argument("detect_blowup: need >= 3 time steps");
  for (std::size_t i = 1; i < dt_schedule.size(); ++i)
    if (!(dt_schedule[i] < dt_schedule[i - 1]))
      throw std::invalid_argument("detect_blowup: dt schedule must be decreasing");

  BlowupVerdict verdict;
  bool all_blew = true;
  for (double dt : dt_schedule) {
    const Trajectory tr = factory(dt);
    if (!tr.status.blown_up()) {
      all_blew = false;
      break;
    }
    verdict.t_star_estimates.push_back(tr.status.time);
  }
  if (!all_blew) return verdict;

  const auto& ts = verdict.t_star_estimates;
  verdict.confirmed = true;
  for (std::size_t i = 2; i < ts.size(); ++i) {
    const double prev = std::abs(ts[i - 1] - ts[i - 2]);
    const double next = std::abs(ts[i] - ts[i - 1]);
    if (next > prev) throw Inconclusive("t* estimates diverge under dt refinement");
    if (next * min_contraction > prev) verdict.confirmed = false;
  }
  return verdict;
}

}  // namespace bflux
