/// @file cascade.hpp
/// @brief Truncation cascade: solutions v^K of the problem with slope-clamped
/// flux g_K, their domination by the linear Robin supersolution, convergence
/// as K grows, and the L^sigma smoothing, energy and trace estimates they obey.

#pragma once

#include <bflux/error.hpp>
#include <bflux/grid.hpp>
#include <bflux/integrator.hpp>
#include <bflux/nonlinearity.hpp>

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace bflux {

/// Constants of the L^sigma dissipation estimates for one sigma.
///   energy:     (1/s) d/dt ||u||_s^s + 2(s-1)/s^2 |grad |u|^(s/2)|^2 + A ||u||_{s+p-1}^{s+p-1} <= B
///   ODE form:   y' + gamma y^((s+p-1)/s) <= beta,   y = ||u||_s^s
struct EnergyConstants {
  double sigma{};
  double A{};
  double B{};
  double beta{};
  double gamma{};
};

/// Jensen on (0, l): ||u||_{s+p-1}^{s+p-1} >= l^{-(p-1)/s} y^{(s+p-1)/s}, so the
/// energy inequality yields gamma = s A l^{-(p-1)/s} and beta = s B.
[[nodiscard]] inline EnergyConstants ode_constants(double sigma, double A, double B, double p,
                                                   double length) {
  return {sigma, A, B, sigma * B, sigma * A * std::pow(length, -(p - 1.0) / sigma)};
}

/// Right side of the smoothing estimate at time t > 0:
///   (beta/gamma)^(1/(s+p-1)) + (s/(gamma (p-1)))^(1/(p-1)) t^(-1/(p-1)).
[[nodiscard]] inline double smoothing_bound(double t, double p, const EnergyConstants& k) {
  const double s = k.sigma;
  return std::pow(k.beta / k.gamma, 1.0 / (s + p - 1.0)) +
         std::pow(s / (k.gamma * (p - 1.0)), 1.0 / (p - 1.0)) * std::pow(t, -1.0 / (p - 1.0));
}

/// Bound on ||u(t)||_r valid for all t >= 0: max(||u0||_r, (beta/gamma)^(1/(r+p-1))).
[[nodiscard]] inline double lr_bound(double u0_norm, double p, const EnergyConstants& k) {
  return std::max(u0_norm, std::pow(k.beta / k.gamma, 1.0 / (k.sigma + p - 1.0)));
}

template <Nonlinearity F>
[[nodiscard]] Trajectory solve_truncated(const Field& u0, const F& f, const PowerNonlinearity& g,
                                         double K, double T, const StepConfig& cfg,
                                         std::span<const double> sigmas = {}) {
  return integrate(u0, T, f, truncate(g, K), cfg, sigmas);
}

namespace detail {

inline StepConfig fixed_step(StepConfig cfg) {
  cfg.growth_rate = 0.0;
  return cfg;
}

inline void require_matched(const Trajectory& a, const Trajectory& b) {
  if (a.times.size() != b.times.size())
    throw std::invalid_argument("trajectories are not on matched time grids");
  for (std::size_t i = 0; i < a.times.size(); ++i)
    if (std::abs(a.times[i] - b.times[i]) > 1e-12 * std::max(1.0, std::abs(a.times[i])))
      throw std::invalid_argument("trajectories are not on matched time grids");
}

}  // namespace detail

/// Robin supersolution data for v^K: L = A0(f), A = |f(0)|, K, D = |g(0)|, U(0) = |u0|.
[[nodiscard]] inline RobinLinearProblem robin_supersolution(const Field& u0,
                                                            const PowerNonlinearity& f,
                                                            const PowerNonlinearity& g, double K) {
  Field a = u0;
  for (double& v : a.values()) v = std::abs(v);
  return {f.lower_slope_deficit(), std::abs(f.at_zero()), K, std::abs(g.at_zero()), std::move(a)};
}

/// max over saved (t, x) of |v^K(t, x)| - U(t, x); nonpositive up to solver
/// tolerance when the Robin solution dominates. Both run on the substep that
/// keeps the Robin step positive.
[[nodiscard]] inline double domination_check(const Field& u0, const PowerNonlinearity& f,
                                             const PowerNonlinearity& g, double K, double T,
                                             const StepConfig& cfg) {
  const RobinLinearProblem prob = robin_supersolution(u0, f, g, K);
  StepConfig fixed = detail::fixed_step(cfg);
  const long long m = robin_substeps(prob, fixed.dt);
  fixed.dt /= static_cast<double>(m);
  fixed.save_every *= static_cast<int>(m);
  const Trajectory v = solve_truncated(u0, f, g, K, T, fixed);
  const Trajectory U = solve_robin(prob, T, fixed);
  if (!v.status.completed()) throw Error("domination_check: truncated solve did not complete");
  detail::require_matched(v, U);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < v.size(); ++j)
    for (std::size_t i = 0; i < u0.size(); ++i)
      worst = std::max(worst, std::abs(v.snapshots[j][i]) - U.snapshots[j][i]);
  return worst;
}

struct GapEntry {
  double K_low{};
  double K_high{};
  double sigma{};
  double gap{};
};

struct CascadeResult {
  std::vector<double> k_schedule;
  std::vector<Trajectory> trajectories;
  std::vector<GapEntry> cauchy_gaps;  // ordered by K pair, then sigma
  bool monotone{false};
  Trajectory limit;

  [[nodiscard]] std::vector<double> gaps_for(double sigma) const {
    std::vector<double> out;
    for (const auto& g : cauchy_gaps)
      if (g.sigma == sigma) out.push_back(g.gap);
    return out;
  }
};

/// +1: lower <= upper + tol at every saved (t, x); -1: upper <= lower + tol.
[[nodiscard]] inline bool ordered(const Trajectory& lower, const Trajectory& upper, double tol = 1e-9) {
  detail::require_matched(lower, upper);
  for (std::size_t j = 0; j < lower.size(); ++j)
    for (std::size_t i = 0; i < lower.snapshots[j].size(); ++i)
      if (lower.snapshots[j][i] > upper.snapshots[j][i] + tol) return false;
  return true;
}

/// sup over saved t in [t_lo, t_hi] of ||a(t) - b(t)||_sigma.
[[nodiscard]] inline double sup_distance(const Trajectory& a, const Trajectory& b, double sigma,
                                         double t_lo, double t_hi) {
  detail::require_matched(a, b);
  double worst = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a.times[j] < t_lo - 1e-12 || a.times[j] > t_hi + 1e-12) continue;
    worst = std::max(worst, lebesgue_norm(a.snapshots[j] - b.snapshots[j], sigma));
  }
  return worst;
}

struct KLimitOptions {
  /// Successive gaps must satisfy gap_{i+1} * contraction <= gap_i ...
  double contraction{1.0};
  /// ... unless gap_{i+1} is below this absolute floor.
  double gap_floor{1e-10};
  bool parallel{true};
};

/// Solves the truncated problem for every K of an increasing schedule and
/// measures the Cauchy gaps on [epsilon, T]. The finest-K trajectory stands
/// in for the limit solution.
template <Nonlinearity F>
[[nodiscard]] CascadeResult k_limit(const Field& u0, const F& f, const PowerNonlinearity& g,
                                    std::span<const double> k_schedule, double epsilon, double T,
                                    std::span<const double> sigmas, const StepConfig& cfg,
                                    const KLimitOptions& opt = {}) {
  if (k_schedule.size() < 3) throw std::invalid_argument("k_limit: schedule needs >= 3 entries");
  for (std::size_t i = 1; i < k_schedule.size(); ++i)
    if (!(k_schedule[i] > k_schedule[i - 1]))
      throw std::invalid_argument("k_limit: schedule must be strictly increasing");
  if (!(epsilon > 0.0 && epsilon < T)) throw std::invalid_argument("k_limit: need 0 < epsilon < T");

  const StepConfig fixed = detail::fixed_step(cfg);
  CascadeResult res;
  res.k_schedule.assign(k_schedule.begin(), k_schedule.end());
  std::vector<double> sig(sigmas.begin(), sigmas.end());

  auto solve_one = [&, sig](double K) { return solve_truncated(u0, f, g, K, T, fixed, sig); };
  if (opt.parallel) {
    std::vector<std::future<Trajectory>> jobs;
    for (double K : k_schedule) jobs.push_back(std::async(std::launch::async, solve_one, K));
    for (auto& j : jobs) res.trajectories.push_back(j.get());
  } else {
    for (double K : k_schedule) res.trajectories.push_back(solve_one(K));
  }
  for (const auto& tr : res.trajectories)
    if (!tr.status.completed()) throw Error("k_limit: truncated solve ended with " + to_string(tr.status));

  for (std::size_t i = 0; i + 1 < k_schedule.size(); ++i)
    for (double s : sig)
      res.cauchy_gaps.push_back({k_schedule[i], k_schedule[i + 1], s,
                                 sup_distance(res.trajectories[i], res.trajectories[i + 1], s,
                                              epsilon, T)});

  for (double s : sig) {
    const auto gaps = res.gaps_for(s);
    for (std::size_t i = 1; i < gaps.size(); ++i)
      if (gaps[i] > opt.gap_floor && gaps[i] * opt.contraction > gaps[i - 1])
        throw ScheduleNotCauchy("k_limit: Cauchy gaps do not decrease along the K schedule");
  }

  double lo = u0[0], hi = u0[0];
  for (double v : u0.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double f0 = f.evaluate(0.0).value;
  const double g0 = g.evaluate(0.0).value;
  const bool increasing = lo >= 0.0 && f0 <= 0.0 && g0 >= 0.0;
  const bool decreasing = hi <= 0.0 && f0 >= 0.0 && g0 <= 0.0;
  if (increasing || decreasing) {
    res.monotone = true;
    for (std::size_t i = 0; i + 1 < res.trajectories.size() && res.monotone; ++i)
      res.monotone = increasing ? ordered(res.trajectories[i], res.trajectories[i + 1])
                                : ordered(res.trajectories[i + 1], res.trajectories[i]);
  }
  res.limit = res.trajectories.back();
  return res;
}

/// Geometric schedule K0 * 2^i, i = 0..count-1, with K0 = 2 g'(1 + ||u0||_inf).
[[nodiscard]] inline std::vector<double> default_k_schedule(const PowerNonlinearity& g,
                                                            const Field& u0, int count = 6) {
  const double K0 = 2.0 * std::max(g.evaluate(1.0 + sup_norm(u0)).slope, g.d + 1.0);
  std::vector<double> ks;
  for (int i = 0; i < count; ++i) ks.push_back(K0 * std::ldexp(1.0, i));
  return ks;
}

/// max over t >= epsilon of ||v^K(t)||_inf compared with the cut point b_K.
[[nodiscard]] inline bool truncation_inactive_after(const Trajectory& tr,
                                                    const TruncatedNonlinearity& gK,
                                                    double epsilon) {
  for (std::size_t j = 0; j < tr.size(); ++j) {
    if (tr.times[j] < epsilon) continue;
    for (double v : tr.snapshots[j].values())
      if (v >= gK.upper_cut() || v <= gK.lower_cut()) return false;
  }
  return true;
}

struct ResidualSeries {
  std::vector<double> times;
  std::vector<double> residuals;

  [[nodiscard]] double worst() const {
    double w = -std::numeric_limits<double>::infinity();
    for (double r : residuals) w = std::max(w, r);
    return w;
  }
};

/// ||u(t)||_sigma minus the smoothing bound at every saved t in [t_lo, t_hi], t > 0.
[[nodiscard]] inline ResidualSeries smoothing_bound_check(const Trajectory& tr, double p,
                                                          const EnergyConstants& k, double t_lo,
                                                          double t_hi) {
  ResidualSeries out;
  for (std::size_t j = 0; j < tr.size(); ++j) {
    const double t = tr.times[j];
    if (t <= 0.0 || t < t_lo - 1e-12 || t > t_hi + 1e-12) continue;
    out.times.push_back(t);
    out.residuals.push_back(lebesgue_norm(tr.snapshots[j], k.sigma) - smoothing_bound(t, p, k));
  }
  return out;
}

/// ||u(t)||_r minus max(||u0||_r, (beta_r/gamma_r)^(1/(r+p-1))) for every saved t >= 0.
[[nodiscard]] inline ResidualSeries lr_bound_check(const Trajectory& tr, double p,
                                                   const EnergyConstants& k) {
  ResidualSeries out;
  const double bound = lr_bound(lebesgue_norm(tr.snapshots.front(), k.sigma), p, k);
  for (std::size_t j = 0; j < tr.size(); ++j) {
    out.times.push_back(tr.times[j]);
    out.residuals.push_back(lebesgue_norm(tr.snapshots[j], k.sigma) - bound);
  }
  return out;
}

/// Least-squares slope of log ||u(t)||_sigma against log t over saved t in the window.
[[nodiscard]] inline double decay_exponent_fit(const Trajectory& tr, double sigma, double t_lo,
                                               double t_hi) {
  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < tr.size(); ++j) {
    const double t = tr.times[j];
    if (t <= 0.0 || t < t_lo || t > t_hi) continue;
    const double nrm = lebesgue_norm(tr.snapshots[j], sigma);
    if (!(nrm > 0.0)) continue;
    xs.push_back(std::log(t));
    ys.push_back(std::log(nrm));
  }
  if (xs.size() < 8) throw InsufficientSamples("decay_exponent_fit: need >= 8 samples in window");
  const double m = static_cast<double>(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

/// Worst discrete energy residual over all steps for one sigma.
[[nodiscard]] inline double energy_residual_monitor(const Trajectory& tr, const EnergyConstants& k) {
  double worst = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& e : tr.energy_series) {
    if (e.sigma != k.sigma) continue;
    worst = std::max(worst, e.residual(k.A, k.B));
    any = true;
  }
  if (!any) return -k.B;
  return worst;
}

/// Tightest B making the energy residual nonpositive on the given runs.
[[nodiscard]] inline double tightest_energy_source(std::span<const Trajectory> runs, double sigma,
                                                   double A) {
  double worst = 0.0;
  for (const auto& tr : runs)
    for (const auto& e : tr.energy_series)
      if (e.sigma == sigma) worst = std::max(worst, e.rate + e.grad + A * e.absorb);
  return worst;
}

namespace detail {

/// Trapezoid time integral of trace_norm over saved times in [t_lo, t_hi].
inline double trace_time_integral(const Trajectory& tr, double sigma, double t_lo, double t_hi) {
  double acc = 0.0;
  bool have_prev = false;
  double t_prev = 0.0, v_prev = 0.0;
  for (std::size_t j = 0; j < tr.size(); ++j) {
    const double t = tr.times[j];
    if (t < t_lo - 1e-12 || t > t_hi + 1e-12) continue;
    const double v = trace_norm(tr.snapshots[j], sigma);
    if (have_prev) acc += 0.5 * (t - t_prev) * (v + v_prev);
    t_prev = t;
    v_prev = v;
    have_prev = true;
  }
  return acc;
}

inline std::size_t first_index_at_or_after(const Trajectory& tr, double t) {
  for (std::size_t j = 0; j < tr.size(); ++j)
    if (tr.times[j] >= t - 1e-12) return j;
  return tr.size() - 1;
}

}  // namespace detail

struct TraceBoundReport {
  double lhs{};
  double rhs{};
  bool satisfied{};
};

/// int_eps^T int_Gamma |u|^sigma  <=  C T + ||u(eps)||_sigma^sigma.
[[nodiscard]] inline TraceBoundReport trace_bound_check(const Trajectory& tr, double sigma,
                                                        double epsilon, double T, double C) {
  if (!(epsilon < T)) throw std::invalid_argument("trace_bound_check: need epsilon < T");
  const std::size_t j = detail::first_index_at_or_after(tr, epsilon);
  const double lhs = detail::trace_time_integral(tr, sigma, tr.times[j], T);
  const double rhs = C * T + power_integral(tr.snapshots[j], sigma);
  return {lhs, rhs, lhs <= rhs + kInequalitySlack};
}

/// Tightest C for the trace bound on the given runs.
[[nodiscard]] inline double tightest_trace_constant(std::span<const Trajectory> runs, double sigma,
                                                    double epsilon, double T) {
  double worst = 0.0;
  for (const auto& tr : runs) {
    const auto r = trace_bound_check(tr, sigma, epsilon, T, 0.0);
    worst = std::max(worst, (r.lhs - r.rhs) / T);
  }
  return worst;
}

/// ||v(t_j) - u0||_{L^alpha(Omega_1)} with Omega_1 the central subinterval
/// of relative length interior_fraction. Requested times snap to the first
/// saved time at or after them.
[[nodiscard]] inline std::vector<double> initial_continuity_check(
    const Trajectory& limit, const Field& u0, double alpha, double interior_fraction,
    std::span<const double> times) {
  if (!(alpha >= 1.0)) throw std::invalid_argument("initial_continuity_check: alpha must be >= 1");
  if (!(interior_fraction > 0.0 && interior_fraction < 1.0))
    throw std::invalid_argument("initial_continuity_check: interior_fraction must lie in (0, 1)");
  const Mesh1D& mesh = u0.mesh();
  const double half = 0.5 * interior_fraction * mesh.length();
  const double lo = 0.5 * mesh.length() - half, hi = 0.5 * mesh.length() + half;
  // Trapezoid over the nodes inside [lo, hi].
  std::size_t i0 = mesh.size(), i1 = 0;
  for (std::size_t i = 0; i < mesh.size(); ++i)
    if (mesh.node(i) >= lo - 1e-12 && mesh.node(i) <= hi + 1e-12) {
      i0 = std::min(i0, i);
      i1 = std::max(i1, i);
    }
  std::vector<double> out;
  for (double t : times) {
    const Field& v = limit.snapshots[detail::first_index_at_or_after(limit, t)];
    double acc = 0.0;
    for (std::size_t i = i0; i <= i1; ++i) {
      const double w = (i == i0 || i == i1) ? 0.5 * mesh.spacing() : mesh.spacing();
      acc += w * std::pow(std::abs(v[i] - u0[i]), alpha);
    }
    out.push_back(std::pow(acc, 1.0 / alpha));
  }
  return out;
}

/// Trace weight delta = 4(r-1)/(r^2 K) at which K times the boundary term is
/// absorbed by the gradient term of the L^r difference estimate.
[[nodiscard]] inline double gronwall_delta(double r, double K) {
  return 4.0 * (r - 1.0) / (r * r * K);
}

/// Rate in d/dt ||v-w||_r^r <= C ||v-w||_r^r for two solutions of the
/// K-truncated problem: C = r (A0 + K C_delta), with A0 bounding -f' from above
/// and C_delta the trace constant at delta = gronwall_delta(r, K).
[[nodiscard]] inline double gronwall_constant(double r, double K, double A0, double c_delta) {
  return r * (A0 + K * c_delta);
}

/// Largest observed ln(||v(t)-w(t)||_r^r / ||v(0)-w(0)||_r^r) / t over saved t > 0.
[[nodiscard]] inline double gronwall_rate(const Trajectory& v, const Trajectory& w, double r) {
  detail::require_matched(v, w);
  const double d0 = power_integral(v.snapshots.front() - w.snapshots.front(), r);
  if (!(d0 > 0.0)) return 0.0;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j < v.size(); ++j) {
    const double d = power_integral(v.snapshots[j] - w.snapshots[j], r);
    worst = std::max(worst, std::log(std::max(d, 1e-300) / d0) / v.times[j]);
  }
  return worst;
}

/// max over saved t of ||v(t)-w(t)||_r^r - e^{C t} ||v(0)-w(0)||_r^r.
[[nodiscard]] inline double gronwall_excess(const Trajectory& v, const Trajectory& w, double r,
                                            double C) {
  detail::require_matched(v, w);
  const double d0 = power_integral(v.snapshots.front() - w.snapshots.front(), r);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double d = power_integral(v.snapshots[j] - w.snapshots[j], r);
    worst = std::max(worst, d - std::exp(C * v.times[j]) * d0);
  }
  return worst;
}

}  // namespace bflux
