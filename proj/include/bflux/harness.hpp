/// @file harness.hpp
/// @brief Experiment presets: each one runs its pipeline, writes CSVs into the
/// output directory and returns a manifest of named checks.

#pragma once

#include <bflux/asymptotics.hpp>
#include <bflux/cascade.hpp>
#include <bflux/config.hpp>
#include <bflux/data.hpp>
#include <bflux/integrator.hpp>
#include <bflux/output.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <future>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace bflux {

namespace fs = std::filesystem;

inline constexpr double kDominationTol = 1e-6;
inline constexpr double kOrderTol = 1e-9;

[[nodiscard]] inline StepConfig step_config(const ExperimentConfig& c) {
  StepConfig s;
  s.dt = c.dt;
  s.growth_rate = c.growth_rate;
  s.save_every = c.save_every;
  return s;
}

[[nodiscard]] inline fs::path output_root(const ExperimentConfig& c) { return fs::path(c.output_dir); }

[[nodiscard]] inline fs::path constants_path(const ExperimentConfig& c) {
  const fs::path p(c.constants_file);
  return p.is_absolute() ? p : output_root(c) / p;
}

namespace detail {

inline fs::path ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create '" + p.string() + "': " + ec.message());
  return p;
}

inline fs::path run_dir(const ExperimentConfig& c, std::size_t i) {
  std::ostringstream os;
  os << "run_" << std::setw(3) << std::setfill('0') << i;
  return ensure_dir(output_root(c) / os.str());
}

/// Times `body`; a numerical Error thrown inside becomes a failed check named `name`.
inline void stage(RunManifest& m, const std::string& name, const std::string& property,
                  const std::function<void()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    m.add({name, property, false, 0.0, 0.0, e.what()});
  }
  m.wall_times.emplace_back(name,
                            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

/// Solves every datum concurrently; results keep the input order.
template <typename Fn>
auto parallel_map(std::size_t count, Fn fn) {
  using R = decltype(fn(std::size_t{}));
  std::vector<std::future<R>> jobs;
  for (std::size_t i = 0; i < count; ++i) jobs.push_back(std::async(std::launch::async, fn, i));
  std::vector<R> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

inline std::vector<Trajectory> run_suite(const ExperimentConfig& c,
                                         const std::vector<DataSpec>& suite) {
  const Mesh1D mesh = c.mesh();
  const StepConfig sc = step_config(c);
  const auto sig = c.sigmas();
  return parallel_map(suite.size(), [&](std::size_t i) {
    return integrate(suite[i].build(mesh), c.T, c.f, c.g, sc, sig);
  });
}

/// Flags blow-ups; returns false if any run did not complete.
inline bool require_bounded(RunManifest& m, const std::vector<Trajectory>& runs,
                            const std::vector<DataSpec>& suite) {
  bool ok = true;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].status.completed()) continue;
    ok = false;
    if (runs[i].status.blown_up()) m.unexpected_blowup = true;
    m.add({"bounded:" + suite[i].text, "dissipative balance keeps solutions bounded", false,
           runs[i].status.time, 0.0, to_string(runs[i].status)});
  }
  return ok;
}

inline EnergyConstants constants_for(const ConstantsTable& t, const std::string& preset,
                                     double sigma) {
  const auto& r = t.at(preset, sigma);
  return {sigma, r.A, r.B, r.beta, r.gamma};
}

inline std::string sigma_tag(double s) {
  std::ostringstream os;
  os << s;
  return os.str();
}

}  // namespace detail

/// Calibration phase: A = c_f / 2 for every sigma, B and the trace constant
/// set to `safety` times the tightest values over the calibration suite.
inline void run_calibrate(const ExperimentConfig& c, RunManifest& m) {
  std::vector<Trajectory> runs;
  detail::stage(m, "calibration_runs", "calibration runs stay bounded", [&] {
    runs = detail::run_suite(c, c.calibration_data);
  });
  if (runs.empty() || !detail::require_bounded(m, runs, c.calibration_data)) return;

  ConstantsTable table = ConstantsTable::load(constants_path(c));
  const double A = 0.5 * c.f.c;
  for (double s : c.sigmas()) {
    const double B = c.calibrate.safety * tightest_energy_source(runs, s, A);
    const double C = c.calibrate.safety * tightest_trace_constant(runs, s, c.epsilon, c.T);
    const EnergyConstants k = ode_constants(s, A, B, c.f.p, c.length);
    table.put(c.calibrate.target, s, {A, B, k.beta, k.gamma, C});
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& tr : runs) worst = std::max(worst, energy_residual_monitor(tr, k));
    m.add({"calibration_energy:sigma=" + detail::sigma_tag(s),
           "calibrated constants satisfy the energy inequality on their own suite", worst <= 0.0,
           worst, 0.0, ""});
  }
  table.save(constants_path(c));
}

/// Hold-out verification of the energy inequality, the L^sigma smoothing
/// estimate and the L^r bound with constants from the calibration phase.
inline void run_smoothing(const ExperimentConfig& c, RunManifest& m) {
  const ConstantsTable table = ConstantsTable::load(constants_path(c));
  const auto sig = c.sigmas();
  std::vector<EnergyConstants> ks;
  for (double s : sig) ks.push_back(detail::constants_for(table, c.calibrate.target, s));

  std::vector<Trajectory> runs;
  detail::stage(m, "holdout_runs", "hold-out runs stay bounded", [&] {
    runs = detail::run_suite(c, c.data);
  });
  if (runs.empty() || !detail::require_bounded(m, runs, c.data)) return;

  for (std::size_t i = 0; i < runs.size(); ++i) {
    const fs::path dir = detail::run_dir(c, i);
    write_norms_csv(dir / "norms.csv", runs[i]);
    write_energy_csv(dir / "energy.csv", runs[i], ks);
    write_snapshots_csv(dir / "snapshots.csv", runs[i]);
  }

  bool shared_A = true;
  for (const auto& k : ks) shared_A = shared_A && k.A == ks.front().A;
  m.add({"energy_A_shared", "absorption constant A is independent of sigma", shared_A,
         ks.front().A, 0.0, ""});

  for (const auto& k : ks) {
    const std::string tag = "sigma=" + detail::sigma_tag(k.sigma);
    double e = -std::numeric_limits<double>::infinity();
    double s = e;
    for (const auto& tr : runs) {
      e = std::max(e, energy_residual_monitor(tr, k));
      s = std::max(s, smoothing_bound_check(tr, c.f.p, k, c.smoothing.t_lo, c.T).worst());
    }
    m.add({"energy:" + tag, "discrete energy inequality holds at every step",
           e <= c.smoothing.energy_tol, e, c.smoothing.energy_tol, ""});
    m.add({"smoothing:" + tag, "L^sigma norm obeys the smoothing bound C1 + C2 t^(-1/(p-1))",
           s <= 0.0, s, 0.0, ""});
    if (k.sigma == c.r) {
      double w = -std::numeric_limits<double>::infinity();
      for (const auto& tr : runs) w = std::max(w, lr_bound_check(tr, c.f.p, k).worst());
      m.add({"lr_bound", "L^r norm stays below max(||u0||_r, equilibrium level)", w <= 1e-12, w,
             1e-12, ""});
    }
  }

  if (c.smoothing.decay_hi > c.smoothing.decay_lo) {
    detail::stage(m, "decay_fit", "L^r norm decays like t^(-1/(p-1)) for large data", [&] {
      const double fit = decay_exponent_fit(runs.front(), c.r, c.smoothing.decay_lo,
                                            c.smoothing.decay_hi);
      const double expected = -1.0 / (c.f.p - 1.0);
      const double rel = std::abs(fit - expected) / std::abs(expected);
      m.add({"decay_fit", "L^r norm decays like t^(-1/(p-1)) for large data",
             rel <= c.smoothing.decay_tol, fit, c.smoothing.decay_tol, ""});
    });
  }
}

/// Truncation cascade on each datum: Cauchy gaps in K, K-monotonicity,
/// Robin domination, initial-time continuity, trace bound and Gronwall stability.
inline void run_cascade(const ExperimentConfig& c, RunManifest& m) {
  const Mesh1D mesh = c.mesh();
  const StepConfig sc = step_config(c);
  const auto sig = c.sigmas();
  const ConstantsTable table = ConstantsTable::load(constants_path(c));

  for (std::size_t i = 0; i < c.data.size(); ++i) {
    const Field u0 = c.data[i].build(mesh);
    const std::string tag = c.data[i].text;
    const std::vector<double> ks =
        c.cascade.k_schedule.empty() ? default_k_schedule(c.g, u0) : c.cascade.k_schedule;
    const fs::path dir = detail::run_dir(c, i);

    CascadeResult res;
    bool have = false;
    detail::stage(m, "k_limit:" + tag, "truncated solutions form a Cauchy family in K", [&] {
      res = k_limit(u0, c.f, c.g, ks, c.epsilon, c.T, sig, sc);
      have = true;
      m.add({"k_limit:" + tag, "truncated solutions form a Cauchy family in K", true,
             res.cauchy_gaps.empty() ? 0.0 : res.cauchy_gaps.back().gap, 0.0, ""});
    });
    if (!have) continue;
    write_cascade_csv(dir / "cascade.csv", res);
    write_norms_csv(dir / "norms.csv", res.limit);
    write_snapshots_csv(dir / "snapshots.csv", res.limit);

    double lo = u0[0], hi = u0[0];
    for (double v : u0.values()) lo = std::min(lo, v), hi = std::max(hi, v);
    const double f0 = c.f.at_zero(), g0 = c.g.at_zero();
    if ((lo >= 0.0 && f0 <= 0.0 && g0 >= 0.0) || (hi <= 0.0 && f0 >= 0.0 && g0 <= 0.0))
      m.add({"k_monotone:" + tag, "truncated solutions are monotone in K", res.monotone,
             res.monotone ? 1.0 : 0.0, 0.0, ""});

    detail::stage(m, "domination:" + tag, "Robin problem dominates the truncated solutions", [&] {
      double worst = -std::numeric_limits<double>::infinity();
      for (double K : ks) worst = std::max(worst, domination_check(u0, c.f, c.g, K, c.T, sc));
      m.add({"domination:" + tag, "Robin problem dominates the truncated solutions",
             worst <= kDominationTol, worst, kDominationTol, ""});
    });

    std::vector<double> times;
    for (int j = c.cascade.continuity_j_lo; j <= c.cascade.continuity_j_hi; ++j)
      if (std::ldexp(1.0, -j) <= c.T) times.push_back(std::ldexp(1.0, -j));
    if (times.size() >= 2) {
      const auto d = initial_continuity_check(res.limit, u0, c.cascade.alpha,
                                              c.cascade.interior_fraction, times);
      bool ok = true;
      for (std::size_t j = 1; j < d.size(); ++j) ok = ok && (d[j] < d[j - 1] || d[j - 1] <= 1e-12);
      m.add({"continuity:" + tag, "limit solution approaches u0 in L^alpha as t -> 0", ok,
             d.back(), 0.0, ""});
    }

    for (double s : sig) {
      const std::string key = c.calibrate.target;
      if (!table.empty()) {
        double C = 0.0;
        try {
          C = table.at(key, s).trace_C;
        } catch (const ConfigError&) {
          continue;
        }
        const auto rep = trace_bound_check(res.limit, s, c.epsilon, c.T, C);
        m.add({"trace:" + tag + ":sigma=" + detail::sigma_tag(s),
               "boundary trace integral is controlled by the interior norm", rep.satisfied,
               rep.lhs - rep.rhs, kInequalitySlack, ""});
      }
    }
  }

  if (c.cascade.gronwall_pairs > 1) {
    detail::stage(m, "gronwall", "truncated problem is Lipschitz stable in L^r", [&] {
      const double K = c.cascade.gronwall_K;
      const int pairs = c.cascade.gronwall_pairs;
      const auto runs = detail::parallel_map(static_cast<std::size_t>(pairs), [&](std::size_t j) {
        const auto seed = c.seeds.empty() ? 1ULL : c.seeds[j % c.seeds.size()];
        const Field a = data::random_smooth(mesh, 2.0, seed * 1000 + 2 * j);
        const Field b = data::random_smooth(mesh, 2.0, seed * 1000 + 2 * j + 1);
        return std::pair{solve_truncated(a, c.f, c.g, K, c.T, sc),
                         solve_truncated(b, c.f, c.g, K, c.T, sc)};
      });
      const double delta = gronwall_delta(c.r, K);
      const auto corpus = trig_corpus(mesh, 64, c.seeds.empty() ? 1ULL : c.seeds.front());
      const double C =
          gronwall_constant(c.r, K, c.f.lower_slope_deficit(), calibrate_trace(corpus, c.r, delta));
      double worst = -std::numeric_limits<double>::infinity();
      for (const auto& [v, w] : runs) worst = std::max(worst, gronwall_excess(v, w, c.r, C));
      m.add({"gronwall", "truncated problem is Lipschitz stable in L^r", worst <= 1e-12, worst,
             1e-12, "C(K) = " + detail::sigma_tag(C)});
    });
  }
}

/// Sweep over (p, q): dissipative points must stay bounded; an optional
/// explosive point is checked for blow-up with a converging t*.
inline void run_dichotomy(const ExperimentConfig& c, RunManifest& m) {
  const Mesh1D mesh = c.mesh();
  const StepConfig sc = step_config(c);
  struct Point {
    double p, q;
    Balance balance;
    Status status;
    double sup;
  };
  std::vector<std::pair<double, double>> grid;
  for (double p : c.dichotomy.p_list)
    for (double q : c.dichotomy.q_list) grid.emplace_back(p, q);

  std::vector<Point> points;
  detail::stage(m, "sweep", "dissipative balance keeps solutions bounded", [&] {
    points = detail::parallel_map(grid.size(), [&](std::size_t i) {
      const PowerNonlinearity f{c.f.c, grid[i].first, c.f.d, c.f.e};
      const PowerNonlinearity g{c.g.c, grid[i].second, c.g.d, c.g.e};
      const Balance b = classify_balance(f, g, 1).classification;
      const Trajectory tr = integrate(data::flat(mesh, c.dichotomy.level), c.T, f, g, sc);
      return Point{grid[i].first, grid[i].second, b, tr.status, sup_norm(tr.final_state())};
    });
  });

  CsvFile csv(output_root(c) / "dichotomy.csv", "p,q,balance,outcome,t_end,sup_final");
  std::size_t dissipative_blowups = 0;
  for (const auto& pt : points) {
    csv.row(pt.p, pt.q, to_string(pt.balance), to_string(pt.status), pt.status.time, pt.sup);
    if (pt.balance == Balance::Dissipative && !pt.status.completed()) {
      ++dissipative_blowups;
      if (pt.status.blown_up()) m.unexpected_blowup = true;
    }
  }
  if (!points.empty())
    m.add({"dissipative_bounded", "dissipative balance keeps solutions bounded",
           dissipative_blowups == 0, static_cast<double>(dissipative_blowups), 0.0, ""});

  if (c.dichotomy.confirm_p > 0.0) {
    detail::stage(m, "blowup_confirmed", "explosive balance blows up in finite time", [&] {
      const PowerNonlinearity f{c.f.c, c.dichotomy.confirm_p, c.f.d, c.f.e};
      const PowerNonlinearity g{c.g.c, c.dichotomy.confirm_q, c.g.d, c.g.e};
      const Field u0 = data::flat(mesh, c.dichotomy.level);
      const BlowupVerdict v = detect_blowup(
          [&](double dt) {
            StepConfig s = sc;
            s.dt = dt;
            return integrate(u0, c.T, f, g, s);
          },
          c.dichotomy.dt_schedule);
      CsvFile bc(output_root(c) / "blowup.csv", "dt,t_star");
      for (std::size_t i = 0; i < v.t_star_estimates.size(); ++i)
        bc.row(c.dichotomy.dt_schedule[i], v.t_star_estimates[i]);
      m.add({"blowup_confirmed", "explosive balance blows up in finite time", v.confirmed,
             v.t_star_estimates.empty() ? 0.0 : v.t_star_estimates.back(), 0.0, ""});
    });
  }
}

/// Absorbing-level probe, extremal equilibria from +-M and the order of
/// Newton-found equilibria between them.
inline void run_equilibria(const ExperimentConfig& c, RunManifest& m) {
  const Mesh1D mesh = c.mesh();
  const StepConfig sc = step_config(c);
  double M = c.equilibria.M;

  if (!c.equilibria.absorbing_levels.empty()) {
    detail::stage(m, "absorbing", "late-time sup norm is uniform in the initial data", [&] {
      std::vector<Field> data_set;
      for (double level : c.equilibria.absorbing_levels) data_set.push_back(data::flat(mesh, level));
      AbsorbingReport rep;
      try {
        rep = absorbing_probe(data_set, c.epsilon, c.T, c.f, c.g, sc);
      } catch (const BlownUp&) {
        m.unexpected_blowup = true;
        throw;
      }
      double lo = std::numeric_limits<double>::infinity();
      for (double s : rep.sup_norms) lo = std::min(lo, s);
      const double ratio = lo > 0.0 ? rep.uniform_bound / lo : 1.0;
      CsvFile csv(output_root(c) / "absorbing.csv", "level,sup_after_epsilon");
      for (std::size_t i = 0; i < rep.sup_norms.size(); ++i)
        csv.row(c.equilibria.absorbing_levels[i], rep.sup_norms[i]);
      m.add({"absorbing_uniform", "late-time sup norm is uniform in the initial data",
             ratio < c.equilibria.absorbing_factor, ratio, c.equilibria.absorbing_factor, ""});
      if (M == 0.0) M = 2.0 * std::max(rep.uniform_bound, 1e-3);
    });
  }
  if (!(M > 0.0)) return;

  detail::stage(m, "extremal", "extremal equilibria bound every equilibrium", [&] {
    ExtremalPair pair = extremal_equilibria(mesh, M, c.equilibria.T_max, c.equilibria.settle_tol,
                                            c.f, c.g, sc);
    if (c.equilibria.refine_n > 0) {
      const Mesh1D fine(c.equilibria.refine_n, c.length);
      pair.phi_min = refine(pair.phi_min, fine, c.f, c.g);
      pair.phi_max = refine(pair.phi_max, fine, c.f, c.g);
    }
    const Mesh1D& eq_mesh = pair.phi_max.field.mesh();
    std::vector<Equilibrium> found;
    std::string skipped;
    for (double guess : c.equilibria.guesses) {
      try {
        found.push_back(solve_equilibrium(Field(eq_mesh, guess), c.f, c.g));
      } catch (const NoConvergence&) {
        skipped += (skipped.empty() ? "" : ",") + detail::sigma_tag(guess);
      }
    }
    write_equilibria_csv(output_root(c) / "equilibria.csv", pair, found);

    const double res = std::max(pair.phi_min.residual, pair.phi_max.residual);
    m.add({"extremal_residual", "extremal states solve the stationary problem",
           res <= kEquilibriumTol, res, kEquilibriumTol, ""});
    m.add({"monotone_from_above", "trajectory from +M decreases monotonically",
           pair.monotone_from_above, pair.M, 0.0, ""});
    m.add({"monotone_from_below", "trajectory from -M increases monotonically",
           pair.monotone_from_below, pair.M, 0.0, ""});
    m.add({"equilibria_order", "every equilibrium lies between phi_min and phi_max",
           equilibria_order_check(found, pair, kOrderTol), static_cast<double>(found.size()),
           kOrderTol, skipped.empty() ? "" : "no convergence from guesses " + skipped});
  });
}

/// Runs the configured preset and writes CSVs plus manifest.json.
[[nodiscard]] inline RunManifest run_preset(const ExperimentConfig& c, const pt::ptree& tree) {
  detail::ensure_dir(output_root(c));
  RunManifest m;
  m.preset = to_string(c.preset);
  m.config_hash = hex(fnv1a(canonical_text(tree)));
  const auto t0 = std::chrono::steady_clock::now();
  switch (c.preset) {
    case Preset::Calibrate: run_calibrate(c, m); break;
    case Preset::Smoothing: run_smoothing(c, m); break;
    case Preset::Cascade: run_cascade(c, m); break;
    case Preset::Dichotomy: run_dichotomy(c, m); break;
    case Preset::Equilibria: run_equilibria(c, m); break;
  }
  m.wall_times.emplace_back("total",
                            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  m.constants_hash = file_hash(constants_path(c));
  m.save(output_root(c) / "manifest.json");
  return m;
}

}  // namespace bflux
