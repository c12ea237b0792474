// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "oracles.hpp"

#include <bflux/harness.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace bflux;

namespace {

const std::filesystem::path kConfigs = BFLUX_CONFIGS;

struct Outcome {
  bool passed{};
  std::string detail;
};

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

const PowerNonlinearity kZero = PowerNonlinearity::zero();
const PowerNonlinearity kFlux{1.0, 1.5, 0.0, 0.0};
const PowerNonlinearity kSeventh{1.0, 7.0, 0.0, 0.0};
const PowerNonlinearity kCube{1.0, 3.0, 0.0, 0.0};

StepConfig with_dt(double dt) {
  StepConfig c;
  c.dt = dt;
  return c;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

/// Runs a shipped preset into a scratch directory with optional overrides.
RunManifest run_config(const std::string& name, const std::string& out,
                       std::vector<std::string> sets = {}) {
  sets.push_back("experiment.output_dir=" + out);
  pt::ptree tree;
  const ExperimentConfig cfg = load_config((kConfigs / name).string(), sets, &tree);
  const auto violations = validate(cfg);
  if (!violations.empty()) throw ConfigError(name + ": " + violations.front());
  return run_preset(cfg, tree);
}

/// All checks whose name starts with `prefix` passed; at least one exists.
bool checks_pass(const RunManifest& m, const std::string& prefix, std::string& failed) {
  bool any = false, ok = true;
  for (const auto& c : m.checks)
    if (c.name.rfind(prefix, 0) == 0) {
      any = true;
      if (!c.passed) {
        ok = false;
        failed += (failed.empty() ? "" : ", ") + c.name + "=" + num(c.value);
      }
    }
  if (!any) failed += (failed.empty() ? "" : ", ") + ("missing " + prefix);
  return any && ok;
}

Outcome truncation_algebra() {
  const std::vector<double> ks{4.0, 8.0, 16.0, 32.0, 64.0};
  double worst = 0.0;
  for (double q : {1.5, 2.0, 2.5}) {
    const PowerNonlinearity g{1.0, q, 0.0, 0.0};
    const double span = 10.0 * truncate(g, ks.back()).upper_cut();
    std::vector<double> grid{0.0};
    for (int k = 0; k <= 320; ++k) {
      const double v = span * std::pow(10.0, -k / 40.0);
      grid.push_back(v);
      grid.push_back(-v);
    }
    for (int k = -400; k <= 400; ++k) grid.push_back(span * k / 400.0);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const auto gK = truncate(g, ks[i]);
      for (double s : grid) {
        const double scale = std::max(1.0, std::abs(s * g(s)));
        const double sgK = s * gK(s);
        worst = std::max(worst, (sgK - s * g(s)) / scale);
        if (i + 1 < ks.size()) worst = std::max(worst, (sgK - s * truncate(g, ks[i + 1])(s)) / scale);
        worst = std::max(worst, (sgK - ks[i] * s * s) / scale);
        if (std::abs(s) <= gK.upper_cut()) worst = std::max(worst, std::abs(gK(s) - g(s)) / scale);
      }
    }
  }
  return {worst <= 1e-9, "worst excess " + num(worst)};
}

Outcome domination() {
  const Mesh1D m(257, 1.0);
  double worst = -1e300;
  for (unsigned seed = 1; seed <= 10; ++seed)
    for (double K : {4.0, 16.0, 64.0})
      worst = std::max(worst, domination_check(data::random_smooth(m, 3.0, seed), kSeventh, kFlux, K,
                                               0.1, with_dt(1e-3)));
  return {worst <= 1e-6, "max |v^K| - U = " + num(worst)};
}

Outcome gronwall() {
  const Mesh1D m(129, 1.0);
  const double r = 2.0, K = 4.0;
  const double C = gronwall_constant(r, K, kSeventh.lower_slope_deficit(),
                                     calibrate_trace(trig_corpus(m, 64, 1), r, gronwall_delta(r, K)));
  double worst = -1e300, rate = -1e300;
  for (unsigned pair = 0; pair < 20; ++pair) {
    const Trajectory v = solve_truncated(data::random_smooth(m, 2.0, 2 * pair + 1), kSeventh, kFlux,
                                         K, 0.5, with_dt(1e-3));
    const Trajectory w = solve_truncated(data::random_smooth(m, 2.0, 2 * pair + 2), kSeventh, kFlux,
                                         K, 0.5, with_dt(1e-3));
    worst = std::max(worst, gronwall_excess(v, w, r, C));
    rate = std::max(rate, gronwall_rate(v, w, r));
  }
  return {worst <= 1e-12, "C(K) = " + num(C) + ", observed rate " + num(rate) + ", worst excess " + num(worst)};
}

Outcome k_monotone() {
  const Mesh1D m(257, 1.0);
  const std::vector<double> ks{1.0, 2.0, 4.0, 8.0, 16.0};
  const std::vector<double> sig{2.0};
  std::vector<Field> data_set{data::singular(m, 0.4)};
  for (unsigned seed = 1; seed <= 3; ++seed) data_set.push_back(data::random_smooth(m, 3.0, seed, true));
  int up = 0, down = 0;
  for (const auto& u0 : data_set) {
    if (k_limit(u0, kSeventh, kFlux, ks, 0.01, 0.05, sig, with_dt(1e-4)).monotone) ++up;
    Field neg = u0;
    for (double& v : neg.values()) v = -v;
    if (k_limit(neg, kSeventh, kFlux, ks, 0.01, 0.05, sig, with_dt(1e-4)).monotone) ++down;
  }
  const int n = static_cast<int>(data_set.size());
  return {up == n && down == n,
          std::to_string(up) + "/" + std::to_string(n) + " increasing, " + std::to_string(down) + "/" +
              std::to_string(n) + " decreasing"};
}

/// Calibration and hold-out runs, shared by the smoothing and energy criteria.
const RunManifest& smoothing_manifest() {
  static const RunManifest m = [] {
    const std::string out = (std::filesystem::temp_directory_path() / "bflux_acceptance_smoothing").string();
    std::filesystem::remove_all(out);
    const RunManifest cal = run_config("smoothing.ini", out, {"experiment.preset=calibrate"});
    if (cal.exit_code() != 0) throw Error("calibration failed");
    return run_config("smoothing.ini", out);
  }();
  return m;
}

Outcome smoothing() {
  std::string failed;
  const RunManifest& m = smoothing_manifest();
  bool ok = checks_pass(m, "smoothing:", failed) & checks_pass(m, "lr_bound", failed);
  const Mesh1D mesh(33, 1.0);
  StepConfig cfg = with_dt(1e-5);
  cfg.save_every = 10;
  std::string fits;
  for (double p : {3.0, 4.0}) {
    const Trajectory tr = integrate(Field(mesh, 1e6), 0.05, PowerNonlinearity{1.0, p}, kFlux, cfg);
    const double slope = decay_exponent_fit(tr, 2.0, 1e-3, 0.05);
    const double expected = -1.0 / (p - 1.0);
    ok = ok && std::abs(slope - expected) <= 0.15 * std::abs(expected);
    fits += (fits.empty() ? "" : ", ") + ("p=" + num(p) + " slope " + num(slope));
  }
  return {ok, fits + (failed.empty() ? "" : "; failed " + failed)};
}

Outcome energy() {
  std::string failed;
  const RunManifest& m = smoothing_manifest();
  const bool ok = checks_pass(m, "energy:", failed) & checks_pass(m, "energy_A_shared", failed);
  return {ok, failed.empty() ? "hold-out residuals within tolerance, A shared across sigma"
                             : "failed " + failed};
}

Outcome dichotomy() {
  const std::string out = (std::filesystem::temp_directory_path() / "bflux_acceptance_dichotomy").string();
  std::filesystem::remove_all(out);
  const RunManifest m = run_config("dichotomy.ini", out);
  std::string failed;
  const bool ok = m.exit_code() != 3 && checks_pass(m, "dissipative_bounded", failed) &
                  checks_pass(m, "blowup_confirmed", failed);
  return {ok, "exit " + std::to_string(m.exit_code()) + (failed.empty() ? "" : "; failed " + failed)};
}

Outcome continuity() {
  const Mesh1D m(257, 1.0);
  const Field u0 = data::singular(m, 0.4);
  const std::vector<double> ks{1.0, 2.0, 4.0, 8.0};
  const std::vector<double> sig{2.0};
  const auto res = k_limit(u0, kSeventh, kFlux, ks, 0.01, 0.125, sig, with_dt(std::ldexp(1.0, -16)));
  std::vector<double> times;
  for (int j = 3; j <= 10; ++j) times.push_back(std::ldexp(1.0, -j));
  const auto d = initial_continuity_check(res.limit, u0, 1.5, 0.5, times);
  bool ok = true;
  for (std::size_t i = 1; i < d.size(); ++i) ok = ok && d[i] < d[i - 1];
  return {ok, "distance " + num(d.front()) + " at t=2^-3 down to " + num(d.back()) + " at t=2^-10"};
}

Outcome extremal() {
  std::string detail;
  bool ok = true;

  const PowerNonlinearity bistable{1.0, 3.0, -1.0, 0.0};
  const auto bi = extremal_equilibria(Mesh1D(65, 1.0), 5.0, 100.0, 1e-8, bistable, kZero, with_dt(1e-2));
  double bi_err = 0.0;
  for (std::size_t i = 0; i < bi.phi_max.field.size(); ++i)
    bi_err = std::max({bi_err, std::abs(bi.phi_max.field[i] - 1.0), std::abs(bi.phi_min.field[i] + 1.0)});
  ok = ok && bi_err <= 1e-6 && bi.monotone_from_above && bi.monotone_from_below;
  detail += "bistable err " + num(bi_err);

  ExtremalPair pair = extremal_equilibria(Mesh1D(257, 1.0), 5.0, 100.0, 1e-8, kCube, kFlux, with_dt(1e-2));
  const Mesh1D fine(4097, 1.0);
  pair.phi_min = refine(pair.phi_min, fine, kCube, kFlux);
  pair.phi_max = refine(pair.phi_max, fine, kCube, kFlux);
  const auto ref = oracle::symmetric_equilibrium([](double s) { return s * s * s; },
                                                 [](double s) { return s * std::sqrt(std::abs(s)); },
                                                 0.5, 5.0, fine.size());
  double shoot_err = 0.0;
  for (std::size_t i = 0; i < fine.size(); ++i)
    shoot_err = std::max({shoot_err, std::abs(pair.phi_max.field[i] - ref[i]),
                          std::abs(pair.phi_min.field[i] + ref[i])});
  ok = ok && shoot_err <= 1e-6 && pair.monotone_from_above && pair.monotone_from_below;
  detail += ", shooting err " + num(shoot_err);

  std::vector<Equilibrium> found;
  for (double guess : {2.0, -2.0, 1.0, 0.0, 0.3})
    found.push_back(solve_equilibrium(Field(fine, guess), kCube, kFlux));
  const bool ordered_ok = equilibria_order_check(found, pair);
  ok = ok && ordered_ok;
  detail += ", order check " + std::string(ordered_ok ? "ok" : "violated");
  return {ok, detail};
}

Outcome absorbing() {
  const Mesh1D m(257, 1.0);
  std::vector<Field> data_set;
  for (double level : {1.0, 10.0, 100.0, 1000.0, 10000.0}) data_set.push_back(data::flat(m, level));
  const auto rep = absorbing_probe(data_set, 0.1, 1.0, kCube, kFlux, with_dt(1e-2));
  double lo = rep.sup_norms.front();
  for (double s : rep.sup_norms) lo = std::min(lo, s);
  const double ratio = rep.uniform_bound / lo;
  return {ratio < 2.0, "max/min late sup ratio " + num(ratio)};
}

Outcome hygiene() {
  const Mesh1D tiny(5, 1.0);
  const double exact = 1.0 / std::sqrt(3.0);
  double lo_order = 1e300, hi_order = -1e300, prev = 0.0;
  for (double dt : {1e-2, 5e-3, 2.5e-3, 1.25e-3}) {
    StepConfig cfg = with_dt(dt);
    cfg.newton_tol = 1e-14;
    const double err = std::abs(integrate(Field(tiny, 1.0), 1.0, kCube, kZero, cfg).final_state()[2] - exact);
    if (prev > 0.0) {
      lo_order = std::min(lo_order, std::log2(prev / err));
      hi_order = std::max(hi_order, std::log2(prev / err));
    }
    prev = err;
  }

  const Mesh1D m(101, 1.0);
  const Field u0 = data::random_smooth(m, 5.0, 1);
  StepConfig cfg = with_dt(1e-3);
  cfg.newton_tol = 1e-13;
  const Trajectory tr = integrate(u0, 1.0, kZero, kZero, cfg);
  double drift = 0.0;
  for (const auto& s : tr.snapshots) drift = std::max(drift, std::abs(integral(s) - integral(u0)));

  auto quad_err = [](std::size_t n) {
    const Field u = Field::from_function(Mesh1D(n, 1.0), [](double x) { return x * x; });
    return std::abs(lebesgue_norm(u, 2.0) - 1.0 / std::sqrt(5.0));
  };
  const double q1 = std::log2(quad_err(65) / quad_err(129));
  const double q2 = std::log2(quad_err(129) / quad_err(257));
  const bool ok = lo_order >= 0.9 && hi_order <= 1.1 && drift <= 1e-10 && std::min(q1, q2) >= 1.9;
  return {ok, "time order " + num(lo_order) + ".." + num(hi_order) + ", mass drift " + num(drift) +
                  ", quadrature order " + num(std::min(q1, q2))};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"truncation algebra", truncation_algebra},
      {"Robin domination", domination},
      {"Gronwall stability", gronwall},
      {"K-monotonicity", k_monotone},
      {"smoothing estimate", smoothing},
      {"energy inequality", energy},
      {"dichotomy sweep", dichotomy},
      {"initial-time continuity", continuity},
      {"extremal equilibria", extremal},
      {"absorbing uniformity", absorbing},
      {"numerical hygiene", hygiene},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.passed) ++failures;
    std::printf("%s %2zu %-24s %s (%.1f s)\n", o.passed ? "PASS" : "FAIL", i + 1,
                criteria[i].name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
