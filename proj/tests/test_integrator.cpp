#include <bflux/data.hpp>
#include <bflux/integrator.hpp>

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

using namespace bflux;
using Catch::Approx;

namespace {

const PowerNonlinearity kZero = PowerNonlinearity::zero();
const PowerNonlinearity kCube{1.0, 3.0, 0.0, 0.0};
/// u' = u^2 as a reaction term: f(s) = -s|s|.
const PowerNonlinearity kSquareGrowth{-1.0, 2.0, 0.0, 0.0};

double min_of(const Field& u) {
  double m = u[0];
  for (double v : u.values()) m = std::min(m, v);
  return m;
}

}  // namespace

TEST_CASE("Neumann heat step preserves constants", "[integrator]") {
  const Mesh1D m(65, 1.0);
  StepConfig cfg;
  cfg.dt = 0.05;
  const Field v = step(Field(m, 3.0), kZero, kZero, cfg);
  for (double x : v.values()) CHECK(x == Approx(3.0).epsilon(1e-14));
}

TEST_CASE("linear absorption step matches the scalar backward-Euler map", "[integrator]") {
  const Mesh1D m(33, 1.0);
  StepConfig cfg;
  cfg.dt = 0.1;
  const Field v = step(Field(m, 1.0), PowerNonlinearity::affine(1.0, 0.0), kZero, cfg);
  for (double x : v.values()) CHECK(x == Approx(1.0 / 1.1).epsilon(1e-12));
}

TEST_CASE("constant boundary flux feeds mass 2 dt", "[integrator]") {
  for (double len : {1.0, 2.0}) {
    const Mesh1D m(129, len);
    StepConfig cfg;
    cfg.dt = 1e-4;
    const Field v = step(Field(m, 0.0), kZero, PowerNonlinearity::affine(0.0, 1.0), cfg);
    CHECK(integral(v) / len == Approx(2.0 * cfg.dt / len).epsilon(1e-10));
  }
}

TEST_CASE("cubic absorption follows the scalar decay oracle", "[integrator]") {
  const Mesh1D m(17, 1.0);
  StepConfig cfg;
  cfg.dt = 1e-3;
  const Trajectory tr = integrate(Field(m, 1.0), 10.0, kCube, kZero, cfg);
  REQUIRE(tr.status.completed());
  CHECK(tr.times.back() == Approx(10.0));
  for (std::size_t j = 1; j < tr.size(); ++j)
    CHECK(sup_norm(tr.snapshots[j]) < sup_norm(tr.snapshots[j - 1]));
  CHECK(sup_norm(tr.final_state()) == Approx(1.0 / std::sqrt(21.0)).epsilon(1e-3));
}

TEST_CASE("backward Euler is first order on u' = -u^3", "[integrator][property]") {
  const Mesh1D m(5, 1.0);
  const double T = 1.0;
  const double exact = 1.0 / std::sqrt(1.0 + 2.0 * T);
  std::vector<double> errs;
  for (double dt : {1e-2, 5e-3, 2.5e-3, 1.25e-3}) {
    StepConfig cfg;
    cfg.dt = dt;
    cfg.newton_tol = 1e-14;
    const Trajectory tr = integrate(Field(m, 1.0), T, kCube, kZero, cfg);
    errs.push_back(std::abs(tr.final_state()[2] - exact));
  }
  for (std::size_t i = 1; i < errs.size(); ++i) {
    const double order = std::log2(errs[i - 1] / errs[i]);
    CHECK(order >= 0.9);
    CHECK(order <= 1.1);
  }
}

TEST_CASE("mass is conserved without reaction or flux", "[integrator][property]") {
  const Mesh1D m(101, 1.0);
  for (unsigned seed : {1u, 2u, 3u}) {
    const Field u0 = data::random_smooth(m, 5.0, seed);
    StepConfig cfg;
    cfg.dt = 1e-3;
    cfg.newton_tol = 1e-13;
    const Trajectory tr = integrate(u0, 1.0, kZero, kZero, cfg);
    REQUIRE(tr.size() == 1001);
    const double mass0 = integral(u0);
    for (const auto& s : tr.snapshots) CHECK(std::abs(integral(s) - mass0) <= 1e-10);
  }
}

TEST_CASE("explosive balance with large data blows up", "[integrator]") {
  const Mesh1D m(65, 1.0);
  StepConfig cfg;
  cfg.dt = 1e-3;
  cfg.growth_rate = 10.0;
  const Trajectory tr =
      integrate(Field(m, 10.0), 1.0, PowerNonlinearity{0.01, 3.0}, PowerNonlinearity{1.0, 2.5}, cfg);
  REQUIRE(tr.status.blown_up());
  CHECK(sup_norm(tr.final_state()) > cfg.blowup_threshold);
  CHECK(tr.status.time < 1e-2);
}

TEST_CASE("trajectory bookkeeping", "[integrator]") {
  const Mesh1D m(33, 1.0);
  StepConfig cfg;
  cfg.dt = 1e-2;
  cfg.save_every = 7;
  const std::vector<double> sig{2.0, 4.0};
  const Trajectory tr = integrate(data::random_smooth(m, 2.0, 5), 1.0, kCube, kZero, cfg, sig);
  REQUIRE(tr.status.completed());
  CHECK(tr.times.front() == 0.0);
  CHECK(tr.times.back() == Approx(1.0));
  CHECK(tr.times.size() == tr.snapshots.size());
  for (std::size_t j = 1; j < tr.size(); ++j) CHECK(tr.times[j] > tr.times[j - 1]);
  CHECK(tr.times[1] == Approx(0.07));
  REQUIRE(tr.norm_series.size() == 2);
  for (const auto& ns : tr.norm_series) {
    REQUIRE(ns.values.size() == tr.size());
    for (std::size_t j = 0; j < tr.size(); ++j)
      CHECK(ns.values[j] == Approx(lebesgue_norm(tr.snapshots[j], ns.sigma)));
  }
  CHECK(tr.energy_series.size() == 2 * 100);
  for (const auto& e : tr.energy_series) {
    CHECK(e.grad >= 0.0);
    CHECK(e.absorb >= 0.0);
  }
}

TEST_CASE("step reports Newton failure when no real implicit root exists", "[integrator]") {
  const Mesh1D m(9, 1.0);
  StepConfig cfg;
  cfg.dt = 1.0;
  cfg.max_dt_halvings = 0;
  CHECK_THROWS_AS(step(Field(m, 10.0), kSquareGrowth, kZero, cfg), NewtonFailed);
  const Trajectory tr = integrate(Field(m, 10.0), 2.0, kSquareGrowth, kZero, cfg);
  CHECK(tr.status.kind == Status::Kind::NewtonFailed);
  CHECK(tr.status.time == 0.0);
}

TEST_CASE("step map is order preserving", "[integrator][property]") {
  const Mesh1D m(65, 1.0);
  const PowerNonlinearity f{1.0, 3.0, -1.0, 0.0};
  const auto gK = truncate(PowerNonlinearity{1.0, 1.5, 0.0, 0.0}, 4.0);
  StepConfig cfg;
  cfg.dt = 1e-3;
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<unsigned long long> seed;
  std::uniform_real_distribution<double> level(0.1, 5.0);
  for (int pair = 0; pair < 100; ++pair) {
    const Field u = data::random_smooth(m, level(rng), seed(rng));
    Field v = data::random_smooth(m, level(rng), seed(rng), true);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += u[i];
    const Field su = step(u, f, gK, cfg);
    const Field sv = step(v, f, gK, cfg);
    for (std::size_t i = 0; i < su.size(); ++i) CHECK(su[i] <= sv[i] + 1e-9);
  }
}

TEST_CASE("Robin problem examples", "[integrator]") {
  const Mesh1D m(65, 1.0);
  StepConfig cfg;
  cfg.dt = 1e-3;

  const Trajectory flat = solve_robin({0.0, 0.0, 0.0, 0.0, Field(m, 2.5)}, 0.5, cfg);
  for (const auto& s : flat.snapshots)
    for (double x : s.values()) CHECK(x == Approx(2.5).epsilon(1e-13));

  const Trajectory growth = solve_robin({1.0, 0.0, 0.0, 0.0, Field(m, 1.0)}, 1.0, cfg);
  for (std::size_t j = 0; j < growth.size(); j += 50) {
    const double t = growth.times[j];
    // Backward Euler: (1 - dt)^(-t/dt) = e^t (1 + t dt / 2 + O(dt^2)).
    CHECK(growth.snapshots[j][20] == Approx(std::exp(t)).epsilon(cfg.dt));
    CHECK(growth.snapshots[j][20] >= std::exp(t));
  }

  const Trajectory source = solve_robin({0.0, 1.0, 0.0, 0.0, Field(m, 0.0)}, 1.0, cfg);
  for (std::size_t j = 0; j < source.size(); ++j)
    for (double x : source.snapshots[j].values()) CHECK(x == Approx(source.times[j]).margin(1e-12));

  CHECK_THROWS(solve_robin({2000.0, 0.0, 0.0, 0.0, Field(m, 1.0)}, 1.0, cfg));
}

TEST_CASE("Robin solution stays nonnegative for nonnegative data", "[integrator][property]") {
  const Mesh1D m(129, 1.0);
  StepConfig cfg;
  cfg.dt = 1e-3;
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const Trajectory tr = solve_robin(
        {0.5, 0.1 * seed, 4.0, 0.2, data::random_smooth(m, 3.0, seed, true)}, 0.3, cfg);
    for (const auto& s : tr.snapshots) CHECK(min_of(s) >= 0.0);
  }
}

TEST_CASE("stiff Robin flux is sub-stepped to stay positive", "[integrator]") {
  const Mesh1D m(257, 1.0);
  StepConfig cfg;
  cfg.dt = 1e-3;
  const RobinLinearProblem prob{0.0, 0.0, 64.0, 0.0, data::random_smooth(m, 3.0, 3, true)};
  CHECK(robin_substeps(prob, cfg.dt) > 1);
  CHECK(robin_substeps({0.0, 0.0, 0.0, 0.0, Field(m, 1.0)}, cfg.dt) == 1);
  const Trajectory tr = solve_robin(prob, 0.01, cfg);
  REQUIRE(tr.size() == 11);
  for (const auto& s : tr.snapshots) CHECK(min_of(s) >= 0.0);
}

TEST_CASE("blow-up detection on the scalar oracle", "[integrator]") {
  const Mesh1D m(3, 1.0);
  StepConfig cfg;
  cfg.growth_rate = 10.0;
  const std::vector<double> dts{1e-2, 2.5e-3, 6.25e-4};
  const auto verdict = detect_blowup(
      [&](double dt) {
        StepConfig c = cfg;
        c.dt = dt;
        return integrate(Field(m, 1.0), 2.0, kSquareGrowth, kZero, c);
      },
      dts);
  CHECK(verdict.confirmed);
  REQUIRE(verdict.t_star_estimates.size() == 3);
  CHECK(std::abs(verdict.t_star_estimates.back() - 1.0) < 5e-3);
  for (std::size_t i = 1; i < 3; ++i)
    CHECK(std::abs(verdict.t_star_estimates[i] - 1.0) <
          std::abs(verdict.t_star_estimates[i - 1] - 1.0));
}

TEST_CASE("blow-up detection rejects bounded dynamics", "[integrator]") {
  const Mesh1D m(33, 1.0);
  const std::vector<double> dts{1e-2, 2.5e-3, 6.25e-4};
  auto run = [&](const PowerNonlinearity& f, const PowerNonlinearity& g, double level) {
    return detect_blowup(
        [&](double dt) {
          StepConfig c;
          c.dt = dt;
          c.growth_rate = 10.0;
          return integrate(Field(m, level), 0.5, f, g, c);
        },
        dts);
  };
  CHECK_FALSE(run(kZero, kZero, 1.0).confirmed);
  CHECK_FALSE(run(kCube, PowerNonlinearity{1.0, 1.5}, 100.0).confirmed);
}

TEST_CASE("blow-up detection flags diverging t* estimates", "[integrator]") {
  const Mesh1D m(3, 1.0);
  const std::vector<double> dts{1e-2, 5e-3, 2.5e-3};
  auto fake = [&](double dt) {
    Trajectory tr;
    tr.record(0.0, Field(m, 1.0));
    const double t = 1.0 + 1.0 / (dt * 1000.0);  // gaps 0.1, 0.2: growing
    tr.record(t, Field(m, 1e9));
    tr.status = {Status::Kind::BlownUp, t};
    return tr;
  };
  CHECK_THROWS_AS(detect_blowup(fake, dts), Inconclusive);
  CHECK_THROWS(detect_blowup(fake, std::vector<double>{1e-2, 5e-3}));
}
