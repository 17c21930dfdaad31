#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pmed/barriers.hpp"
#include "pmed/freeboundary.hpp"
#include "pmed/solver.hpp"

using namespace pmed;

namespace {

Field barenblatt_field(const Grid& g, const BarrierSpec& s, double t) {
  return Field::sample(g, Variable::Density, s.m, [&](const Point& x) { return barenblatt_density(x, t, s); });
}

double l1_error(const Field& a, const Field& b) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) sum += std::abs(a.values[k] - b.values[k]);
  return sum * a.grid.cell_volume();
}

SolverConfig pme_config(double m, double t_end, double every) {
  SolverConfig c;
  c.m = m;
  c.t_end = t_end;
  c.snapshot_every = every;
  return c;
}

}  // namespace

TEST(CflDt, MatchesFormula) {
  Grid g(1, 2.0, 0.1);
  SolverConfig cfg = pme_config(2.0, 1.0, 1.0);
  Field rho = Field::sample(g, Variable::Density, 2.0, [](const Point& x) { return 0.5 * (1 - x.x * x.x); });
  // D_max = m max rho^(m-1) = 2 * max rho; no drift.
  const double expect = 0.4 * 0.01 / (2.0 * 2.0 * rho.max());
  EXPECT_NEAR(cfl_dt(rho, cfg), expect, 1e-15);
  EXPECT_LE(cfl_dt(rho, pme_config(2.0, 1.0, 1e-6)), 1e-6);
}

TEST(StepDensity, RejectsTooLargeStep) {
  Grid g(1, 2.0, 0.1);
  SolverConfig cfg = pme_config(2.0, 1.0, 1.0);
  Field rho = Field::sample(g, Variable::Density, 2.0, [](const Point& x) { return 1 - x.x * x.x; });
  const double dt = cfl_dt(rho, cfg);
  EXPECT_NO_THROW(step_density(rho, cfg, dt));
  try {
    step_density(rho, cfg, 3.0 * dt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StepTooLarge);
  }
}

TEST(StepDensity, RejectsSupportAtEdge) {
  Grid g(1, 1.0, 0.25);
  Field rho = Field::zeros(g, Variable::Density, 2.0);
  rho.values[0] = 1.0;
  try {
    step_density(rho, pme_config(2.0, 1.0, 1.0), 1e-4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DomainOverflow);
  }
}

TEST(StepDensity, ZeroIsFixedPoint) {
  Grid g(2, 1.0, 0.125);
  Field rho = Field::zeros(g, Variable::Density, 2.0);
  SolverConfig cfg = pme_config(2.0, 1.0, 1.0);
  cfg.potential = make_quadratic_potential(1.0, 2);
  auto res = step_density(rho, cfg, 1e-3);
  for (double v : res.rho.values) EXPECT_EQ(v, 0.0);
}

TEST(StepDensity, OneStepAgainstClosedForm) {
  // One CFL step of the Barenblatt profile stays within O(dt h) of the exact solution.
  const auto spec = BarrierSpec::barenblatt(1.0, 1.0, 2.0, 1);
  Grid g(1, 4.0, 0.05);
  SolverConfig cfg = pme_config(2.0, 1.0, 1.0);
  Field rho = barenblatt_field(g, spec, 0.0);
  const double dt = cfl_dt(rho, cfg);
  auto res = step_density(rho, cfg, dt);
  EXPECT_LT(l1_error(res.rho, barenblatt_field(g, spec, dt)), 5.0 * dt * g.spacing());
  EXPECT_NEAR(integrate(res.rho), integrate(rho), 1e-12 * integrate(rho));
}

TEST(StepDensity, MassPreservedWithDrift2D) {
  Grid g(2, 2.0, 0.1);
  SolverConfig cfg = pme_config(2.0, 1.0, 1.0);
  cfg.potential = make_quadratic_potential(1.0, 2);
  Field rho = Field::sample(g, Variable::Density, 2.0,
                            [](const Point& x) { return 0.8 - dot(x - Point{0.3, -0.2}, x - Point{0.3, -0.2}); });
  double mass = integrate(rho);
  for (int s = 0; s < 20; ++s) {
    auto res = step_density(rho, cfg, cfl_dt(rho, cfg));
    EXPECT_LE(res.clipped_mass, 1e-12 * mass);
    rho = res.rho;
  }
  EXPECT_NEAR(integrate(rho), mass, 1e-12 * mass);
}

TEST(Simulate, SnapshotTimesAndMass) {
  Grid g(1, 4.0, 0.1);
  const auto spec = BarrierSpec::barenblatt(1.0, 1.0, 2.0, 1);
  auto traj = simulate(barenblatt_field(g, spec, 0.0), pme_config(2.0, 0.35, 0.1));
  ASSERT_EQ(traj.snapshots.size(), 4u);
  EXPECT_DOUBLE_EQ(traj.final().t, 0.30000000000000004);
  for (const auto& s : traj.snapshots) {
    EXPECT_NEAR(s.mass, traj.initial().mass, 1e-10 * traj.initial().mass);
    EXPECT_LE(s.clipped_mass, 1e-8 * traj.initial().mass);
  }
  EXPECT_GT(traj.steps, 0u);
}

TEST(Simulate, BarenblattErrorDecreasesUnderRefinement) {
  const auto spec = BarrierSpec::barenblatt(1.0, 1.0, 2.0, 1);
  double prev = std::numeric_limits<double>::infinity();
  for (double h : {0.2, 0.1, 0.05}) {
    Grid g(1, 4.0, h);
    auto traj = simulate(barenblatt_field(g, spec, 0.0), pme_config(2.0, 0.5, 0.25));
    const double err = l1_error(traj.final().rho, barenblatt_field(g, spec, 0.5));
    EXPECT_LT(err, prev) << "h = " << h;
    prev = err;
  }
}

TEST(Simulate, ThreadCountDoesNotChangeResults) {
  Grid g(1, 2.0, 0.1);
  SolverConfig cfg = pme_config(2.0, 0.2, 0.1);
  cfg.potential = make_quadratic_potential(1.0, 1);
  Field hi = Field::sample(g, Variable::Density, 2.0, [](const Point& x) { return 0.6 - x.x * x.x; });
  Field lo = Field::sample(g, Variable::Density, 2.0, [](const Point& x) { return 0.3 - x.x * x.x; });
  setenv("PMED_THREADS", "1", 1);
  auto a = comparison_harness(lo, hi, cfg);
  setenv("PMED_THREADS", "4", 1);
  auto b = comparison_harness(lo, hi, cfg);
  unsetenv("PMED_THREADS");
  EXPECT_EQ(a.per_snapshot, b.per_snapshot);
  EXPECT_TRUE(a.ordered);
}

TEST(Simulate, EquilibriumIsNearlyStationary) {
  Grid g(1, 2.0, 0.02);
  SolverConfig cfg = pme_config(2.0, 0.5, 0.25);
  cfg.potential = make_quadratic_potential(1.0, 1);
  Field rho0 = density_from_pressure(equilibrium_pressure(1.0, cfg.potential, g, 2.0), 2.0);
  auto traj = simulate(rho0, cfg);
  EXPECT_LT(l1_error(traj.final().rho, rho0), g.spacing() * traj.initial().mass);
}

TEST(WeakResidual, ConstantTestFunctionIsMassDefect) {
  Grid g(1, 4.0, 0.1);
  const auto spec = BarrierSpec::barenblatt(1.0, 1.0, 2.0, 1);
  auto traj = simulate(barenblatt_field(g, spec, 0.0), pme_config(2.0, 0.3, 0.1));
  EXPECT_LE(weak_residual(traj, constant_test_function()), 1e-10 * traj.initial().mass);
  EXPECT_THROW(weak_residual(Trajectory{}, constant_test_function()), Error);
}

TEST(Comparison, RejectsUnorderedOrMismatchedInput) {
  Grid g(1, 2.0, 0.1);
  SolverConfig cfg = pme_config(2.0, 0.2, 0.1);
  Field a = Field::sample(g, Variable::Density, 2.0, [](const Point& x) { return 0.5 - x.x * x.x; });
  Field b = Field::sample(g, Variable::Density, 2.0, [](const Point& x) { return 0.4 - x.x * x.x; });
  EXPECT_THROW(comparison_harness(a, b, cfg), Error);
  Field c = Field::zeros(Grid(1, 2.0, 0.2), Variable::Density, 2.0);
  EXPECT_THROW(comparison_harness(b, c, cfg), Error);
}

TEST(Comparison, RandomOrderedPairsStayOrdered) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Grid g(1, 2.0, 0.1);
  SolverConfig cfg = pme_config(2.0, 0.3, 0.1);
  cfg.potential = make_quadratic_potential(1.0, 1);
  for (int trial = 0; trial < 3; ++trial) {
    const double c = 0.4 * u(rng) - 0.2;
    const double hl = 0.2 + 0.3 * u(rng);
    const double hh = hl + 0.05 + 0.3 * u(rng);
    Field lo = Field::sample(g, Variable::Density, 2.0, [&](const Point& x) { return hl * (1 - (x.x - c) * (x.x - c)); });
    Field hi = Field::sample(g, Variable::Density, 2.0, [&](const Point& x) { return hh * (1.2 - (x.x - c) * (x.x - c)); });
    auto rep = comparison_harness(lo, hi, cfg);
    EXPECT_TRUE(rep.ordered);
    EXPECT_FALSE(rep.first_violation_time);
  }
}

TEST(SolverConfig, Validation) {
  SolverConfig c;
  c.m = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = SolverConfig{};
  c.cfl_safety = 1.5;
  EXPECT_THROW(c.validate(), Error);
  c = SolverConfig{};
  c.t_end = 0.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Examples, CflSubstitution) {
  Grid g(1, 2.0, 0.1);
  Field rho = Field::sample(g, Variable::Density, 2.0, [](const Point& x) { return std::abs(x.x) < 0.5 ? 1.0 : 0.0; });
  EXPECT_NEAR(cfl_dt(rho, pme_config(2.0, 1.0, 1.0)), 1e-3, 1e-15);
}

TEST(Examples, CflDegenerateIsCapped) {
  Grid g(1, 2.0, 0.1);
  Field rho = Field::zeros(g, Variable::Density, 2.0);
  EXPECT_DOUBLE_EQ(cfl_dt(rho, pme_config(2.0, 1.0, 0.25)), 0.25);
}

TEST(Examples, ShortHorizonKeepsOnlyInitialSnapshot) {
  Grid g(1, 2.0, 0.1);
  Field rho = Field::sample(g, Variable::Density, 2.0, [](const Point& x) { return 1 - x.x * x.x; });
  auto traj = simulate(rho, pme_config(2.0, 1e-5, 0.1));
  ASSERT_EQ(traj.snapshots.size(), 1u);
  EXPECT_EQ(traj.steps, 0u);
}

TEST(Examples, EquilibriumOneStepNearStationary) {
  // Oracle: the discrete flux divergence of the sampled equilibrium, computed
  // here independently. One step moves rho by exactly dt times it; on a
  // fixed region inside the support it is O(h).
  for (double m : {2.0, 3.0}) {
    for (double h : {0.04, 0.02}) {
      Grid g(1, 2.0, h);
      SolverConfig cfg = pme_config(m, 1.0, 1.0);
      cfg.potential = make_quadratic_potential(1.0, 1);
      Field rho = density_from_pressure(equilibrium_pressure(1.0, cfg.potential, g, m), m);
      const double dt = cfl_dt(rho, cfg);
      auto res = step_density(rho, cfg, dt);

      const int n = g.cells_per_axis();
      std::vector<double> flux(n + 1, 0.0);
      for (int i = 0; i + 1 < n; ++i) {
        const double a = rho.values[i], b = rho.values[i + 1];
        const double x0 = g.coord(i), x1 = g.coord(i + 1);
        const double slope = (x1 * x1 - x0 * x0) / h;
        flux[i + 1] = (std::pow(b, m) - std::pow(a, m)) / h + (slope > 0 ? b : a) * slope;
      }
      double interior = 0.0;
      for (int i = 0; i < n; ++i) {
        const double div = (flux[i + 1] - flux[i]) / h;
        EXPECT_NEAR(res.rho.values[i] - rho.values[i], dt * div, 1e-15);
        const double x = g.coord(i);
        if (std::abs(x) < 0.8) interior = std::max(interior, std::abs(div));
      }
      EXPECT_LE(interior, 10.0 * h) << "m = " << m << " h = " << h;
    }
  }
}

TEST(Examples, IdenticalDataOrdered) {
  Grid g(1, 2.0, 0.1);
  Field rho = Field::sample(g, Variable::Density, 2.0, [](const Point& x) { return 0.5 - x.x * x.x; });
  auto rep = comparison_harness(rho, rho, pme_config(2.0, 0.2, 0.1));
  EXPECT_TRUE(rep.ordered);
  EXPECT_LE(rep.max_violation, rep.tol_order);
  EXPECT_EQ(rep.max_violation, 0.0);
}

TEST(Examples, NestedBarenblattsOrdered) {
  Grid g(1, 4.0, 0.1);
  auto lo = barenblatt_field(g, BarrierSpec::barenblatt(1.0, 0.5, 2.0, 1), 0.0);
  auto hi = barenblatt_field(g, BarrierSpec::barenblatt(1.0, 1.0, 2.0, 1), 0.0);
  auto rep = comparison_harness(lo, hi, pme_config(2.0, 0.5, 0.1));
  EXPECT_TRUE(rep.ordered);
  EXPECT_LE(rep.max_violation, 1e-12);
}

TEST(Examples, BumpAndRaisedBumpOrderedUnderDrift) {
  Grid g(1, 3.0, 0.05);
  SolverConfig cfg = pme_config(2.0, 0.5, 0.1);
  cfg.potential = make_quadratic_potential(1.0, 1);
  auto bump = [](double lift) {
    return [lift](const Point& x) {
      const double b = 1.0 - x.x * x.x;
      return b > 0.0 ? 0.5 * b + lift : 0.0;
    };
  };
  auto lo = Field::sample(g, Variable::Density, 2.0, bump(0.0));
  auto hi = Field::sample(g, Variable::Density, 2.0, bump(0.1));
  auto rep = comparison_harness(lo, hi, cfg);
  EXPECT_TRUE(rep.ordered);
}

TEST(Examples, WeakResidualSmoothTestFunctionShrinks) {
  const auto spec = BarrierSpec::barenblatt(1.0, 1.0, 2.0, 1);
  const double L = 4.0;
  const double w = M_PI / L;
  TestFunction phi{
      [w](const Point& x, double) { return std::cos(w * x.x); },
      [](const Point&, double) { return 0.0; },
      [w](const Point& x, double) { return Point{-w * std::sin(w * x.x), 0.0}; },
      [w](const Point& x, double) { return -w * w * std::cos(w * x.x); },
  };
  std::vector<double> res;
  for (double h : {0.1, 0.05}) {
    Grid g(1, L, h);
    auto traj = simulate(barenblatt_field(g, spec, 0.0), pme_config(2.0, 0.5, 0.005));
    res.push_back(weak_residual(traj, phi));
  }
  EXPECT_LE(res[0], 0.01);
  EXPECT_GE(res[0] / res[1], 1.5);
}

TEST(Examples, BarenblattSupErrorShrinksUnderRefinement) {
  const auto spec = BarrierSpec::barenblatt(1.0, 1.0, 2.0, 1);
  std::vector<double> err;
  for (double h : {0.1, 0.05}) {
    Grid g(1, 4.0, h);
    auto traj = simulate(barenblatt_field(g, spec, 0.0), pme_config(2.0, 0.5, 0.5));
    const Field exact = barenblatt_field(g, spec, 0.5);
    double worst = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) worst = std::max(worst, std::abs(traj.final().rho.values[k] - exact.values[k]));
    err.push_back(worst);
  }
  EXPECT_GE(err[0] / err[1], 1.5) << err[0] << " " << err[1];
}
