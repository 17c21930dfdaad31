#include <cmath>

#include <gtest/gtest.h>

#include "pmed/barriers.hpp"
#include "pmed/freeboundary.hpp"

using namespace pmed;

namespace {

BoundarySet points(std::initializer_list<double> xs) {
  BoundarySet b;
  for (double x : xs) b.points.push_back({x, 0.0});
  return b;
}

}  // namespace

TEST(ExtractBoundary, ZeroFieldIsEmpty) {
  Grid g(2, 1.0, 0.125);
  EXPECT_TRUE(extract_boundary(Field::zeros(g, Variable::Density, 2.0), 1e-6).empty());
  EXPECT_THROW(extract_boundary(Field::zeros(g, Variable::Density, 2.0), 0.0), Error);
}

TEST(ExtractBoundary, BarenblattEndpoints) {
  auto s = BarrierSpec::barenblatt(1.0, 1.0, 2.0, 1);
  for (double h : {0.1, 0.05}) {
    Grid g(1, 4.0, h);
    Field rho = Field::sample(g, Variable::Density, 2.0, [&](const Point& x) { return barenblatt_density(x, 0.0, s); });
    auto b = extract_boundary(rho, 1e-9);
    ASSERT_EQ(b.size(), 2u);
    const double r = barenblatt_radius(0.0, s);
    EXPECT_NEAR(b.points[0].x, -r, h);
    EXPECT_NEAR(b.points[1].x, r, h);
  }
}

TEST(ExtractBoundary, CircleIn2D) {
  Grid g(2, 2.0, 0.05);
  Field f = Field::sample(g, Variable::Pressure, 2.0, [](const Point& x) { return 1.0 - dot(x, x); });
  auto b = extract_boundary(f, 1e-3);
  ASSERT_GT(b.size(), 100u);
  for (const Point& p : b.points) EXPECT_NEAR(norm(p), 1.0, 0.05);
}

TEST(Hausdorff, Examples) {
  auto a = points({0.0, 1.0, 2.5});
  EXPECT_EQ(hausdorff(a, a), 0.0);
  EXPECT_DOUBLE_EQ(hausdorff(points({0.0}), points({3.0})), 3.0);
  EXPECT_DOUBLE_EQ(hausdorff(points({0.0, 1.0}), points({0.0})), 1.0);
  EXPECT_DOUBLE_EQ(hausdorff(points({0.0}), points({0.0, 1.0})), 1.0);
  try {
    hausdorff(points({}), a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyBoundary);
  }
}

TEST(Hausdorff, MetricProperties) {
  auto a = points({0.0, 0.4});
  auto b = points({0.1, 1.0});
  auto c = points({-0.5, 0.7, 2.0});
  EXPECT_DOUBLE_EQ(hausdorff(a, b), hausdorff(b, a));
  EXPECT_LE(hausdorff(a, c), hausdorff(a, b) + hausdorff(b, c) + 1e-15);
  EXPECT_GE(hausdorff(a, b), 0.0);
}

TEST(Equilibrium, AnalyticConstant1D) {
  auto pot = make_quadratic_potential(1.0, 1);
  Grid g(1, 2.0, 1e-3);
  // (2/3) C^(3/2)
  EXPECT_NEAR(equilibrium_constant(2.0 / 3.0, pot, 2.0, g), 1.0, 1e-6);
  EXPECT_NEAR(equilibrium_constant(4.0 / 3.0, pot, 2.0, g), std::pow(2.0, 2.0 / 3.0), 1e-6);
}

TEST(Equilibrium, MassMatchesTarget) {
  auto pot = make_quadratic_potential(0.5, 2);
  Grid g(2, 3.0, 0.05);
  for (double m : {1.5, 2.0, 3.0}) {
    const double C = equilibrium_constant(0.8, pot, m, g);
    EXPECT_NEAR(equilibrium_mass(C, pot, g, m), 0.8, 1e-9);
  }
}

TEST(Equilibrium, MonotoneInMassAndSmallMassLimit) {
  auto pot = make_polynomial_potential({0.5, -1.0, 1.0}, 1, 3.0);  // min value 0.25 at 0.5
  Grid g(1, 3.0, 0.01);
  double prev = -1e300;
  for (double mass : {0.05, 0.2, 0.5, 1.0, 2.0}) {
    const double C = equilibrium_constant(mass, pot, 2.0, g);
    EXPECT_GT(C, prev);
    prev = C;
  }
  EXPECT_NEAR(equilibrium_constant(1e-6, pot, 2.0, g), 0.25, 1e-2);
}

TEST(Equilibrium, Errors) {
  Grid g(1, 2.0, 0.05);
  try {
    equilibrium_constant(1.0, make_zero_potential(), 2.0, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedPotential);
  }
  try {
    equilibrium_constant(100.0, make_quadratic_potential(1.0, 1), 2.0, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DomainTooSmall);
  }
  EXPECT_THROW(equilibrium_constant(-1.0, make_quadratic_potential(1.0, 1), 2.0, g), Error);
}

TEST(ShellCheck, ExactLevelSetAndOffsetPoint) {
  auto pot = make_quadratic_potential(1.0, 2);
  Grid g(2, 2.0, 0.05);
  auto level = level_set_points(pot, 1.0, g);
  ASSERT_FALSE(level.empty());
  for (double eps : {1e-9, 1e-3, 0.5}) EXPECT_TRUE(sublevel_shell_check(level, pot, 1.0, eps));
  const double eps = 0.1;
  BoundarySet one;
  one.points.push_back({std::sqrt(1.0 + 2 * eps), 0.0});
  EXPECT_FALSE(sublevel_shell_check(one, pot, 1.0, eps));
  EXPECT_TRUE(within_sublevel(level, pot, 1.0 + 1e-12));
  EXPECT_FALSE(within_sublevel(one, pot, 1.0));
}

TEST(ShellCheck, LateTimeBarenblattRunEntersShell) {
  const double h = 0.05;
  Grid g(1, 3.0, h);
  SolverConfig cfg;
  cfg.m = 2.0;
  cfg.potential = make_quadratic_potential(1.0, 1);
  cfg.t_end = 6.0;
  cfg.snapshot_every = 1.0;
  auto s = BarrierSpec::barenblatt(1.0, 0.5, 2.0, 1);
  Field rho0 = Field::sample(g, Variable::Density, 2.0, [&](const Point& x) { return barenblatt_density(x, 0.0, s); });
  auto traj = simulate(rho0, cfg);
  auto eq = compute_equilibrium(traj.initial().mass, cfg.potential, 2.0, g);
  auto b = extract_boundary(traj.final().rho, support_threshold_for(cfg, rho0));
  EXPECT_TRUE(sublevel_shell_check(b, cfg.potential, eq.C_inf, 5 * h * (1 + 2 * std::sqrt(eq.C_inf))));
}

TEST(BoundaryVelocity, EquilibriumIsStationary) {
  const double h = 0.05;
  Grid g(1, 2.0, h);
  SolverConfig cfg;
  cfg.m = 2.0;
  cfg.potential = make_quadratic_potential(1.0, 1);
  cfg.t_end = 0.5;
  cfg.snapshot_every = 0.1;
  Field rho0 = density_from_pressure(equilibrium_pressure(1.0, cfg.potential, g, 2.0), 2.0);
  auto traj = simulate(rho0, cfg);
  auto frames = boundary_velocity(traj, support_threshold_for(cfg, rho0));
  ASSERT_EQ(frames.size(), 5u);
  for (const auto& f : frames) {
    ASSERT_EQ(f.points.size(), 2u);
    for (const auto& p : f.points) {
      EXPECT_LE(std::abs(p.velocity), 10 * h);
      ASSERT_TRUE(p.law_residual);
      EXPECT_LE(std::abs(*p.law_residual), 10 * h);
    }
  }
}

TEST(BoundaryVelocity, BarenblattMatchesRadiusRate) {
  auto s = BarrierSpec::barenblatt(1.0, 1.0, 2.0, 1);
  Grid g(1, 4.0, 0.025);
  SolverConfig cfg;
  cfg.t_end = 0.5;
  cfg.snapshot_every = 0.1;
  Field rho0 = Field::sample(g, Variable::Density, 2.0, [&](const Point& x) { return barenblatt_density(x, 0.0, s); });
  auto frames = boundary_velocity(simulate(rho0, cfg), support_threshold_for(cfg, rho0));
  for (const auto& f : frames) {
    for (const auto& p : f.points) EXPECT_NEAR(p.velocity, barenblatt_radius_rate(f.t - 0.05, s), 0.1);
  }
}

TEST(BoundaryVelocity, Errors) {
  Grid g(1, 2.0, 0.1);
  SolverConfig cfg;
  cfg.t_end = 0.1;
  cfg.snapshot_every = 0.1;
  Field rho0 = Field::sample(g, Variable::Density, 2.0, [](const Point& x) { return 0.5 - x.x * x.x; });
  EXPECT_THROW(boundary_velocity(simulate(rho0, cfg), 0.01), Error);
  cfg.t_end = 0.3;
  try {
    boundary_velocity(simulate(rho0, cfg), 10.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BoundaryGap);
  }
}
