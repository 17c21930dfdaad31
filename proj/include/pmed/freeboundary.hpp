#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pmed/core.hpp"
#include "pmed/solver.hpp"

namespace pmed {

/// Discrete proxy of the free boundary: crossing points of the threshold
/// level on cell-center edges. 1D yields interval endpoints; 2D an
/// unordered point cloud in scan order.
struct BoundarySet {
  std::vector<Point> points;
  double t = 0.0;
  double threshold = 0.0;

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

/// 10 h max|f| / L.
inline double default_support_threshold(const Field& f) {
  return 10.0 * f.grid.spacing() * f.max() / f.grid.half_width();
}

inline double support_threshold_for(const SolverConfig& cfg, const Field& rho0) {
  return cfg.support_threshold.value_or(default_support_threshold(rho0));
}

namespace detail {

/// Calls visit(k_inside_or_first, k_second, crossing_point) for every edge
/// between neighbouring cell centers where f crosses eps.
template <class Visit>
void for_each_crossing(const Field& f, double eps, Visit&& visit) {
  const Grid& g = f.grid;
  const int n = g.cells_per_axis();
  const double h = g.spacing();
  for (std::size_t k = 0; k < g.size(); ++k) {
    const int i = g.i_of(k);
    const int j = g.j_of(k);
    const double a = f.values[k];
    const Point c = g.center(k);
    if (i + 1 < n) {
      const double b = f.values[k + 1];
      if ((a > eps) != (b > eps)) visit(k, k + 1, Point{c.x + h * (eps - a) / (b - a), c.y});
    }
    if (g.dim() == 2 && j + 1 < n) {
      const std::size_t kn = k + std::size_t(n);
      const double b = f.values[kn];
      if ((a > eps) != (b > eps)) visit(k, kn, Point{c.x, c.y + h * (eps - a) / (b - a)});
    }
  }
}

}  // namespace detail

inline BoundarySet extract_boundary(const Field& f, double eps, double t = 0.0) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidParameter, "support threshold must be positive");
  BoundarySet out;
  out.t = t;
  out.threshold = eps;
  detail::for_each_crossing(f, eps, [&](std::size_t, std::size_t, const Point& p) { out.points.push_back(p); });
  return out;
}

namespace detail {

inline double directed_hausdorff(const std::vector<Point>& a, const std::vector<Point>& b) {
  double worst = 0.0;
  for (const Point& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point& q : b) best = std::min(best, distance(p, q));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace detail

inline double hausdorff(const BoundarySet& a, const BoundarySet& b) {
  if (a.empty() || b.empty()) {
    throw Error(ErrorCode::EmptyBoundary, "Hausdorff distance of an empty boundary set");
  }
  return std::max(detail::directed_hausdorff(a.points, b.points),
                  detail::directed_hausdorff(b.points, a.points));
}

// ---------------------------------------------------------------------------
// Equilibria (C - Phi)_+ and the mass condition fixing C.
// ---------------------------------------------------------------------------

struct EquilibriumProfile {
  double C_inf = 0.0;
  Field pressure;
  BoundarySet boundary;
};

inline Field equilibrium_pressure(double C, const Potential& pot, const Grid& grid, double m) {
  return Field::sample(grid, Variable::Pressure, m, [&](const Point& x) { return C - pot.eval(x); });
}

inline double equilibrium_mass(double C, const Potential& pot, const Grid& grid, double m) {
  return integrate(density_from_pressure(equilibrium_pressure(C, pot, grid, m), m));
}

/// Points of the level set {Phi = C} on cell-center edges, each located by
/// bisection on the exact potential along the edge.
inline BoundarySet level_set_points(const Potential& pot, double C, const Grid& grid) {
  BoundarySet out;
  out.threshold = 0.0;
  Field phi = Field::zeros(grid, Variable::Pressure, 2.0);
  for (std::size_t k = 0; k < grid.size(); ++k) phi.values[k] = pot.eval(grid.center(k)) - C;
  const int n = grid.cells_per_axis();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Point a = grid.center(k);
    auto edge = [&](std::size_t kn) {
      const double fa = phi.values[k];
      const double fb = phi.values[kn];
      if ((fa > 0.0) == (fb > 0.0)) return;
      Point lo = a, hi = grid.center(kn);
      if (fa > 0.0) std::swap(lo, hi);
      for (int it = 0; it < 100; ++it) {
        const Point mid = 0.5 * (lo + hi);
        if (distance(lo, hi) < 1e-15 * grid.half_width()) break;
        (pot.eval(mid) - C > 0.0 ? hi : lo) = mid;
      }
      out.points.push_back(0.5 * (lo + hi));
    };
    if (grid.i_of(k) + 1 < n) edge(k + 1);
    if (grid.dim() == 2 && grid.j_of(k) + 1 < n) edge(k + std::size_t(n));
  }
  return out;
}

/// C such that the grid mass of ((m-1)/m (C - Phi)_+)^(1/(m-1)) equals
/// target_mass to 1e-10 relative, by bisection.
inline double equilibrium_constant(double target_mass, const Potential& pot, double m, const Grid& grid) {
  check_exponent(m);
  if (!(target_mass > 0.0)) throw Error(ErrorCode::InvalidParameter, "target mass must be positive");
  if (!pot.strictly_convex || !pot.min_point) {
    throw Error(ErrorCode::UnsupportedPotential, "equilibrium search needs a strictly convex potential");
  }
  const double phi_min = pot.eval(*pot.min_point);
  auto fits = [&](double C) { return equilibrium_pressure(C, pot, grid, m).margin_to_edge() >= 2; };

  double lo = phi_min;
  double hi = phi_min + 1.0;
  while (equilibrium_mass(hi, pot, grid, m) < target_mass) {
    if (!fits(hi)) {
      throw Error(ErrorCode::DomainTooSmall, "equilibrium for the requested mass does not fit in the box");
    }
    lo = hi;
    hi = phi_min + 2.0 * (hi - phi_min);
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 300; ++it) {
    mid = 0.5 * (lo + hi);
    const double mass = equilibrium_mass(mid, pot, grid, m);
    if (std::abs(mass - target_mass) <= 1e-10 * target_mass) break;
    (mass < target_mass ? lo : hi) = mid;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mid))) break;
  }
  if (!fits(mid)) {
    throw Error(ErrorCode::DomainTooSmall, "equilibrium support reaches the box edge");
  }
  return mid;
}

inline EquilibriumProfile compute_equilibrium(double target_mass, const Potential& pot, double m,
                                              const Grid& grid) {
  EquilibriumProfile p;
  p.C_inf = equilibrium_constant(target_mass, pot, m, grid);
  p.pressure = equilibrium_pressure(p.C_inf, pot, grid, m);
  p.boundary = level_set_points(pot, p.C_inf, grid);
  return p;
}

/// True iff C_inf - eps <= Phi(x) <= C_inf + eps at every boundary point.
inline bool sublevel_shell_check(const BoundarySet& bset, const Potential& pot, double C_inf, double eps) {
  for (const Point& x : bset.points) {
    const double v = pot.eval(x);
    if (v < C_inf - eps || v > C_inf + eps) return false;
  }
  return true;
}

/// True iff every boundary point lies in the sublevel set {Phi <= C}.
inline bool within_sublevel(const BoundarySet& bset, const Potential& pot, double C) {
  return std::all_of(bset.points.begin(), bset.points.end(),
                     [&](const Point& x) { return pot.eval(x) <= C; });
}

// ---------------------------------------------------------------------------
// Boundary velocity against the law V = |grad u| + grad Phi . grad u / |grad u|.
// ---------------------------------------------------------------------------

struct BoundaryVelocity {
  Point x{};
  /// Normal displacement speed, positive when the support expands.
  double velocity = 0.0;
  double grad_norm = 0.0;
  Point normal{};
  std::optional<double> law_residual;
};

struct VelocityFrame {
  double t = 0.0;
  std::vector<BoundaryVelocity> points;
};

namespace detail {

/// One-sided pressure gradient at an interior cell, each component taken
/// toward the neighbour with the larger value.
inline Point inward_gradient(const Field& u, std::size_t k) {
  const Grid& g = u.grid;
  const int n = g.cells_per_axis();
  const double h = g.spacing();
  auto component = [&](int pos, std::size_t stride) {
    const double c = u.values[k];
    const double up = pos + 1 < n ? u.values[k + stride] : 0.0;
    const double dn = pos > 0 ? u.values[k - stride] : 0.0;
    return up >= dn ? (up - c) / h : (c - dn) / h;
  };
  Point grad{component(g.i_of(k), 1), 0.0};
  if (g.dim() == 2) grad.y = component(g.j_of(k), std::size_t(n));
  return grad;
}

}  // namespace detail

inline std::vector<VelocityFrame> boundary_velocity(const Trajectory& traj, double eps_fb,
                                                    double grad_floor = 1e-3) {
  if (traj.snapshots.size() < 3) {
    throw Error(ErrorCode::InvalidInput, "boundary velocity needs at least 3 snapshots");
  }
  const double m = traj.config.m;
  const Potential& pot = traj.config.potential;

  std::vector<BoundarySet> sets;
  std::vector<double> gaps;
  for (const auto& s : traj.snapshots) {
    sets.push_back(extract_boundary(s.rho, eps_fb, s.t));
    if (sets.back().empty()) gaps.push_back(s.t);
  }
  if (!gaps.empty()) {
    std::ostringstream os;
    os << "empty boundary at t =";
    for (double t : gaps) os << ' ' << t;
    throw Error(ErrorCode::BoundaryGap, os.str());
  }

  std::vector<VelocityFrame> frames;
  for (std::size_t s = 1; s < traj.snapshots.size(); ++s) {
    const auto& snap = traj.snapshots[s];
    const double dt = snap.t - traj.snapshots[s - 1].t;
    const Field u = pressure_from_density(snap.rho, m);
    VelocityFrame frame;
    frame.t = snap.t;
    detail::for_each_crossing(snap.rho, eps_fb, [&](std::size_t a, std::size_t b, const Point& p) {
      const std::size_t inside = snap.rho.values[a] > eps_fb ? a : b;
      const Point grad = detail::inward_gradient(u, inside);
      const double gn = norm(grad);

      const Point* nearest = nullptr;
      double best = std::numeric_limits<double>::infinity();
      for (const Point& q : sets[s - 1].points) {
        const double d = distance(p, q);
        if (d < best) {
          best = d;
          nearest = &q;
        }
      }
      BoundaryVelocity bv;
      bv.x = p;
      bv.grad_norm = gn;
      if (gn > 0.0) bv.normal = grad * (-1.0 / gn);
      bv.velocity = dot(p - *nearest, bv.normal) / dt;
      if (gn > grad_floor) {
        bv.law_residual = bv.velocity - (gn + dot(pot.grad(p), grad) / gn);
      }
      frame.points.push_back(bv);
    });
    frames.push_back(std::move(frame));
  }
  return frames;
}

}  // namespace pmed
