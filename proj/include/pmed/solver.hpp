#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pmed/core.hpp"

namespace pmed {

struct SolverConfig {
  double m = 2.0;
  Potential potential = make_zero_potential();
  double cfl_safety = 0.4;
  double t_end = 1.0;
  double snapshot_every = 0.1;
  /// Free-boundary detection level; unset means 10 h max(rho0) / L.
  std::optional<double> support_threshold;

  void validate() const {
    check_exponent(m);
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) {
      throw Error(ErrorCode::InvalidParameter, "cfl_safety must lie in (0, 1]");
    }
    if (!(t_end > 0.0)) throw Error(ErrorCode::InvalidParameter, "t_end must be positive");
    if (!(snapshot_every > 0.0)) {
      throw Error(ErrorCode::InvalidParameter, "snapshot_every must be positive");
    }
    if (support_threshold && !(*support_threshold > 0.0)) {
      throw Error(ErrorCode::InvalidParameter, "support_threshold must be positive");
    }
  }
};

struct Snapshot {
  double t = 0.0;
  Field rho;
  double mass = 0.0;
  /// Mass removed by clipping negative round-off, cumulative up to t.
  double clipped_mass = 0.0;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  SolverConfig config;
  double max_dt = 0.0;
  std::size_t steps = 0;

  const Snapshot& initial() const { return snapshots.front(); }
  const Snapshot& final() const { return snapshots.back(); }
};

struct StepResult {
  Field rho;
  double clipped_mass = 0.0;
};

/// Upper bound on worker threads, read from PMED_THREADS (default 2).
inline int max_threads() {
  if (const char* env = std::getenv("PMED_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 2;
}

namespace detail {

/// Potential sampled on cell centers plus interface difference quotients
/// (Phi_{i+1} - Phi_i) / h per axis. Entry k of an axis array refers to the
/// interface between cell k and its successor along that axis.
struct DriftTable {
  std::vector<double> phi;
  std::vector<double> gx;
  std::vector<double> gy;
  std::vector<double> grad_norm;
};

inline DriftTable make_drift_table(const Grid& g, const Potential& pot) {
  DriftTable d;
  const std::size_t size = g.size();
  const int n = g.cells_per_axis();
  const double h = g.spacing();
  d.phi.resize(size);
  d.grad_norm.resize(size);
  for (std::size_t k = 0; k < size; ++k) {
    const Point x = g.center(k);
    d.phi[k] = pot.eval(x);
    d.grad_norm[k] = norm(pot.grad(x));
  }
  d.gx.assign(size, 0.0);
  if (g.dim() == 2) d.gy.assign(size, 0.0);
  for (std::size_t k = 0; k < size; ++k) {
    const int i = g.i_of(k);
    const int j = g.j_of(k);
    if (i + 1 < n) d.gx[k] = (d.phi[k + 1] - d.phi[k]) / h;
    if (g.dim() == 2 && j + 1 < n) d.gy[k] = (d.phi[k + std::size_t(n)] - d.phi[k]) / h;
  }
  return d;
}

constexpr double kTinySpeed = 1e-300;

/// Cells below this fraction of the peak density do not count as support
/// for the box-edge guard.
constexpr double kSupportFloor = 1e-12;

inline int support_margin(const Field& rho) { return rho.margin_to_edge(kSupportFloor * rho.max()); }

inline double stable_dt(const Field& rho, double m, double safety, const DriftTable& drift) {
  const Grid& g = rho.grid;
  const int n = g.cells_per_axis();
  const double h = g.spacing();
  double d_max = 0.0;
  double v_max = 0.0;
  for (std::size_t k = 0; k < rho.values.size(); ++k) {
    const double r = rho.values[k];
    if (r <= 0.0) continue;
    d_max = std::max(d_max, m * std::pow(r, m - 1.0));
    v_max = std::max(v_max, drift.grad_norm[k]);
    const int i = g.i_of(k);
    if (i + 1 < n) v_max = std::max(v_max, std::abs(drift.gx[k]));
    if (i > 0) v_max = std::max(v_max, std::abs(drift.gx[k - 1]));
    if (g.dim() == 2) {
      const int j = g.j_of(k);
      if (j + 1 < n) v_max = std::max(v_max, std::abs(drift.gy[k]));
      if (j > 0) v_max = std::max(v_max, std::abs(drift.gy[k - std::size_t(n)]));
    }
  }
  v_max = std::max(v_max, kTinySpeed);
  const double two_dim = 2.0 * g.dim();
  const double diffusive = d_max > 0.0 ? h * h / (two_dim * d_max)
                                       : std::numeric_limits<double>::infinity();
  const double advective = h / (two_dim * v_max);
  return safety * std::min(diffusive, advective);
}

inline void accumulate_fluxes(const Field& rho, const std::vector<double>& q,
                              const std::vector<double>& drift, std::size_t stride, double dt,
                              std::vector<double>& out) {
  const Grid& g = rho.grid;
  const int n = g.cells_per_axis();
  const double h = g.spacing();
  const double lambda = dt / h;
  for (std::size_t k = 0; k < rho.values.size(); ++k) {
    const int pos = stride == 1 ? g.i_of(k) : g.j_of(k);
    if (pos + 1 >= n) continue;
    const std::size_t kn = k + stride;
    const double a = rho.values[k];
    const double b = rho.values[kn];
    if (a == 0.0 && b == 0.0) continue;
    const double slope = drift[k];
    const double upwind = slope > 0.0 ? b : a;
    const double flux = (q[kn] - q[k]) / h + upwind * slope;
    out[k] += lambda * flux;
    out[kn] -= lambda * flux;
  }
}

inline StepResult step_with_table(const Field& rho, double m, double safety, double dt,
                                  const DriftTable& drift) {
  if (support_margin(rho) < 2) {
    throw Error(ErrorCode::DomainOverflow, "density support within 2 cells of the box edge");
  }
  const double limit = stable_dt(rho, m, safety, drift);
  if (!(dt > 0.0) || dt > limit * (1.0 + 1e-12)) {
    std::ostringstream os;
    os.precision(17);
    os << "time step " << dt << " exceeds CFL limit " << limit;
    throw Error(ErrorCode::StepTooLarge, os.str());
  }
  const Grid& g = rho.grid;
  std::vector<double> q(rho.values.size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double r = rho.values[k];
    q[k] = r > 0.0 ? std::pow(r, m) : 0.0;
  }
  StepResult res{rho, 0.0};
  accumulate_fluxes(rho, q, drift.gx, 1, dt, res.rho.values);
  if (g.dim() == 2) {
    accumulate_fluxes(rho, q, drift.gy, std::size_t(g.cells_per_axis()), dt, res.rho.values);
  }
  double clipped = 0.0;
  for (double& v : res.rho.values) {
    if (v < 0.0) {
      clipped -= v;
      v = 0.0;
    }
  }
  res.clipped_mass = clipped * g.cell_volume();
  return res;
}

}  // namespace detail

/// Largest admissible explicit step, capped at the snapshot interval.
inline double cfl_dt(const Field& rho, const SolverConfig& cfg) {
  const auto drift = detail::make_drift_table(rho.grid, cfg.potential);
  return std::min(detail::stable_dt(rho, cfg.m, cfg.cfl_safety, drift), cfg.snapshot_every);
}

/// One explicit upwind finite-volume step of rho_t = div(grad(rho^m) + rho grad Phi).
/// Negative round-off is clipped to zero and reported as clipped_mass.
inline StepResult step_density(const Field& rho, const SolverConfig& cfg, double dt) {
  check_exponent(cfg.m);
  const auto drift = detail::make_drift_table(rho.grid, cfg.potential);
  return detail::step_with_table(rho, cfg.m, cfg.cfl_safety, dt, drift);
}

/// Integrates up to the last multiple of snapshot_every not exceeding t_end,
/// recording a snapshot at t = 0 and at every multiple.
inline Trajectory simulate(const Field& rho0, const SolverConfig& cfg) {
  cfg.validate();
  if (detail::support_margin(rho0) < 2) {
    throw Error(ErrorCode::DomainOverflow, "initial density support reaches the box edge");
  }
  const auto drift = detail::make_drift_table(rho0.grid, cfg.potential);
  Trajectory traj;
  traj.config = cfg;
  Field rho = rho0;
  rho.variable = Variable::Density;
  rho.m = cfg.m;
  traj.snapshots.push_back(Snapshot{0.0, rho, integrate(rho), 0.0});

  const auto count = static_cast<long>(std::floor(cfg.t_end / cfg.snapshot_every * (1.0 + 1e-12)));
  double t = 0.0;
  double clipped = 0.0;
  for (long k = 1; k <= count; ++k) {
    const double target = double(k) * cfg.snapshot_every;
    while (t < target) {
      double dt = detail::stable_dt(rho, cfg.m, cfg.cfl_safety, drift);
      const bool last = dt >= target - t;
      if (last) dt = target - t;
      try {
        auto res = detail::step_with_table(rho, cfg.m, cfg.cfl_safety, dt, drift);
        rho = std::move(res.rho);
        clipped += res.clipped_mass;
      } catch (const Error& e) {
        std::ostringstream os;
        os.precision(10);
        os << e.what() << " (at t=" << t << ")";
        throw Error(e.code(), os.str());
      }
      traj.max_dt = std::max(traj.max_dt, dt);
      ++traj.steps;
      t = last ? target : t + dt;
    }
    traj.snapshots.push_back(Snapshot{target, rho, integrate(rho), clipped});
  }
  return traj;
}

/// A smooth space-time test function with analytic derivatives.
struct TestFunction {
  std::function<double(const Point&, double)> value;
  std::function<double(const Point&, double)> time_derivative;
  std::function<Point(const Point&, double)> gradient;
  std::function<double(const Point&, double)> laplacian;
};

inline TestFunction constant_test_function(double c = 1.0) {
  return TestFunction{
      [c](const Point&, double) { return c; },
      [](const Point&, double) { return 0.0; },
      [](const Point&, double) { return Point{}; },
      [](const Point&, double) { return 0.0; },
  };
}

/// |int rho(T) phi(T) - int rho(0) phi(0) - int_0^T int (rho phi_t + rho^m lap phi - rho grad Phi . grad phi)|
/// with midpoint quadrature in space and the trapezoid rule over snapshots.
inline double weak_residual(const Trajectory& traj, const TestFunction& phi) {
  if (traj.snapshots.empty()) throw Error(ErrorCode::InvalidInput, "empty trajectory");
  const Grid& g = traj.initial().rho.grid;
  const double m = traj.config.m;
  std::vector<Point> grad_pot(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) grad_pot[k] = traj.config.potential.grad(g.center(k));

  auto pairing = [&](const Snapshot& s) {
    double sum = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double r = s.rho.values[k];
      if (r != 0.0) sum += r * phi.value(g.center(k), s.t);
    }
    return sum * g.cell_volume();
  };
  auto bulk = [&](const Snapshot& s) {
    double sum = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double r = s.rho.values[k];
      if (r == 0.0) continue;
      const Point x = g.center(k);
      sum += r * phi.time_derivative(x, s.t) + std::pow(r, m) * phi.laplacian(x, s.t) -
             r * dot(grad_pot[k], phi.gradient(x, s.t));
    }
    return sum * g.cell_volume();
  };

  double space_time = 0.0;
  double prev = bulk(traj.snapshots.front());
  for (std::size_t s = 1; s < traj.snapshots.size(); ++s) {
    const double cur = bulk(traj.snapshots[s]);
    space_time += 0.5 * (traj.snapshots[s].t - traj.snapshots[s - 1].t) * (prev + cur);
    prev = cur;
  }
  return std::abs(pairing(traj.final()) - pairing(traj.initial()) - space_time);
}

struct ComparisonReport {
  bool ordered = true;
  /// Worst value of max(rho_lo - rho_hi) over all snapshots; negative when
  /// the runs are strictly ordered everywhere.
  double max_violation = 0.0;
  std::optional<double> first_violation_time;
  double tol_order = 0.0;
  std::vector<std::pair<double, double>> per_snapshot;
};

/// Runs both initial data forward and checks rho_lo <= rho_hi + tol_order at
/// every snapshot, with tol_order = 10 (h + max dt).
inline ComparisonReport comparison_harness(const Field& rho0_lo, const Field& rho0_hi,
                                           const SolverConfig& cfg) {
  if (!(rho0_lo.grid == rho0_hi.grid)) {
    throw Error(ErrorCode::InvalidInput, "comparison inputs live on different grids");
  }
  for (std::size_t k = 0; k < rho0_lo.values.size(); ++k) {
    if (rho0_lo.values[k] > rho0_hi.values[k]) {
      std::ostringstream os;
      os << "lower initial density exceeds upper one at cell " << k;
      throw Error(ErrorCode::InvalidInput, os.str());
    }
  }
  Trajectory lo, hi;
  if (max_threads() > 1) {
    auto fut = std::async(std::launch::async, [&] { return simulate(rho0_hi, cfg); });
    lo = simulate(rho0_lo, cfg);
    hi = fut.get();
  } else {
    lo = simulate(rho0_lo, cfg);
    hi = simulate(rho0_hi, cfg);
  }

  ComparisonReport rep;
  rep.tol_order = 10.0 * (rho0_lo.grid.spacing() + std::max(lo.max_dt, hi.max_dt));
  rep.max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < lo.snapshots.size(); ++s) {
    const auto& a = lo.snapshots[s].rho.values;
    const auto& b = hi.snapshots[s].rho.values;
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, a[k] - b[k]);
    rep.per_snapshot.emplace_back(lo.snapshots[s].t, worst);
    rep.max_violation = std::max(rep.max_violation, worst);
    if (worst > rep.tol_order) {
      rep.ordered = false;
      if (!rep.first_violation_time) rep.first_violation_time = lo.snapshots[s].t;
    }
  }
  return rep;
}

}  // namespace pmed
