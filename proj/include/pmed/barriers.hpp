#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pmed/core.hpp"

namespace pmed {

/// A scalar function of space and time.
using Evaluable = std::function<double(const Point&, double)>;

enum class BarrierKind { Barenblatt, SphericalWave, RescaledBarenblatt, RescaledWave };

/// Localization data for the hyperbolic rescaling around (x0, t0).
struct RescaleParams {
  double alpha = 0.1;
  Point x0{};
  double t0 = 0.0;
  /// Drift frozen at x0, i.e. grad Phi(x0).
  Point b{};
  /// Perturbation constant multiplying alpha inside the sup/inf convolution.
  double C_pert = 1.0;
};

struct BarrierSpec {
  BarrierKind kind = BarrierKind::Barenblatt;
  double m = 2.0;
  int dim = 1;
  // Barenblatt
  double tau = 1.0;
  double C = 1.0;
  // spherical wave A (|x| + omega t - B)_+ valid on |x| <= R
  double A = 1.0;
  double omega = 2.0;
  double B = 0.6;
  double R = 1.0;
  RescaleParams rescale{};

  double lambda() const { return 1.0 / ((m - 1.0) * dim + 2.0); }
  double K() const { return 0.5 * lambda(); }

  static BarrierSpec barenblatt(double tau, double C, double m, int dim) {
    BarrierSpec s;
    s.kind = BarrierKind::Barenblatt;
    s.tau = tau;
    s.C = C;
    s.m = m;
    s.dim = dim;
    return s;
  }

  static BarrierSpec spherical_wave(double A, double omega, double B, double R, double m, int dim) {
    BarrierSpec s;
    s.kind = BarrierKind::SphericalWave;
    s.A = A;
    s.omega = omega;
    s.B = B;
    s.R = R;
    s.m = m;
    s.dim = dim;
    return s;
  }
};

/// Localization around x0 with the drift and perturbation constant taken
/// from the potential: b = grad Phi(x0), C_pert = hessian_bound + 1.
inline RescaleParams localize(const Potential& pot, Point x0, double t0, double alpha) {
  return RescaleParams{alpha, x0, t0, pot.grad(x0), pot.hessian_bound + 1.0};
}

// ---------------------------------------------------------------------------
// Barenblatt profiles, pressure form:
//   B(x, t) = (C (t + tau)^(2 lambda) - K |x|^2)_+ / (t + tau),
//   lambda = 1 / ((m - 1) d + 2),  K = lambda / 2.
// ---------------------------------------------------------------------------

inline double barenblatt(const Point& x, double t, const BarrierSpec& spec) {
  const double s = t + spec.tau;
  if (!(s > 0.0)) {
    throw Error(ErrorCode::InvalidTime, "Barenblatt profile needs t + tau > 0");
  }
  const double v = spec.C * std::pow(s, 2.0 * spec.lambda()) - spec.K() * dot(x, x);
  return v > 0.0 ? v / s : 0.0;
}

inline double barenblatt_density(const Point& x, double t, const BarrierSpec& spec) {
  return density_of(barenblatt(x, t, spec), spec.m);
}

inline double barenblatt_radius(double t, const BarrierSpec& spec) {
  return std::sqrt(spec.C / spec.K()) * std::pow(t + spec.tau, spec.lambda());
}

/// d/dt of the support radius.
inline double barenblatt_radius_rate(double t, const BarrierSpec& spec) {
  const double l = spec.lambda();
  return l * std::sqrt(spec.C / spec.K()) * std::pow(t + spec.tau, l - 1.0);
}

/// |grad B| evaluated on the free boundary |x| = r(t).
inline double barenblatt_boundary_gradient(double t, const BarrierSpec& spec) {
  return 2.0 * spec.K() * barenblatt_radius(t, spec) / (t + spec.tau);
}

/// Total density mass of the Barenblatt profile at time t (closed form).
inline double barenblatt_mass(double t, const BarrierSpec& spec) {
  // rho = (c (a - K r^2)/s)^(1/(m-1)) with c = (m-1)/m, a = C s^(2 lambda).
  const double s = t + spec.tau;
  const double e = 1.0 / (spec.m - 1.0);
  const double amp = std::pow((spec.m - 1.0) / spec.m * spec.C * std::pow(s, 2.0 * spec.lambda()) / s, e);
  const double r = barenblatt_radius(t, spec);
  // int_{|x|<r} (1 - |x|^2/r^2)^e dx
  const double shape = spec.dim == 1
                           ? r * std::sqrt(std::numbers::pi) * std::tgamma(e + 1.0) / std::tgamma(e + 1.5)
                           : std::numbers::pi * r * r / (e + 1.0);
  return amp * shape;
}

// ---------------------------------------------------------------------------
// Spherical traveling waves H = A (|x| + omega t - B)_+.
// ---------------------------------------------------------------------------

inline double spherical_wave(const Point& x, double t, const BarrierSpec& spec) {
  return spec.A * std::max(0.0, norm(x) + spec.omega * t - spec.B);
}

/// True iff R/2 < B < R and omega/A > 1 + 2 (m-1)(n-1)(R-B)/R.
inline bool validate_wave_params(double A, double omega, double B, double R, double m, int n) {
  if (!(R > 0.0)) throw Error(ErrorCode::InvalidParameter, "wave radius R must be positive");
  if (!(B > 0.5 * R && B < R)) return false;
  if (!(A > 0.0 && omega > 0.0)) return false;
  return omega / A > 1.0 + 2.0 * (m - 1.0) * (n - 1) * (R - B) / R;
}

inline bool validate_wave_params(const BarrierSpec& s) {
  return validate_wave_params(s.A, s.omega, s.B, s.R, s.m, s.dim);
}

// ---------------------------------------------------------------------------
// Sup / inf convolutions over the shrinking ball B_{alpha (1 - t)}(x).
// ---------------------------------------------------------------------------

namespace detail {

template <class F>
double golden_maximize(F&& f, double a, double b, double& arg) {
  constexpr double g = 0.6180339887498949;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 80 && b - a > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  if (fc >= fd) {
    arg = c;
    return fc;
  }
  arg = d;
  return fd;
}

/// max over |y - x| <= r of sign * u(y, t), by lattice sampling (spacing
/// `spacing`, including the center and the sphere) followed by a local
/// refinement of the best sample.
inline double ball_extremum(const Evaluable& u, const Point& x, double t, double r, int dim,
                            double spacing, double sign) {
  auto f = [&](const Point& y) { return sign * u(y, t); };
  double best = f(x);
  if (r <= 0.0) return best;
  const int kmax = static_cast<int>(std::floor(r / spacing));

  if (dim == 1) {
    double best_y = x.x;
    auto consider = [&](double y) {
      const double v = f(Point{y, 0.0});
      if (v > best) {
        best = v;
        best_y = y;
      }
    };
    for (int k = -kmax; k <= kmax; ++k) {
      if (k != 0) consider(x.x + k * spacing);
    }
    consider(x.x - r);
    consider(x.x + r);
    const double a = std::max(x.x - r, best_y - spacing);
    const double b = std::min(x.x + r, best_y + spacing);
    double arg = best_y;
    const double refined = golden_maximize([&](double y) { return f(Point{y, 0.0}); }, a, b, arg);
    return std::max({best, refined, f(Point{a, 0.0}), f(Point{b, 0.0})});
  }

  Point best_y = x;
  for (int i = -kmax; i <= kmax; ++i) {
    for (int j = -kmax; j <= kmax; ++j) {
      if (i == 0 && j == 0) continue;
      const Point off{i * spacing, j * spacing};
      if (dot(off, off) > r * r) continue;
      const Point y = x + off;
      const double v = f(y);
      if (v > best) {
        best = v;
        best_y = y;
      }
    }
  }
  const int n_angles = std::max(16, static_cast<int>(std::ceil(2.0 * std::numbers::pi * r / spacing)));
  const double dtheta = 2.0 * std::numbers::pi / n_angles;
  double best_sphere = -std::numeric_limits<double>::infinity();
  double best_theta = 0.0;
  auto on_sphere = [&](double th) { return f(Point{x.x + r * std::cos(th), x.y + r * std::sin(th)}); };
  for (int k = 0; k < n_angles; ++k) {
    const double v = on_sphere(k * dtheta);
    if (v > best_sphere) {
      best_sphere = v;
      best_theta = k * dtheta;
    }
  }
  double arg = best_theta;
  best_sphere = std::max(best_sphere, golden_maximize(on_sphere, best_theta - dtheta, best_theta + dtheta, arg));

  // Compass search from the best interior sample, projected onto the ball.
  double step = 0.5 * spacing;
  double cur = best;
  Point y = best_y;
  const double stop = 1e-13 * std::max(1.0, r);
  while (step > stop) {
    bool moved = false;
    for (const Point dir : {Point{1, 0}, Point{-1, 0}, Point{0, 1}, Point{0, -1}}) {
      Point cand = y + dir * step;
      const Point off = cand - x;
      const double len = norm(off);
      if (len > r) cand = x + off * (r / len);
      const double v = f(cand);
      if (v > cur) {
        cur = v;
        y = cand;
        moved = true;
      }
    }
    if (!moved) step *= 0.5;
  }
  return std::max({best, cur, best_sphere});
}

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::InvalidParameter, "convolution parameter alpha must lie in (0, 1)");
  }
}

}  // namespace detail

/// e^{-alpha t} sup_{|y - x| <= alpha (1 - t)} u(y, t)
inline Evaluable sup_convolution(Evaluable u, double alpha, int dim, double spacing) {
  detail::check_alpha(alpha);
  return [u = std::move(u), alpha, dim, spacing](const Point& x, double t) {
    const double r = alpha * (1.0 - t);
    return std::exp(-alpha * t) * detail::ball_extremum(u, x, t, r, dim, spacing, 1.0);
  };
}

/// e^{alpha t} inf_{|y - x| <= alpha (1 - t)} u(y, t)
inline Evaluable inf_convolution(Evaluable u, double alpha, int dim, double spacing) {
  detail::check_alpha(alpha);
  return [u = std::move(u), alpha, dim, spacing](const Point& x, double t) {
    const double r = alpha * (1.0 - t);
    return -std::exp(alpha * t) * detail::ball_extremum(u, x, t, r, dim, spacing, -1.0);
  };
}

/// u(x, t) = alpha w((x - x0 + b (t - t0)) / alpha, (t - t0) / alpha), defined
/// on the cylinder B_alpha(x0) x [t0 - alpha, t0]. Preserves gradients and
/// boundary velocities; scales amplitudes by alpha.
inline Evaluable hyperbolic_rescale(Evaluable w, const RescaleParams& p) {
  if (!(p.alpha > 0.0 && p.alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidParameter, "rescaling alpha must lie in (0, 1]");
  }
  return [w = std::move(w), p](const Point& x, double t) {
    const double slack = 1e-12 * (1.0 + p.alpha);
    if (distance(x, p.x0) > p.alpha + slack || t < p.t0 - p.alpha - slack || t > p.t0 + slack) {
      std::ostringstream os;
      os << "evaluation at (" << x.x << ", " << x.y << ", t=" << t << ") outside the rescaling cylinder";
      throw Error(ErrorCode::OutOfCylinder, os.str());
    }
    const double s = (t - p.t0) / p.alpha;
    const Point xi = (x - p.x0 + p.b * (t - p.t0)) * (1.0 / p.alpha);
    return p.alpha * w(xi, s);
  };
}

/// Closed-form evaluable for any barrier kind. Rescaled kinds wrap the unit
/// scale profile in a sup (Barenblatt) or inf (wave) convolution with
/// parameter C_pert * alpha before rescaling; `spacing` is the ball
/// sampling lattice of those convolutions.
inline Evaluable make_barrier(const BarrierSpec& spec, double spacing = 0.05) {
  switch (spec.kind) {
    case BarrierKind::Barenblatt:
      return [spec](const Point& x, double t) { return barenblatt(x, t, spec); };
    case BarrierKind::SphericalWave:
      return [spec](const Point& x, double t) { return spherical_wave(x, t, spec); };
    case BarrierKind::RescaledBarenblatt: {
      BarrierSpec s = spec;
      s.kind = BarrierKind::Barenblatt;
      return hyperbolic_rescale(sup_convolution(make_barrier(s), spec.rescale.C_pert * spec.rescale.alpha, spec.dim, spacing),
                                spec.rescale);
    }
    case BarrierKind::RescaledWave: {
      BarrierSpec s = spec;
      s.kind = BarrierKind::SphericalWave;
      return hyperbolic_rescale(inf_convolution(make_barrier(s), spec.rescale.C_pert * spec.rescale.alpha, spec.dim, spacing),
                                spec.rescale);
    }
  }
  throw Error(ErrorCode::InvalidParameter, "unknown barrier kind");
}

// ---------------------------------------------------------------------------
// Pointwise residual of the pressure equation
//   u_t = (m-1) u lap u + |grad u|^2 + grad u . grad Phi + (m-1) u lap Phi
// and of the free-boundary law u_t = |grad u|^2 + grad Phi . grad u.
// ---------------------------------------------------------------------------

enum class SolutionKind { Sub, Super };

/// Space-time sampling region: the box [lo, hi] (y ignored in 1D) times
/// [t_lo, t_hi], optionally intersected with a ball.
struct SpaceTimeBox {
  int dim = 1;
  Point lo{};
  Point hi{};
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::optional<Point> ball_center;
  double ball_radius = 0.0;
};

struct ResidualOptions {
  int time_samples = 5;
  /// Absolute tolerance factor: tol = C_tol * h_s. Defaults to
  /// 50 (1 + max(|u| + |grad u|) over the samples).
  std::optional<double> C_tol;
  /// Separates interior samples from the boundary collar; default 10 h_s.
  std::optional<double> u_floor;
  double grad_floor = 1e-6;
};

struct ResidualSample {
  Point x{};
  double t = 0.0;
  double u = 0.0;
  /// Interior: PDE residual. Boundary: u_t - |grad u|^2 - grad Phi . grad u.
  double residual = 0.0;
  /// Boundary samples only: V - (|grad u| + grad Phi . grad u / |grad u|).
  double velocity_residual = 0.0;
  bool boundary = false;
};

struct ResidualReport {
  SolutionKind kind = SolutionKind::Super;
  std::vector<ResidualSample> samples;
  std::size_t interior_count = 0;
  std::size_t boundary_count = 0;
  double max_interior = 0.0;
  double min_interior = 0.0;
  double max_boundary = 0.0;
  double min_boundary = 0.0;
  double max_velocity = 0.0;
  double min_velocity = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

inline ResidualReport residual_pmed(const Evaluable& candidate, const Potential& pot, double m,
                                    SolutionKind kind, const SpaceTimeBox& box, double h_s,
                                    const ResidualOptions& opt = {}) {
  check_exponent(m);
  if (!(h_s > 0.0)) throw Error(ErrorCode::InvalidParameter, "sampling step must be positive");
  const int dim = box.dim;
  const double u_floor = opt.u_floor.value_or(10.0 * h_s);
  const double ht = h_s * h_s;

  std::vector<double> times;
  const double ta = box.t_lo + ht;
  const double tb = box.t_hi - ht;
  const int nt = std::max(1, opt.time_samples);
  for (int k = 0; k < nt; ++k) times.push_back(nt == 1 ? 0.5 * (ta + tb) : ta + (tb - ta) * k / (nt - 1));

  auto axis_points = [&](double lo, double hi) {
    std::vector<double> pts;
    for (double x = lo + h_s; x <= hi - h_s + 1e-12 * h_s; x += h_s) pts.push_back(x);
    return pts;
  };
  const auto xs = axis_points(box.lo.x, box.hi.x);
  const auto ys = dim == 2 ? axis_points(box.lo.y, box.hi.y) : std::vector<double>{0.0};

  auto lap_potential = [&](const Point& x) {
    double lap = (pot.grad(x + Point{h_s, 0}).x - pot.grad(x - Point{h_s, 0}).x) / (2.0 * h_s);
    if (dim == 2) lap += (pot.grad(x + Point{0, h_s}).y - pot.grad(x - Point{0, h_s}).y) / (2.0 * h_s);
    return lap;
  };

  ResidualReport rep;
  rep.kind = kind;
  double bound = 0.0;
  for (double t : times) {
    for (double y : ys) {
      for (double xv : xs) {
        const Point x{xv, y};
        if (box.ball_center && distance(x, *box.ball_center) + h_s > box.ball_radius) continue;
        const double u0 = candidate(x, t);
        if (u0 <= 0.0) continue;
        const double uxp = candidate(x + Point{h_s, 0}, t);
        const double uxm = candidate(x - Point{h_s, 0}, t);
        const double utp = candidate(x, t + ht);
        const double utm = candidate(x, t - ht);
        double uyp = 1.0, uym = 1.0;
        if (dim == 2) {
          uyp = candidate(x + Point{0, h_s}, t);
          uym = candidate(x - Point{0, h_s}, t);
        }
        if (uxp <= 0.0 || uxm <= 0.0 || uyp <= 0.0 || uym <= 0.0 || utp <= 0.0 || utm <= 0.0) continue;

        Point grad{(uxp - uxm) / (2.0 * h_s), dim == 2 ? (uyp - uym) / (2.0 * h_s) : 0.0};
        double lap = (uxp - 2.0 * u0 + uxm) / (h_s * h_s);
        if (dim == 2) lap += (uyp - 2.0 * u0 + uym) / (h_s * h_s);
        const double ut = (utp - utm) / (2.0 * ht);
        const Point gphi = pot.grad(x);
        const double g2 = dot(grad, grad);
        bound = std::max(bound, u0 + std::sqrt(g2));

        ResidualSample s{x, t, u0};
        if (u0 > u_floor) {
          s.residual = ut - (m - 1.0) * u0 * lap - g2 - dot(grad, gphi) - (m - 1.0) * u0 * lap_potential(x);
          rep.max_interior = rep.interior_count ? std::max(rep.max_interior, s.residual) : s.residual;
          rep.min_interior = rep.interior_count ? std::min(rep.min_interior, s.residual) : s.residual;
          ++rep.interior_count;
        } else {
          const double gn = std::sqrt(g2);
          if (gn <= opt.grad_floor) continue;
          s.boundary = true;
          s.residual = ut - g2 - dot(gphi, grad);
          s.velocity_residual = s.residual / gn;
          const bool first = rep.boundary_count == 0;
          rep.max_boundary = first ? s.residual : std::max(rep.max_boundary, s.residual);
          rep.min_boundary = first ? s.residual : std::min(rep.min_boundary, s.residual);
          rep.max_velocity = first ? s.velocity_residual : std::max(rep.max_velocity, s.velocity_residual);
          rep.min_velocity = first ? s.velocity_residual : std::min(rep.min_velocity, s.velocity_residual);
          ++rep.boundary_count;
        }
        rep.samples.push_back(s);
      }
    }
  }

  rep.tolerance = opt.C_tol.value_or(50.0 * (1.0 + bound)) * h_s;
  if (rep.samples.empty()) {
    rep.passed = false;
    return rep;
  }
  if (kind == SolutionKind::Sub) {
    rep.passed = (rep.interior_count == 0 || rep.max_interior <= rep.tolerance) &&
                 (rep.boundary_count == 0 || rep.max_boundary <= rep.tolerance);
  } else {
    rep.passed = (rep.interior_count == 0 || rep.min_interior >= -rep.tolerance) &&
                 (rep.boundary_count == 0 || rep.min_boundary >= -rep.tolerance);
  }
  return rep;
}

}  // namespace pmed
