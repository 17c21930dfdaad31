#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pmed/error.hpp"

namespace pmed {

/// A point in one or two space dimensions. In 1D the y component is unused
/// and kept at zero.
struct Point {
  double x = 0.0;
  double y = 0.0;

  Point& operator+=(const Point& o) { x += o.x; y += o.y; return *this; }
  Point& operator-=(const Point& o) { x -= o.x; y -= o.y; return *this; }
  Point& operator*=(double s) { x *= s; y *= s; return *this; }
  friend Point operator+(Point a, const Point& b) { return a += b; }
  friend Point operator-(Point a, const Point& b) { return a -= b; }
  friend Point operator*(Point a, double s) { return a *= s; }
  friend Point operator*(double s, Point a) { return a *= s; }
  friend bool operator==(const Point&, const Point&) = default;
};

inline double dot(const Point& a, const Point& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Point& a) { return std::hypot(a.x, a.y); }
inline double distance(const Point& a, const Point& b) { return norm(a - b); }

/// Uniform Cartesian lattice on the box [-L, L]^dim with equal spacing per
/// axis. Cells are stored x-fastest: flat = i + n * j.
class Grid {
 public:
  /// Smallest admissible 1D grid: [-1, 1] with 8 cells.
  Grid() : Grid(1, 1.0, 0.25) {}

  Grid(int dim, double half_width, double spacing) : dim_(dim), L_(half_width), h_(spacing) {
    if (dim != 1 && dim != 2) {
      throw Error(ErrorCode::InvalidParameter, "grid dim must be 1 or 2, got " + std::to_string(dim));
    }
    if (!(spacing > 0.0) || !(half_width > 0.0)) {
      throw Error(ErrorCode::InvalidParameter, "grid spacing and half-width must be positive");
    }
    const double cells = 2.0 * half_width / spacing;
    n_ = static_cast<int>(std::lround(cells));
    if (std::abs(cells - n_) > 1e-9 * cells) {
      throw Error(ErrorCode::InvalidParameter, "2L/h must be an integer cell count");
    }
    if (n_ < 8) {
      throw Error(ErrorCode::InvalidParameter, "grid needs at least 8 cells per axis");
    }
  }

  int dim() const { return dim_; }
  double spacing() const { return h_; }
  double half_width() const { return L_; }
  int cells_per_axis() const { return n_; }
  std::size_t size() const { return dim_ == 1 ? std::size_t(n_) : std::size_t(n_) * std::size_t(n_); }
  double cell_volume() const { return dim_ == 1 ? h_ : h_ * h_; }

  std::size_t flat(int i, int j = 0) const { return std::size_t(i) + std::size_t(n_) * std::size_t(j); }
  int i_of(std::size_t k) const { return static_cast<int>(k % std::size_t(n_)); }
  int j_of(std::size_t k) const { return dim_ == 1 ? 0 : static_cast<int>(k / std::size_t(n_)); }

  double coord(int i) const { return -L_ + (i + 0.5) * h_; }
  Point center(std::size_t k) const {
    return dim_ == 1 ? Point{coord(i_of(k)), 0.0} : Point{coord(i_of(k)), coord(j_of(k))};
  }
  /// Index of the cell containing coordinate x along one axis.
  int index_of(double x) const {
    return std::clamp(static_cast<int>(std::floor((x + L_) / h_)), 0, n_ - 1);
  }

  bool contains(const Point& p) const {
    return std::abs(p.x) <= L_ && (dim_ == 1 || std::abs(p.y) <= L_);
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.dim_ == b.dim_ && a.n_ == b.n_ && a.h_ == b.h_ && a.L_ == b.L_;
  }

 private:
  int dim_;
  double L_;
  double h_;
  int n_ = 0;
};

enum class Variable { Density, Pressure };

inline void check_exponent(double m) {
  if (!(m > 1.0)) {
    throw Error(ErrorCode::InvalidExponent, "exponent m must exceed 1, got " + std::to_string(m));
  }
}

/// One nonnegative value per grid cell, tagged with the variable it stores.
struct Field {
  Grid grid;
  std::vector<double> values;
  Variable variable = Variable::Density;
  double m = 2.0;

  static Field zeros(const Grid& g, Variable v, double m) {
    return Field{g, std::vector<double>(g.size(), 0.0), v, m};
  }

  template <class F>
  static Field sample(const Grid& g, Variable v, double m, F&& f) {
    Field out = zeros(g, v, m);
    for (std::size_t k = 0; k < g.size(); ++k) out.values[k] = std::max(0.0, f(g.center(k)));
    return out;
  }

  double max() const {
    double best = 0.0;
    for (double v : values) best = std::max(best, v);
    return best;
  }

  /// Smallest number of cells between {f > floor} and the box edge;
  /// returns cells_per_axis when that set is empty.
  int margin_to_edge(double floor = 0.0) const {
    const int n = grid.cells_per_axis();
    int best = n;
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (values[k] <= floor) continue;
      const int i = grid.i_of(k);
      best = std::min({best, i, n - 1 - i});
      if (grid.dim() == 2) {
        const int j = grid.j_of(k);
        best = std::min({best, j, n - 1 - j});
      }
    }
    return best;
  }
};

/// u = m/(m-1) rho^(m-1).
inline Field pressure_from_density(const Field& rho, double m) {
  check_exponent(m);
  Field u = Field::zeros(rho.grid, Variable::Pressure, m);
  const double c = m / (m - 1.0);
  for (std::size_t k = 0; k < rho.values.size(); ++k) {
    const double r = rho.values[k];
    if (r < 0.0) throw Error(ErrorCode::InvalidInput, "density must be nonnegative");
    u.values[k] = r > 0.0 ? c * std::pow(r, m - 1.0) : 0.0;
  }
  return u;
}

/// rho = ((m-1)/m u)^(1/(m-1)).
inline Field density_from_pressure(const Field& u, double m) {
  check_exponent(m);
  Field rho = Field::zeros(u.grid, Variable::Density, m);
  const double c = (m - 1.0) / m;
  const double e = 1.0 / (m - 1.0);
  for (std::size_t k = 0; k < u.values.size(); ++k) {
    const double p = u.values[k];
    if (p < 0.0) throw Error(ErrorCode::InvalidInput, "pressure must be nonnegative");
    rho.values[k] = p > 0.0 ? std::pow(c * p, e) : 0.0;
  }
  return rho;
}

inline double pressure_of(double rho, double m) {
  return rho > 0.0 ? m / (m - 1.0) * std::pow(rho, m - 1.0) : 0.0;
}

inline double density_of(double u, double m) {
  return u > 0.0 ? std::pow((m - 1.0) / m * u, 1.0 / (m - 1.0)) : 0.0;
}

/// h^dim * sum of values, accumulated in ascending index order.
inline double integrate(const Field& f) {
  double sum = 0.0;
  for (double v : f.values) sum += v;
  return f.grid.cell_volume() * sum;
}

/// The drift potential Phi together with the metadata the solver and the
/// equilibrium search rely on.
struct Potential {
  std::function<double(const Point&)> eval;
  std::function<Point(const Point&)> grad;
  double hessian_bound = 0.0;
  bool strictly_convex = false;
  std::optional<Point> min_point;
};

inline Potential make_potential(std::function<double(const Point&)> eval,
                                std::function<Point(const Point&)> grad, double hessian_bound,
                                bool strictly_convex, std::optional<Point> min_point = std::nullopt) {
  if (strictly_convex && !min_point) {
    throw Error(ErrorCode::InvalidParameter, "strictly convex potential needs its minimum point");
  }
  return Potential{std::move(eval), std::move(grad), hessian_bound, strictly_convex, min_point};
}

/// Phi(x) = a |x|^2.
inline Potential make_quadratic_potential(double a, int dim) {
  if (!(a > 0.0)) {
    throw Error(ErrorCode::InvalidParameter, "quadratic coefficient a must be positive");
  }
  if (dim != 1 && dim != 2) throw Error(ErrorCode::InvalidParameter, "dim must be 1 or 2");
  return Potential{
      [a](const Point& p) { return a * dot(p, p); },
      [a](const Point& p) { return Point{2.0 * a * p.x, 2.0 * a * p.y}; },
      2.0 * a * dim,
      true,
      Point{},
  };
}

inline Potential make_zero_potential() {
  return Potential{[](const Point&) { return 0.0; }, [](const Point&) { return Point{}; }, 0.0,
                   false, std::nullopt};
}

namespace detail {

inline double poly_eval(const std::vector<double>& c, double x, int deriv) {
  double sum = 0.0;
  for (std::size_t k = c.size(); k-- > std::size_t(deriv);) {
    double factor = 1.0;
    for (int d = 0; d < deriv; ++d) factor *= double(k - std::size_t(d));
    sum = sum * x + factor * c[k];
  }
  return sum;
}

}  // namespace detail

/// Separable polynomial potential Phi(x) = sum over axes of p(x_axis) with
/// p(s) = c0 + c1 s + c2 s^2 + ... . The Hessian bound, convexity and the
/// minimum are determined numerically over [-L, L]^dim.
inline Potential make_polynomial_potential(std::vector<double> coeffs, int dim, double half_width) {
  if (dim != 1 && dim != 2) throw Error(ErrorCode::InvalidParameter, "dim must be 1 or 2");
  if (coeffs.empty()) coeffs.push_back(0.0);
  auto p = [coeffs](double s) { return detail::poly_eval(coeffs, s, 0); };
  auto dp = [coeffs](double s) { return detail::poly_eval(coeffs, s, 1); };
  auto ddp = [coeffs](double s) { return detail::poly_eval(coeffs, s, 2); };

  constexpr int samples = 4001;
  double max_dd = 0.0;
  double min_dd = std::numeric_limits<double>::infinity();
  for (int k = 0; k < samples; ++k) {
    const double s = -half_width + 2.0 * half_width * k / (samples - 1);
    const double v = ddp(s);
    max_dd = std::max(max_dd, std::abs(v));
    min_dd = std::min(min_dd, v);
  }
  const bool convex = min_dd > 0.0;

  std::optional<Point> min_point;
  if (convex) {
    // p' is strictly increasing on the box; bisect its sign change.
    double lo = -half_width, hi = half_width;
    if (dp(lo) >= 0.0) {
      hi = lo;
    } else if (dp(hi) <= 0.0) {
      lo = hi;
    } else {
      for (int it = 0; it < 200 && hi - lo > 1e-15 * half_width; ++it) {
        const double mid = 0.5 * (lo + hi);
        (dp(mid) < 0.0 ? lo : hi) = mid;
      }
    }
    const double s = 0.5 * (lo + hi);
    min_point = dim == 1 ? Point{s, 0.0} : Point{s, s};
  }

  return Potential{
      [p, dim](const Point& x) { return p(x.x) + (dim == 2 ? p(x.y) : 0.0); },
      [dp, dim](const Point& x) { return Point{dp(x.x), dim == 2 ? dp(x.y) : 0.0}; },
      max_dd * dim,
      convex,
      min_point,
  };
}

}  // namespace pmed
