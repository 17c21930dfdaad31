#pragma once

// Batch front end: JSON experiment configs in, CSV files out.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pmed/barriers.hpp"
#include "pmed/core.hpp"
#include "pmed/freeboundary.hpp"
#include "pmed/solver.hpp"

namespace pmed::cli {

using nlohmann::json;

enum class Command { Simulate, Equilibrium, VerifyBarriers, Compare, Convergence };

inline std::string_view command_name(Command c) {
  switch (c) {
    case Command::Simulate: return "simulate";
    case Command::Equilibrium: return "equilibrium";
    case Command::VerifyBarriers: return "verify-barriers";
    case Command::Compare: return "compare";
    case Command::Convergence: return "convergence";
  }
  return "simulate";
}

inline std::optional<Command> parse_command(std::string_view s) {
  for (Command c : {Command::Simulate, Command::Equilibrium, Command::VerifyBarriers, Command::Compare,
                    Command::Convergence}) {
    if (command_name(c) == s) return c;
  }
  return std::nullopt;
}

struct GridConfig {
  int dim = 1;
  double L = 4.0;
  double h = 0.05;
};

struct PotentialConfig {
  std::string kind = "quadratic";
  double a = 1.0;
  std::vector<double> coefficients;
};

struct InitialConfig {
  std::string kind = "bump";
  // barenblatt
  double tau = 1.0;
  double C = 1.0;
  // bump: height (1 - |x - center|^2 / radius^2)_+
  Point center{};
  double radius = 1.0;
  double height = 1.0;
  // equilibrium-offset: pressure (1 + offset) (C - Phi)_+
  double offset = 0.0;
};

struct SolverSection {
  double cfl_safety = 0.4;
  double t_end = 1.0;
  std::optional<double> snapshot_every;
  std::optional<double> eps_fb;
};

struct OutputConfig {
  std::string directory = ".";
  std::vector<std::string> formats{"csv"};
};

struct BarrierEntry {
  std::string name;
  BarrierSpec spec;
  std::string check = "super";
  double h_s = 0.01;
  std::optional<double> C_tol;
  int time_samples = 5;
  std::optional<std::pair<double, double>> t_range;
};

struct ExperimentConfig {
  Command command = Command::Simulate;
  GridConfig grid;
  double m = 2.0;
  PotentialConfig potential;
  SolverSection solver;
  InitialConfig initial;
  OutputConfig output;
  std::optional<double> target_mass;
  InitialConfig compare_lo;
  InitialConfig compare_hi;
  std::vector<BarrierEntry> barriers;
  std::optional<double> shell_eps;
};

/// Thrown by parse_config; carries every validation problem found.
class ConfigError : public Error {
 public:
  ConfigError(ErrorCode code, std::vector<std::string> problems)
      : Error(code, join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "; " : "") + v[i];
    return out;
  }
  std::vector<std::string> problems_;
};

namespace detail {

/// Reads typed fields out of a JSON object, recording problems instead of
/// stopping at the first one.
class Reader {
 public:
  Reader(const json& obj, std::string path, std::vector<std::string>& errors)
      : obj_(obj), path_(std::move(path)), errors_(errors) {
    if (!obj_.is_object()) errors_.push_back(where() + ": expected an object");
  }

  /// Reports keys that were never requested.
  void reject_unknown() {
    if (!obj_.is_object()) return;
    for (const auto& [key, _] : obj_.items()) {
      if (!seen_.count(key)) errors_.push_back(field(key) + ": unknown key");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.is_object() && obj_.contains(key);
  }

  const json* get(const std::string& key) {
    return has(key) ? &obj_.at(key) : nullptr;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) {
      if (v->is_number()) out = v->get<double>();
      else errors_.push_back(field(key) + ": expected a number");
    }
  }

  void number(const std::string& key, std::optional<double>& out) {
    if (has(key)) {
      double v = 0.0;
      number(key, v);
      out = v;
    }
  }

  void integer(const std::string& key, int& out) {
    if (const json* v = get(key)) {
      if (v->is_number_integer()) out = v->get<int>();
      else errors_.push_back(field(key) + ": expected an integer");
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (v->is_string()) out = v->get<std::string>();
      else errors_.push_back(field(key) + ": expected a string");
    }
  }

  void point(const std::string& key, Point& out) {
    if (const json* v = get(key)) {
      if (v->is_array() && !v->empty() && v->size() <= 2 &&
          std::all_of(v->begin(), v->end(), [](const json& e) { return e.is_number(); })) {
        out.x = (*v)[0].get<double>();
        out.y = v->size() == 2 ? (*v)[1].get<double>() : 0.0;
      } else {
        errors_.push_back(field(key) + ": expected an array of 1 or 2 numbers");
      }
    }
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (const json* v = get(key)) {
      if (v->is_array() && std::all_of(v->begin(), v->end(), [](const json& e) { return e.is_number(); })) {
        out = v->get<std::vector<double>>();
      } else {
        errors_.push_back(field(key) + ": expected an array of numbers");
      }
    }
  }

  void require(bool ok, const std::string& key, const std::string& msg) {
    if (!ok) errors_.push_back(field(key) + ": " + msg);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "<root>" : path_; }
  std::vector<std::string>& errors() { return errors_; }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

inline InitialConfig read_initial(const json& j, const std::string& path, int dim,
                                  std::vector<std::string>& errors) {
  InitialConfig ic;
  Reader r(j, path, errors);
  r.string("kind", ic.kind);
  if (ic.kind == "barenblatt") {
    r.number("tau", ic.tau);
    r.number("C", ic.C);
    r.require(ic.tau > 0.0, "tau", "must be > 0");
    r.require(ic.C > 0.0, "C", "must be > 0");
  } else if (ic.kind == "bump") {
    r.point("center", ic.center);
    r.number("radius", ic.radius);
    r.number("height", ic.height);
    r.require(ic.radius > 0.0, "radius", "must be > 0");
    r.require(ic.height > 0.0, "height", "must be > 0");
    if (dim == 1) ic.center.y = 0.0;
  } else if (ic.kind == "equilibrium-offset") {
    r.number("C", ic.C);
    r.number("offset", ic.offset);
    r.require(ic.offset > -1.0, "offset", "must be > -1");
  } else {
    r.require(false, "kind", "expected barenblatt, bump or equilibrium-offset");
  }
  r.reject_unknown();
  return ic;
}

inline BarrierEntry read_barrier(const json& j, const std::string& path, const ExperimentConfig& cfg,
                                 std::vector<std::string>& errors) {
  BarrierEntry e;
  Reader r(j, path, errors);
  std::string kind = "barenblatt";
  r.string("kind", kind);
  r.string("name", e.name);
  r.string("check", e.check);
  r.number("h_s", e.h_s);
  r.number("C_tol", e.C_tol);
  r.integer("time_samples", e.time_samples);
  std::vector<double> tr;
  r.numbers("t_range", tr);
  if (!tr.empty()) {
    r.require(tr.size() == 2 && tr[0] < tr[1], "t_range", "expected [t_lo, t_hi] with t_lo < t_hi");
    if (tr.size() == 2) e.t_range = std::pair{tr[0], tr[1]};
  }
  r.require(e.check == "sub" || e.check == "super", "check", "expected sub or super");
  r.require(e.h_s > 0.0, "h_s", "must be > 0");
  r.require(e.time_samples >= 1, "time_samples", "must be >= 1");

  BarrierSpec& s = e.spec;
  s.m = cfg.m;
  s.dim = cfg.grid.dim;
  if (kind == "barenblatt" || kind == "rescaled-barenblatt") {
    s.kind = kind == "barenblatt" ? BarrierKind::Barenblatt : BarrierKind::RescaledBarenblatt;
    r.number("tau", s.tau);
    r.number("C", s.C);
    r.require(s.tau > 0.0, "tau", "must be > 0");
    r.require(s.C > 0.0, "C", "must be > 0");
  } else if (kind == "spherical-wave" || kind == "rescaled-wave") {
    s.kind = kind == "spherical-wave" ? BarrierKind::SphericalWave : BarrierKind::RescaledWave;
    r.number("A", s.A);
    r.number("omega", s.omega);
    r.number("B", s.B);
    r.number("R", s.R);
    r.require(s.A > 0.0, "A", "must be > 0");
    r.require(s.omega > 0.0, "omega", "must be > 0");
    r.require(s.R > 0.0, "R", "must be > 0");
  } else {
    r.require(false, "kind", "expected barenblatt, spherical-wave, rescaled-barenblatt or rescaled-wave");
  }
  if (s.kind == BarrierKind::RescaledBarenblatt || s.kind == BarrierKind::RescaledWave) {
    r.number("alpha", s.rescale.alpha);
    r.point("x0", s.rescale.x0);
    r.number("t0", s.rescale.t0);
    std::optional<double> c_pert;
    r.number("C_pert", c_pert);
    r.require(s.rescale.alpha > 0.0 && s.rescale.alpha < 1.0, "alpha", "must lie in (0, 1)");
    if (c_pert) s.rescale.C_pert = *c_pert;
    else s.rescale.C_pert = -1.0;  // filled from the potential later
  }
  if (e.name.empty()) e.name = kind;
  r.reject_unknown();
  return e;
}

}  // namespace detail

/// Parses and validates an experiment description. `command` overrides the
/// document's optional "command" key; a mismatch is an error.
inline ExperimentConfig parse_config(const std::string& text, std::optional<Command> command = std::nullopt) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << "parse error at position " << offset << " (line " << line << ", column " << col << ")";
    throw ConfigError(ErrorCode::Parse, {os.str()});
  }

  ExperimentConfig cfg;
  std::vector<std::string> errors;
  detail::Reader root(doc, "", errors);
  if (!doc.is_object()) throw ConfigError(ErrorCode::Config, errors);

  std::string cmd_text;
  root.string("command", cmd_text);
  if (!cmd_text.empty()) {
    auto c = parse_command(cmd_text);
    if (!c) errors.push_back("command: unknown command '" + cmd_text + "'");
    else if (command && *c != *command) errors.push_back("command: config says '" + cmd_text + "'");
    else cfg.command = *c;
  }
  if (command) cfg.command = *command;

  if (const json* g = root.get("grid")) {
    detail::Reader r(*g, "grid", errors);
    r.integer("dim", cfg.grid.dim);
    r.number("L", cfg.grid.L);
    r.number("h", cfg.grid.h);
    r.require(cfg.grid.dim == 1 || cfg.grid.dim == 2, "dim", "must be 1 or 2");
    r.require(cfg.grid.L > 0.0, "L", "must be > 0");
    r.require(cfg.grid.h > 0.0, "h", "must be > 0");
    if (cfg.grid.L > 0.0 && cfg.grid.h > 0.0) {
      const double cells = 2.0 * cfg.grid.L / cfg.grid.h;
      r.require(std::abs(cells - std::round(cells)) <= 1e-9 * cells, "h", "2L/h must be an integer");
      r.require(std::round(cells) >= 8, "h", "grid needs at least 8 cells per axis");
    }
    r.reject_unknown();
  }

  if (const json* p = root.get("physics")) {
    detail::Reader r(*p, "physics", errors);
    r.number("m", cfg.m);
    r.require(cfg.m > 1.0, "m", "must be > 1");
    if (const json* pot = r.get("potential")) {
      detail::Reader rp(*pot, "physics.potential", errors);
      rp.string("kind", cfg.potential.kind);
      if (cfg.potential.kind == "quadratic") {
        rp.number("a", cfg.potential.a);
        rp.require(cfg.potential.a > 0.0, "a", "must be > 0");
      } else if (cfg.potential.kind == "custom-polynomial") {
        rp.numbers("coefficients", cfg.potential.coefficients);
      } else {
        rp.require(false, "kind", "expected quadratic or custom-polynomial");
      }
      rp.reject_unknown();
    }
    r.reject_unknown();
  }

  if (const json* s = root.get("solver")) {
    detail::Reader r(*s, "solver", errors);
    r.number("cfl_safety", cfg.solver.cfl_safety);
    r.number("t_end", cfg.solver.t_end);
    r.number("snapshot_every", cfg.solver.snapshot_every);
    r.number("eps_fb", cfg.solver.eps_fb);
    r.require(cfg.solver.cfl_safety > 0.0 && cfg.solver.cfl_safety <= 1.0, "cfl_safety", "must lie in (0, 1]");
    r.require(cfg.solver.t_end > 0.0, "t_end", "must be > 0");
    r.require(!cfg.solver.snapshot_every || *cfg.solver.snapshot_every > 0.0, "snapshot_every", "must be > 0");
    r.require(!cfg.solver.eps_fb || *cfg.solver.eps_fb > 0.0, "eps_fb", "must be > 0");
    r.reject_unknown();
  }

  if (const json* i = root.get("initial")) cfg.initial = detail::read_initial(*i, "initial", cfg.grid.dim, errors);

  if (const json* o = root.get("output")) {
    detail::Reader r(*o, "output", errors);
    r.string("directory", cfg.output.directory);
    if (const json* f = r.get("formats")) {
      if (f->is_array() && std::all_of(f->begin(), f->end(), [](const json& e) {
            return e.is_string() && (e == "csv" || e == "ndjson");
          })) {
        cfg.output.formats = f->get<std::vector<std::string>>();
      } else {
        errors.push_back("output.formats: expected an array of \"csv\" / \"ndjson\"");
      }
    }
    r.reject_unknown();
  }

  if (const json* e = root.get("equilibrium")) {
    detail::Reader r(*e, "equilibrium", errors);
    r.number("target_mass", cfg.target_mass);
    r.require(!cfg.target_mass || *cfg.target_mass > 0.0, "target_mass", "must be > 0");
    r.reject_unknown();
  }

  if (const json* c = root.get("compare")) {
    detail::Reader r(*c, "compare", errors);
    if (const json* lo = r.get("lo")) cfg.compare_lo = detail::read_initial(*lo, "compare.lo", cfg.grid.dim, errors);
    else errors.push_back("compare.lo: missing");
    if (const json* hi = r.get("hi")) cfg.compare_hi = detail::read_initial(*hi, "compare.hi", cfg.grid.dim, errors);
    else errors.push_back("compare.hi: missing");
    r.reject_unknown();
  } else if (cfg.command == Command::Compare) {
    errors.push_back("compare: required for the compare command");
  }

  if (const json* b = root.get("barriers")) {
    if (!b->is_array()) {
      errors.push_back("barriers: expected an array");
    } else {
      for (std::size_t k = 0; k < b->size(); ++k) {
        cfg.barriers.push_back(detail::read_barrier((*b)[k], "barriers[" + std::to_string(k) + "]", cfg, errors));
      }
    }
  }

  if (const json* c = root.get("convergence")) {
    detail::Reader r(*c, "convergence", errors);
    r.number("shell_eps", cfg.shell_eps);
    r.require(!cfg.shell_eps || *cfg.shell_eps > 0.0, "shell_eps", "must be > 0");
    r.reject_unknown();
  }

  root.reject_unknown();
  if (!errors.empty()) throw ConfigError(ErrorCode::Config, errors);
  return cfg;
}

// ---------------------------------------------------------------------------
// Building library objects from a config.
// ---------------------------------------------------------------------------

inline Grid make_grid(const ExperimentConfig& cfg) { return Grid(cfg.grid.dim, cfg.grid.L, cfg.grid.h); }

inline Potential make_potential(const ExperimentConfig& cfg) {
  if (cfg.potential.kind == "quadratic") return make_quadratic_potential(cfg.potential.a, cfg.grid.dim);
  return make_polynomial_potential(cfg.potential.coefficients, cfg.grid.dim, cfg.grid.L);
}

inline SolverConfig make_solver_config(const ExperimentConfig& cfg, Potential pot) {
  SolverConfig sc;
  sc.m = cfg.m;
  sc.potential = std::move(pot);
  sc.cfl_safety = cfg.solver.cfl_safety;
  sc.t_end = cfg.solver.t_end;
  sc.snapshot_every = cfg.solver.snapshot_every.value_or(cfg.solver.t_end / 10.0);
  sc.support_threshold = cfg.solver.eps_fb;
  return sc;
}

inline Field make_initial(const InitialConfig& ic, const Grid& g, double m, const Potential& pot) {
  if (ic.kind == "barenblatt") {
    const auto spec = BarrierSpec::barenblatt(ic.tau, ic.C, m, g.dim());
    return Field::sample(g, Variable::Density, m, [&](const Point& x) { return barenblatt_density(x, 0.0, spec); });
  }
  if (ic.kind == "bump") {
    return Field::sample(g, Variable::Density, m, [&](const Point& x) {
      const Point d = x - ic.center;
      return ic.height * std::max(0.0, 1.0 - dot(d, d) / (ic.radius * ic.radius));
    });
  }
  return Field::sample(g, Variable::Density, m, [&](const Point& x) {
    return density_of((1.0 + ic.offset) * std::max(0.0, ic.C - pot.eval(x)), m);
  });
}

// ---------------------------------------------------------------------------
// Output.
// ---------------------------------------------------------------------------

/// Shortest round-trip decimal form; independent of the C locale.
inline std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct RunResult {
  int exit_code = 0;
  /// File name -> contents, written only when the run completes.
  std::map<std::string, std::string> files;
  std::string summary;
};

/// Writes every file to a temporary name first, then renames into place.
inline void write_outputs(const RunResult& res, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::pair<fs::path, fs::path>> staged;
  for (const auto& [name, body] : res.files) {
    const fs::path tmp = dir / ("." + name + ".tmp");
    std::ofstream out(tmp, std::ios::binary);
    out << body;
    out.close();
    if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + tmp.string());
    staged.emplace_back(tmp, dir / name);
  }
  for (const auto& [tmp, dst] : staged) fs::rename(tmp, dst);
}

namespace detail {

inline std::string snapshots_csv(const Trajectory& traj, double m) {
  const Grid& g = traj.initial().rho.grid;
  std::ostringstream os;
  os << (g.dim() == 1 ? "t,i,x,rho,u\n" : "t,i,j,x,y,rho,u\n");
  for (const auto& s : traj.snapshots) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      const Point x = g.center(k);
      const double r = s.rho.values[k];
      os << num(s.t) << ',' << g.i_of(k) << ',';
      if (g.dim() == 2) os << g.j_of(k) << ',';
      os << num(x.x) << ',';
      if (g.dim() == 2) os << num(x.y) << ',';
      os << num(r) << ',' << num(pressure_of(r, m)) << '\n';
    }
  }
  return os.str();
}

inline std::string snapshots_ndjson(const Trajectory& traj, double m) {
  const Grid& g = traj.initial().rho.grid;
  std::ostringstream os;
  for (const auto& s : traj.snapshots) {
    os << "{\"t\":" << num(s.t) << ",\"n\":" << g.cells_per_axis() << ",\"rho\":[";
    for (std::size_t k = 0; k < g.size(); ++k) os << (k ? "," : "") << num(s.rho.values[k]);
    os << "],\"u\":[";
    for (std::size_t k = 0; k < g.size(); ++k) os << (k ? "," : "") << num(pressure_of(s.rho.values[k], m));
    os << "]}\n";
  }
  return os.str();
}

inline bool has_format(const ExperimentConfig& cfg, std::string_view f) {
  return std::find(cfg.output.formats.begin(), cfg.output.formats.end(), f) != cfg.output.formats.end();
}

inline SpaceTimeBox default_box(const BarrierEntry& e) {
  const BarrierSpec& s = e.spec;
  SpaceTimeBox box;
  box.dim = s.dim;
  switch (s.kind) {
    case BarrierKind::Barenblatt: {
      const auto [t0, t1] = e.t_range.value_or(std::pair{0.0, 1.0});
      const double r = barenblatt_radius(t1, s) + 4.0 * e.h_s;
      box.lo = {-r, -r};
      box.hi = {r, r};
      box.t_lo = t0;
      box.t_hi = t1;
      break;
    }
    case BarrierKind::SphericalWave: {
      const auto [t0, t1] = e.t_range.value_or(std::pair{(s.B - s.R) / s.omega, 0.0});
      box.lo = {-s.R, -s.R};
      box.hi = {s.R, s.R};
      box.t_lo = t0;
      box.t_hi = t1;
      box.ball_center = Point{};
      box.ball_radius = s.R;
      break;
    }
    case BarrierKind::RescaledBarenblatt:
    case BarrierKind::RescaledWave: {
      const RescaleParams& p = s.rescale;
      const auto [t0, t1] = e.t_range.value_or(std::pair{p.t0 - p.alpha, p.t0});
      box.lo = p.x0 - Point{p.alpha, p.alpha};
      box.hi = p.x0 + Point{p.alpha, p.alpha};
      box.t_lo = t0;
      box.t_hi = t1;
      box.ball_center = p.x0;
      box.ball_radius = p.alpha;
      break;
    }
  }
  return box;
}

inline std::string_view kind_name(BarrierKind k) {
  switch (k) {
    case BarrierKind::Barenblatt: return "barenblatt";
    case BarrierKind::SphericalWave: return "spherical-wave";
    case BarrierKind::RescaledBarenblatt: return "rescaled-barenblatt";
    case BarrierKind::RescaledWave: return "rescaled-wave";
  }
  return "barenblatt";
}

}  // namespace detail

/// Runs one experiment and returns the files it would emit. Library errors
/// propagate as pmed::Error.
inline RunResult run(const ExperimentConfig& cfg) {
  RunResult res;
  const Grid grid = make_grid(cfg);
  const Potential pot = make_potential(cfg);
  const SolverConfig sc = make_solver_config(cfg, pot);
  std::ostringstream summary;

  switch (cfg.command) {
    case Command::Simulate: {
      const Field rho0 = make_initial(cfg.initial, grid, cfg.m, pot);
      const Trajectory traj = simulate(rho0, sc);
      if (grid.dim() == 2 && detail::has_format(cfg, "ndjson")) {
        res.files["snapshots.ndjson"] = detail::snapshots_ndjson(traj, cfg.m);
      }
      if (grid.dim() == 1 || detail::has_format(cfg, "csv")) {
        res.files["snapshots.csv"] = detail::snapshots_csv(traj, cfg.m);
      }
      std::ostringstream mass;
      mass << "t,mass,clipped_mass\n";
      const double m0 = traj.initial().mass;
      bool ok = true;
      for (const auto& s : traj.snapshots) {
        mass << num(s.t) << ',' << num(s.mass) << ',' << num(s.clipped_mass) << '\n';
        ok = ok && std::abs(s.mass - m0) <= 1e-10 * m0 && s.clipped_mass <= 1e-8 * m0;
      }
      res.files["mass.csv"] = mass.str();
      res.exit_code = ok ? 0 : 1;
      summary << "simulate: " << traj.snapshots.size() << " snapshots, " << traj.steps
              << " steps, mass conservation " << (ok ? "ok" : "VIOLATED");
      break;
    }
    case Command::Equilibrium: {
      const double target = cfg.target_mass.value_or(integrate(make_initial(cfg.initial, grid, cfg.m, pot)));
      const EquilibriumProfile eq = compute_equilibrium(target, pot, cfg.m, grid);
      const double mass = equilibrium_mass(eq.C_inf, pot, grid, cfg.m);
      std::ostringstream os;
      os << (grid.dim() == 1 ? "C_inf,x\n" : "C_inf,x,y\n");
      for (const Point& p : eq.boundary.points) {
        os << num(eq.C_inf) << ',' << num(p.x);
        if (grid.dim() == 2) os << ',' << num(p.y);
        os << '\n';
      }
      res.files["equilibrium.csv"] = os.str();
      const bool ok = std::abs(mass - target) <= 1e-8 * target;
      res.exit_code = ok ? 0 : 1;
      summary.precision(12);
      summary << "equilibrium: C_inf=" << eq.C_inf << " target_mass=" << target;
      break;
    }
    case Command::VerifyBarriers: {
      std::vector<BarrierEntry> entries = cfg.barriers;
      if (entries.empty()) {
        for (const char* check : {"sub", "super"}) {
          BarrierEntry e;
          e.name = std::string("barenblatt-") + check;
          e.spec = BarrierSpec::barenblatt(1.0, 1.0, cfg.m, grid.dim());
          e.check = check;
          e.h_s = grid.dim() == 1 ? 0.01 : 0.02;
          entries.push_back(e);
        }
      }
      std::ostringstream os;
      os << "name,kind,check,interior_samples,boundary_samples,min_interior,max_interior,"
            "min_boundary,max_boundary,tolerance,pass\n";
      bool all = true;
      for (BarrierEntry e : entries) {
        if (e.spec.kind == BarrierKind::RescaledBarenblatt || e.spec.kind == BarrierKind::RescaledWave) {
          const double c = e.spec.rescale.C_pert;
          e.spec.rescale = localize(pot, e.spec.rescale.x0, e.spec.rescale.t0, e.spec.rescale.alpha);
          if (c > 0.0) e.spec.rescale.C_pert = c;
        }
        ResidualOptions opt;
        opt.C_tol = e.C_tol;
        opt.time_samples = e.time_samples;
        const auto kind = e.check == "sub" ? SolutionKind::Sub : SolutionKind::Super;
        const auto rep = residual_pmed(make_barrier(e.spec), pot, cfg.m, kind, detail::default_box(e), e.h_s, opt);
        all = all && rep.passed;
        os << e.name << ',' << detail::kind_name(e.spec.kind) << ',' << e.check << ',' << rep.interior_count
           << ',' << rep.boundary_count << ',' << num(rep.min_interior) << ',' << num(rep.max_interior) << ','
           << num(rep.min_boundary) << ',' << num(rep.max_boundary) << ',' << num(rep.tolerance) << ','
           << (rep.passed ? "pass" : "fail") << '\n';
      }
      res.files["residuals.csv"] = os.str();
      res.exit_code = all ? 0 : 1;
      summary << "verify-barriers: " << entries.size() << " checks, " << (all ? "all pass" : "FAILURES");
      break;
    }
    case Command::Compare: {
      const Field lo = make_initial(cfg.compare_lo, grid, cfg.m, pot);
      const Field hi = make_initial(cfg.compare_hi, grid, cfg.m, pot);
      const ComparisonReport rep = comparison_harness(lo, hi, sc);
      std::ostringstream os;
      os << "t,max_violation,tol_order,ordered\n";
      for (const auto& [t, v] : rep.per_snapshot) {
        os << num(t) << ',' << num(v) << ',' << num(rep.tol_order) << ',' << (v <= rep.tol_order ? 1 : 0) << '\n';
      }
      res.files["compare.csv"] = os.str();
      res.exit_code = rep.ordered ? 0 : 1;
      summary << "compare: " << (rep.ordered ? "ordered" : "NOT ordered") << ", max_violation=" << rep.max_violation
              << ", tol_order=" << rep.tol_order;
      break;
    }
    case Command::Convergence: {
      const Field rho0 = make_initial(cfg.initial, grid, cfg.m, pot);
      const Trajectory traj = simulate(rho0, sc);
      const EquilibriumProfile eq = compute_equilibrium(traj.initial().mass, pot, cfg.m, grid);
      const double eps_fb = support_threshold_for(sc, rho0);
      const double shell = cfg.shell_eps.value_or(5.0 * grid.spacing() * (1.0 + 2.0 * std::sqrt(std::max(0.0, eq.C_inf))));
      std::ostringstream os;
      os << "t,hausdorff,in_shell\n";
      double final_distance = 0.0;
      bool final_shell = false;
      for (const auto& s : traj.snapshots) {
        const BoundarySet b = extract_boundary(s.rho, eps_fb, s.t);
        if (b.empty()) throw Error(ErrorCode::EmptyBoundary, "empty free boundary at t=" + num(s.t));
        final_distance = hausdorff(b, eq.boundary);
        final_shell = sublevel_shell_check(b, pot, eq.C_inf, shell);
        os << num(s.t) << ',' << num(final_distance) << ',' << (final_shell ? 1 : 0) << '\n';
      }
      res.files["hausdorff.csv"] = os.str();
      std::ostringstream verdict;
      verdict << "C_inf,shell_eps,final_hausdorff,shell_pass\n"
              << num(eq.C_inf) << ',' << num(shell) << ',' << num(final_distance) << ',' << (final_shell ? 1 : 0)
              << '\n';
      res.files["shell.csv"] = verdict.str();
      res.exit_code = final_shell ? 0 : 1;
      summary << "convergence: C_inf=" << eq.C_inf << " final d_H=" << final_distance << " shell "
              << (final_shell ? "pass" : "FAIL");
      break;
    }
  }
  res.summary = summary.str();
  return res;
}

}  // namespace pmed::cli
