#pragma once

// Offline table of constant-force solutions for a grid of target positions,
// all for one release state. Serves as the warm start of the on-line search.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "casting/control/constant_force.hpp"
#include "casting/error.hpp"
#include "casting/flight.hpp"

namespace casting::control {

struct GridSpec {
  double x0 = 0.0, y0 = 0.0;  ///< position of cell (0, 0)
  double spacing = 0.05;
  int nx = 1, ny = 1;

  void validate() const {
    if (!(spacing > 0) || nx < 1 || ny < 1) throw ValidationError("grid must be non-empty");
  }
  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  Vector2d node(std::size_t index) const {
    const auto i = static_cast<int>(index % static_cast<std::size_t>(nx));
    const auto j = static_cast<int>(index / static_cast<std::size_t>(nx));
    return {x0 + i * spacing, y0 + j * spacing};
  }
  std::size_t nearest(const Vector2d& p) const {
    const int i = std::clamp(static_cast<int>(std::lround((p.x() - x0) / spacing)), 0, nx - 1);
    const int j = std::clamp(static_cast<int>(std::lround((p.y() - y0) / spacing)), 0, ny - 1);
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i);
  }
};

struct LookupCell {
  double u = 0.0;
  double t_f = 0.0;
  bool reachable = false;
};

struct LookupTable {
  GridSpec grid;
  double u_max = 0.0;
  PlanarFlightState release;  ///< flight state the table was built for
  std::vector<LookupCell> cells;

  const LookupCell& at(std::size_t index) const { return cells.at(index); }
  const LookupCell& query(const Vector2d& target) const { return cells.at(grid.nearest(target)); }

  /// Largest force difference between reachable 4-neighbours.
  double max_neighbor_jump() const {
    double jump = 0.0;
    for (int j = 0; j < grid.ny; ++j) {
      for (int i = 0; i < grid.nx; ++i) {
        const auto& c = cells[static_cast<std::size_t>(j * grid.nx + i)];
        if (!c.reachable) continue;
        if (i + 1 < grid.nx) {
          const auto& r = cells[static_cast<std::size_t>(j * grid.nx + i + 1)];
          if (r.reachable) jump = std::max(jump, std::abs(r.u - c.u));
        }
        if (j + 1 < grid.ny) {
          const auto& r = cells[static_cast<std::size_t>((j + 1) * grid.nx + i)];
          if (r.reachable) jump = std::max(jump, std::abs(r.u - c.u));
        }
      }
    }
    return jump;
  }
};

inline LookupTable build_lookup_table(const FlightModel& model, const PlanarFlightState& release,
                                      const GridSpec& grid, double u_max) {
  grid.validate();
  LookupTable table{grid, u_max, release, {}};
  table.cells.reserve(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const ConstantForceResult r = constant_force_opt(model, release, grid.node(k), u_max);
    table.cells.push_back({r.u, r.t_f, r.miss < grid.spacing});
  }
  return table;
}

inline constexpr const char* kLookupTableHeader = "casting-lookup-table v1";

namespace detail {
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

inline void write_lookup_table(std::ostream& os, const LookupTable& t) {
  using detail::fmt17;
  os << kLookupTableHeader << '\n';
  os << "grid " << fmt17(t.grid.x0) << ' ' << fmt17(t.grid.y0) << ' ' << fmt17(t.grid.spacing) << ' '
     << t.grid.nx << ' ' << t.grid.ny << '\n';
  os << "u_max " << fmt17(t.u_max) << '\n';
  os << "release " << fmt17(t.release.pos.x()) << ' ' << fmt17(t.release.pos.y()) << ' '
     << fmt17(t.release.vel.x()) << ' ' << fmt17(t.release.vel.y()) << ' '
     << fmt17(t.release.anchor.x()) << ' ' << fmt17(t.release.anchor.y()) << '\n';
  os << "cells " << t.cells.size() << '\n';
  for (std::size_t k = 0; k < t.cells.size(); ++k) {
    const auto& c = t.cells[k];
    os << k << ' ' << fmt17(c.u) << ' ' << fmt17(c.t_f) << ' ' << (c.reachable ? 1 : 0) << '\n';
  }
}

inline LookupTable read_lookup_table(std::istream& is) {
  const auto fail = [](const std::string& why) -> LookupTable {
    throw ValidationError("lookup table: " + why);
  };
  std::string line;
  if (!std::getline(is, line) || line != kLookupTableHeader) return fail("bad header");

  const auto expect = [&](const char* key) {
    if (!std::getline(is, line)) fail(std::string("missing ") + key);
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) fail(std::string("expected ") + key);
    return ls;
  };
  LookupTable t;
  {
    auto ls = expect("grid");
    if (!(ls >> t.grid.x0 >> t.grid.y0 >> t.grid.spacing >> t.grid.nx >> t.grid.ny)) fail("grid");
    t.grid.validate();
  }
  {
    auto ls = expect("u_max");
    if (!(ls >> t.u_max) || !(t.u_max > 0)) fail("u_max");
  }
  {
    auto ls = expect("release");
    double v[6];
    for (double& x : v)
      if (!(ls >> x)) fail("release");
    t.release = {{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}};
  }
  std::size_t n = 0;
  {
    auto ls = expect("cells");
    if (!(ls >> n) || n != t.grid.size()) fail("cell count does not match grid");
  }
  t.cells.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::getline(is, line)) fail("truncated cell list");
    std::istringstream ls(line);
    std::size_t idx = 0;
    int reach = 0;
    LookupCell c;
    if (!(ls >> idx >> c.u >> c.t_f >> reach) || idx != k || (reach != 0 && reach != 1))
      fail("malformed cell record " + std::to_string(k));
    if (c.u < 0.0 || c.u > t.u_max) fail("cell force outside [0, u_max]");
    c.reachable = reach == 1;
    t.cells[k] = c;
  }
  return t;
}

}  // namespace casting::control
