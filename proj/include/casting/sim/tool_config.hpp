#pragma once

// Configuration documents for the offline tools: the 3D throwing-angle sweep
// and the planar lookup-table build.

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "casting/control/lookup_table.hpp"
#include "casting/optimal/angle_sweep.hpp"
#include "casting/sim/scenario.hpp"

namespace casting::sim {

struct SweepConfig {
  Caster3DGeometry geometry;
  double omega0 = 10.0;
  Vector3d target{2.0, 0.0, -1.0};
  int angles = 36;
  optimal::SweepOptions options = [] {
    optimal::SweepOptions o;
    o.refine_iterations = 12;
    return o;
  }();
};

struct TableConfig {
  std::filesystem::path scenario;  ///< the release state comes from this scenario's throw
  control::GridSpec grid = [] {
    control::GridSpec g;
    g.x0 = 1.2;
    g.nx = 24;
    g.ny = 5;
    return g;
  }();
};

namespace detail {

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace detail

inline SweepConfig sweep_config_from_json(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::get_opt;
  SweepConfig c;
  try {
    check_keys(j, {"geometry", "omega0", "target", "angles", "n_seg", "substeps", "t_max", "refine_iterations",
                   "warm_start"},
               "sweep config");
    if (j.contains("geometry")) {
      const auto& g = j.at("geometry");
      check_keys(g, {"b", "r", "m", "I_platform", "g", "u_max"}, "geometry");
      get_opt(g, "b", c.geometry.b);
      get_opt(g, "r", c.geometry.r);
      get_opt(g, "m", c.geometry.m);
      get_opt(g, "I_platform", c.geometry.I_platform);
      get_opt(g, "g", c.geometry.g);
      get_opt(g, "u_max", c.geometry.u_max);
    }
    get_opt(j, "omega0", c.omega0);
    if (j.contains("target")) c.target = detail::vec3(j.at("target"));
    get_opt(j, "angles", c.angles);
    get_opt(j, "n_seg", c.options.solver.n_seg);
    get_opt(j, "substeps", c.options.solver.substeps);
    get_opt(j, "t_max", c.options.solver.t_max);
    get_opt(j, "refine_iterations", c.options.refine_iterations);
    get_opt(j, "warm_start", c.options.warm_start);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("sweep config field has the wrong type: ") + e.what());
  }
  c.geometry.validate();
  if (c.angles < 1) throw ValidationError("sweep needs at least one angle");
  if (c.options.solver.n_seg < 1 || c.options.solver.substeps < 1) throw ValidationError("bad transcription size");
  return c;
}

inline TableConfig table_config_from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  using detail::check_keys;
  using detail::get_opt;
  TableConfig c;
  try {
    check_keys(j, {"scenario", "grid"}, "table config");
    if (!j.contains("scenario")) throw ValidationError("table config lacks a scenario");
    c.scenario = base / j.at("scenario").get<std::string>();
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      check_keys(g, {"x0", "y0", "spacing", "nx", "ny"}, "grid");
      get_opt(g, "x0", c.grid.x0);
      get_opt(g, "y0", c.grid.y0);
      get_opt(g, "spacing", c.grid.spacing);
      get_opt(g, "nx", c.grid.nx);
      get_opt(g, "ny", c.grid.ny);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("table config field has the wrong type: ") + e.what());
  }
  c.grid.validate();
  return c;
}

inline SweepConfig load_sweep_config(const std::filesystem::path& path) {
  return sweep_config_from_json(detail::read_json_file(path));
}

inline TableConfig load_table_config(const std::filesystem::path& path) {
  return table_config_from_json(detail::read_json_file(path), path.parent_path());
}

}  // namespace casting::sim
