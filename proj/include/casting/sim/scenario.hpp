#pragma once

// Scenario description for the batch simulator and live mode, read from and
// written to a JSON document with a schema version.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "casting/control/constant_force.hpp"
#include "casting/control/feedback_linearization.hpp"
#include "casting/control/swing.hpp"
#include "casting/dynamics.hpp"
#include "casting/error.hpp"
#include "casting/vision/observer.hpp"

namespace casting::sim {

inline constexpr int kSchemaVersion = 1;

enum class ControllerKind { none, impulse, piecewise };
enum class TargetKind { fixed, constant_velocity, waypoints, external };
/// Time origin of a target track: the simulation start or the throw instant.
/// Before the throw a throw-clocked track holds its initial position.
enum class TargetClock { sim, release };

struct Waypoint {
  double t = 0.0;
  Vector2d p = Vector2d::Zero();
};

struct TargetSpec {
  TargetKind kind = TargetKind::fixed;
  TargetClock clock = TargetClock::sim;
  Vector2d position{1.81, 0.0};  ///< initial position for every kind
  Vector2d velocity = Vector2d::Zero();
  std::vector<Waypoint> waypoints;
  double speed_cap = 0.5;

  void validate() const {
    if (!position.allFinite() || !velocity.allFinite()) throw ValidationError("target position must be finite");
    if (!(speed_cap > 0)) throw ValidationError("target speed cap must be positive");
    if (kind == TargetKind::waypoints) {
      if (waypoints.empty()) throw ValidationError("waypoint target needs at least one waypoint");
      for (std::size_t i = 1; i < waypoints.size(); ++i)
        if (!(waypoints[i].t > waypoints[i - 1].t)) throw ValidationError("waypoint times must increase");
    }
  }
};

struct VisionSpec {
  double frame_period = vision::kFramePeriod;
  double pixel_sigma = 0.5;
  bool quantize = true;
  double latency = 0.0;
  bool exact_calibration = false;  ///< use the true homography instead of a noisy estimate
  double calibration_sigma = 0.5;
  vision::PinholeCamera camera;
};

struct TimingSpec {
  double dt_control = 5e-4;
  double max_duration = 20.0;
};

/// Swing-up and release policy.
struct ReleaseSpec {
  double margin = 0.1;          ///< free landing point must lie this far beyond the observed target [m]
  double energy_headroom = 0.15;  ///< pumping stops once the orbit reaches margin + headroom [m]
  double repump_after = 1.9;    ///< maintenance time without a release before pumping again [s]
  double repump_duration = 0.9;
};

struct SteeringSpec {
  double u_max = 0.5;
  double predict_dt = 1e-3;
  double horizon = 3.0;
  std::string table;  ///< optional lookup-table file, relative to the scenario file
};

struct Scenario {
  int schema_version = kSchemaVersion;
  std::string name = "unnamed";
  std::uint64_t seed = 1;
  ControllerKind controller = ControllerKind::impulse;
  RobotParams robot;
  control::SwingConfig swing = [] {
    control::SwingConfig c;
    c.amplitude = 0.2;
    return c;
  }();
  control::TrackingGains gains;
  std::optional<JointState> initial;  ///< arm state at t = 0; defaults to rest with nominal tether
  ReleaseSpec release;
  TargetSpec target;
  VisionSpec vision;
  TimingSpec timing;
  SteeringSpec steering;
  double catch_radius = 0.05;
  std::filesystem::path base_dir;  ///< where relative paths resolve; not serialized

  control::FlightModel flight_model() const {
    control::FlightModel m;
    m.m = robot.m3;
    m.g = robot.g;
    m.dt = steering.predict_dt;
    m.horizon = steering.horizon;
    return m;
  }

  /// Control ticks between consecutive frames.
  long frame_ticks() const {
    return static_cast<long>(std::floor(vision.frame_period / timing.dt_control * (1.0 + 1e-12)));
  }

  void validate() const {
    if (schema_version != kSchemaVersion)
      throw ValidationError("unsupported schema_version " + std::to_string(schema_version));
    robot.validate();
    swing.validate();
    gains.validate();
    target.validate();
    if (!(timing.dt_control > 0)) throw ValidationError("dt_control must be positive");
    if (!(timing.max_duration > 0)) throw ValidationError("max_duration must be positive");
    if (!(vision.frame_period >= timing.dt_control)) throw ValidationError("frame period must be >= dt_control");
    if (!(vision.pixel_sigma >= 0 && vision.calibration_sigma >= 0 && vision.latency >= 0))
      throw ValidationError("vision noise and latency must be non-negative");
    if (!(steering.u_max > 0)) throw ValidationError("steering u_max must be positive");
    flight_model().validate();
    if (!(catch_radius > 0)) throw ValidationError("catch radius must be positive");
    if (!(release.margin >= 0 && release.energy_headroom >= 0 && release.repump_after > 0 &&
          release.repump_duration > 0))
      throw ValidationError("invalid release policy");
    if (initial && (!initial->q.allFinite() || !initial->qdot.allFinite() || initial->q[2] <= 0))
      throw ValidationError("initial arm state must be finite with a positive tether length");
  }
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ValidationError("unknown key '" + k + "' in " + where);
}

template <class T>
void get_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline Vector2d vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Vector3d vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json arr(const Vector2d& v) { return json::array({v.x(), v.y()}); }
inline json arr(const Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

inline const char* name_of(ControllerKind k) {
  switch (k) {
    case ControllerKind::none: return "none";
    case ControllerKind::impulse: return "impulse";
    case ControllerKind::piecewise: return "piecewise";
  }
  return "?";
}

inline const char* name_of(TargetKind k) {
  switch (k) {
    case TargetKind::fixed: return "static";
    case TargetKind::constant_velocity: return "constant-velocity";
    case TargetKind::waypoints: return "waypoints";
    case TargetKind::external: return "external";
  }
  return "?";
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::get_opt;
  check_keys(j, {"schema_version", "name", "seed", "controller", "robot", "swing", "gains", "initial", "release",
                 "target", "vision", "timing", "steering", "catch_radius"},
             "scenario");
  Scenario s;
  if (!j.contains("schema_version")) throw ValidationError("scenario lacks schema_version");
  s.schema_version = j.at("schema_version").get<int>();
  get_opt(j, "name", s.name);
  get_opt(j, "seed", s.seed);
  get_opt(j, "catch_radius", s.catch_radius);
  if (j.contains("controller")) {
    const auto c = j.at("controller").get<std::string>();
    if (c == "none") s.controller = ControllerKind::none;
    else if (c == "impulse") s.controller = ControllerKind::impulse;
    else if (c == "piecewise") s.controller = ControllerKind::piecewise;
    else throw ValidationError("unknown controller '" + c + "'");
  }
  if (j.contains("robot")) {
    const auto& r = j.at("robot");
    check_keys(r, {"x_base", "y_base", "a1", "l1", "m1", "I1", "m3", "I3", "g", "q3_nominal"}, "robot");
    get_opt(r, "x_base", s.robot.x_base);
    get_opt(r, "y_base", s.robot.y_base);
    get_opt(r, "a1", s.robot.a1);
    get_opt(r, "l1", s.robot.l1);
    get_opt(r, "m1", s.robot.m1);
    get_opt(r, "I1", s.robot.I1);
    get_opt(r, "m3", s.robot.m3);
    get_opt(r, "I3", s.robot.I3);
    get_opt(r, "g", s.robot.g);
    get_opt(r, "q3_nominal", s.robot.q3_nominal);
  }
  if (j.contains("swing")) {
    const auto& w = j.at("swing");
    check_keys(w, {"amplitude", "ramp_time", "rate_width", "filter_omega"}, "swing");
    get_opt(w, "amplitude", s.swing.amplitude);
    get_opt(w, "ramp_time", s.swing.ramp_time);
    get_opt(w, "rate_width", s.swing.rate_width);
    get_opt(w, "filter_omega", s.swing.filter_omega);
  }
  if (j.contains("gains")) {
    const auto& g = j.at("gains");
    check_keys(g, {"kp2", "kv2", "kp3", "kv3"}, "gains");
    get_opt(g, "kp2", s.gains.kp2);
    get_opt(g, "kv2", s.gains.kv2);
    get_opt(g, "kp3", s.gains.kp3);
    get_opt(g, "kv3", s.gains.kv3);
  }
  if (j.contains("initial")) {
    const auto& a = j.at("initial");
    check_keys(a, {"q", "qdot"}, "initial");
    JointState js;
    js.q = detail::vec3(a.at("q"));
    if (a.contains("qdot")) js.qdot = detail::vec3(a.at("qdot"));
    s.initial = js;
  }
  if (j.contains("release")) {
    const auto& r = j.at("release");
    check_keys(r, {"margin", "energy_headroom", "repump_after", "repump_duration"}, "release");
    get_opt(r, "margin", s.release.margin);
    get_opt(r, "energy_headroom", s.release.energy_headroom);
    get_opt(r, "repump_after", s.release.repump_after);
    get_opt(r, "repump_duration", s.release.repump_duration);
  }
  if (j.contains("target")) {
    const auto& t = j.at("target");
    check_keys(t, {"kind", "clock", "position", "velocity", "waypoints", "speed_cap"}, "target");
    const auto kind = t.value("kind", std::string("static"));
    if (kind == "static") s.target.kind = TargetKind::fixed;
    else if (kind == "constant-velocity") s.target.kind = TargetKind::constant_velocity;
    else if (kind == "waypoints") s.target.kind = TargetKind::waypoints;
    else if (kind == "external") s.target.kind = TargetKind::external;
    else throw ValidationError("unknown target kind '" + kind + "'");
    const auto clock = t.value("clock", std::string("sim"));
    if (clock == "sim") s.target.clock = TargetClock::sim;
    else if (clock == "throw") s.target.clock = TargetClock::release;
    else throw ValidationError("unknown target clock '" + clock + "'");
    if (t.contains("position")) s.target.position = detail::vec2(t.at("position"));
    if (t.contains("velocity")) s.target.velocity = detail::vec2(t.at("velocity"));
    get_opt(t, "speed_cap", s.target.speed_cap);
    if (t.contains("waypoints")) {
      for (const auto& w : t.at("waypoints")) {
        if (!w.is_array() || w.size() != 3) throw ValidationError("waypoints are [t, x, y]");
        s.target.waypoints.push_back({w[0].get<double>(), {w[1].get<double>(), w[2].get<double>()}});
      }
      if (!t.contains("position") && !s.target.waypoints.empty()) s.target.position = s.target.waypoints[0].p;
    }
  }
  if (j.contains("vision")) {
    const auto& v = j.at("vision");
    check_keys(v, {"frame_period", "pixel_sigma", "quantize", "latency", "exact_calibration", "calibration_sigma",
                   "camera"},
               "vision");
    get_opt(v, "frame_period", s.vision.frame_period);
    get_opt(v, "pixel_sigma", s.vision.pixel_sigma);
    get_opt(v, "quantize", s.vision.quantize);
    get_opt(v, "latency", s.vision.latency);
    get_opt(v, "exact_calibration", s.vision.exact_calibration);
    get_opt(v, "calibration_sigma", s.vision.calibration_sigma);
    if (v.contains("camera")) {
      const auto& c = v.at("camera");
      check_keys(c, {"focal_px", "principal", "center", "yaw", "pitch"}, "camera");
      get_opt(c, "focal_px", s.vision.camera.focal_px);
      if (c.contains("principal")) s.vision.camera.principal = detail::vec2(c.at("principal"));
      if (c.contains("center")) s.vision.camera.center = detail::vec3(c.at("center"));
      get_opt(c, "yaw", s.vision.camera.yaw);
      get_opt(c, "pitch", s.vision.camera.pitch);
    }
  }
  if (j.contains("timing")) {
    const auto& t = j.at("timing");
    check_keys(t, {"dt_control", "max_duration"}, "timing");
    get_opt(t, "dt_control", s.timing.dt_control);
    get_opt(t, "max_duration", s.timing.max_duration);
  }
  if (j.contains("steering")) {
    const auto& t = j.at("steering");
    check_keys(t, {"u_max", "predict_dt", "horizon", "table"}, "steering");
    get_opt(t, "u_max", s.steering.u_max);
    get_opt(t, "predict_dt", s.steering.predict_dt);
    get_opt(t, "horizon", s.steering.horizon);
    get_opt(t, "table", s.steering.table);
  }
  s.validate();
  return s;
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  using detail::arr;
  using nlohmann::json;
  json j;
  j["schema_version"] = s.schema_version;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["controller"] = detail::name_of(s.controller);
  j["robot"] = {{"x_base", s.robot.x_base}, {"y_base", s.robot.y_base}, {"a1", s.robot.a1},
                {"l1", s.robot.l1},         {"m1", s.robot.m1},         {"I1", s.robot.I1},
                {"m3", s.robot.m3},         {"I3", s.robot.I3},         {"g", s.robot.g},
                {"q3_nominal", s.robot.q3_nominal}};
  j["swing"] = {{"amplitude", s.swing.amplitude}, {"ramp_time", s.swing.ramp_time},
                {"rate_width", s.swing.rate_width}, {"filter_omega", s.swing.filter_omega}};
  j["gains"] = {{"kp2", s.gains.kp2}, {"kv2", s.gains.kv2}, {"kp3", s.gains.kp3}, {"kv3", s.gains.kv3}};
  if (s.initial) j["initial"] = {{"q", arr(s.initial->q)}, {"qdot", arr(s.initial->qdot)}};
  j["release"] = {{"margin", s.release.margin}, {"energy_headroom", s.release.energy_headroom},
                  {"repump_after", s.release.repump_after}, {"repump_duration", s.release.repump_duration}};
  json t = {{"kind", detail::name_of(s.target.kind)},
            {"clock", s.target.clock == TargetClock::sim ? "sim" : "throw"},
            {"position", arr(s.target.position)},
            {"speed_cap", s.target.speed_cap}};
  if (s.target.kind == TargetKind::constant_velocity) t["velocity"] = arr(s.target.velocity);
  if (s.target.kind == TargetKind::waypoints) {
    t["waypoints"] = json::array();
    for (const auto& w : s.target.waypoints) t["waypoints"].push_back({w.t, w.p.x(), w.p.y()});
  }
  j["target"] = t;
  j["vision"] = {{"frame_period", s.vision.frame_period},
                 {"pixel_sigma", s.vision.pixel_sigma},
                 {"quantize", s.vision.quantize},
                 {"latency", s.vision.latency},
                 {"exact_calibration", s.vision.exact_calibration},
                 {"calibration_sigma", s.vision.calibration_sigma},
                 {"camera",
                  {{"focal_px", s.vision.camera.focal_px},
                   {"principal", arr(s.vision.camera.principal)},
                   {"center", arr(s.vision.camera.center)},
                   {"yaw", s.vision.camera.yaw},
                   {"pitch", s.vision.camera.pitch}}}};
  j["timing"] = {{"dt_control", s.timing.dt_control}, {"max_duration", s.timing.max_duration}};
  j["steering"] = {{"u_max", s.steering.u_max}, {"predict_dt", s.steering.predict_dt},
                   {"horizon", s.steering.horizon}};
  if (!s.steering.table.empty()) j["steering"]["table"] = s.steering.table;
  j["catch_radius"] = s.catch_radius;
  return j;
}

inline Scenario parse_scenario(std::istream& is) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("scenario is not valid JSON: ") + e.what());
  }
  try {
    return scenario_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("scenario field has the wrong type: ") + e.what());
  }
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario " + path.string());
  Scenario s = parse_scenario(in);
  s.base_dir = path.parent_path();
  return s;
}

}  // namespace casting::sim
