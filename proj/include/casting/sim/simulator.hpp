#pragma once

// Two-rate batch simulator: the control loop runs every dt_control, the
// vision system delivers one observation every frame. A run goes through
// startup (swing-up), the throw, steering by the selected controller and a
// terminal tick (catch, ground contact, timeout or divergence).

#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "casting/control/ballistics.hpp"
#include "casting/control/feedback_linearization.hpp"
#include "casting/control/impulse.hpp"
#include "casting/control/lookup_table.hpp"
#include "casting/control/piecewise.hpp"
#include "casting/control/swing.hpp"
#include "casting/control/zero_dynamics.hpp"
#include "casting/dynamics.hpp"
#include "casting/integrate.hpp"
#include "casting/sim/rng.hpp"
#include "casting/sim/scenario.hpp"
#include "casting/sim/target.hpp"
#include "casting/sim/trace.hpp"
#include "casting/vision/homography.hpp"
#include "casting/vision/observer.hpp"

namespace casting::sim {

enum class Result { caught, missed, timeout };

inline const char* result_name(Result r) {
  switch (r) {
    case Result::caught: return "caught";
    case Result::missed: return "missed";
    case Result::timeout: return "timeout";
  }
  return "?";
}

struct Outcome {
  Result result = Result::timeout;
  double min_distance = std::numeric_limits<double>::infinity();  ///< after the throw [m]
  std::optional<double> t_throw;
  std::optional<PlanarFlightState> release;  ///< end-effector flight state at the throw
  std::optional<double> t_brake;
  double t_terminal = 0.0;
  std::optional<double> x_land;     ///< ground contact abscissa, when the flight ended on the ground
  std::vector<double> brake_plans;  ///< braking instant of every impulse plan, in order
  int replans = 0;
  std::string reason;
  // wall-clock measurements; not part of the trace
  double max_tick_ms = 0.0;
  double max_replan_ms = 0.0;
};

/// Fixed calibration markers on the plane of motion.
inline std::vector<Vector2d> calibration_markers() {
  std::vector<Vector2d> out;
  for (double y : {0.0, 0.6, 1.2})
    for (double x : {0.3, 1.0, 1.7, 2.4}) out.emplace_back(x, y);
  return out;
}

class Simulator {
 public:
  explicit Simulator(Scenario s, bool keep_trace = true)
      : sc_(std::move(s)),
        keep_trace_(keep_trace),
        dt_(sc_.timing.dt_control),
        frame_ticks_(sc_.frame_ticks()),
        latency_ticks_(static_cast<long>(std::ceil(sc_.vision.latency / dt_ - 1e-9))),
        beta_(control::zero_dynamics_beta(sc_.robot)),
        ref_(sc_.robot, sc_.swing),
        target_(sc_.target),
        observer_(make_observer(sc_)),
        model_(sc_.flight_model()) {
    sc_.validate();
    arm_.q = {0.0, 0.0, sc_.robot.q3_nominal};
    if (sc_.initial) arm_ = *sc_.initial;
    if (sc_.controller == ControllerKind::impulse) impulse_.emplace(sc_.robot.g);
    if (sc_.controller == ControllerKind::piecewise) {
      schedule_.emplace(sc_.steering.u_max);
      if (!sc_.steering.table.empty()) {
        std::ifstream in(sc_.base_dir / sc_.steering.table);
        if (!in) throw ValidationError("cannot open lookup table " + sc_.steering.table);
        table_ = control::read_lookup_table(in);
      }
    }
  }

  const Scenario& scenario() const { return sc_; }
  bool done() const { return done_; }
  double time() const { return static_cast<double>(tick_) * dt_; }
  Phase phase() const { return phase_; }
  const std::vector<TraceRecord>& trace() const { return trace_; }
  const TraceRecord& last_record() const { return last_; }
  const Outcome& outcome() const { return outcome_; }
  Vector2d target_position() const { return target_.position(); }
  const std::optional<control::ImpulseController>& impulse() const { return impulse_; }
  const std::optional<control::ForceSchedule>& schedule() const { return schedule_; }

  /// Commanded position for an external target; takes effect at the next tick.
  void set_external_target(const Vector2d& p) {
    if (!p.allFinite()) throw ValidationError("target position must be finite");
    target_.set_external(p);
  }

  /// Arm joint coordinates; after the throw link 1 is held and (q2, q3) are
  /// the tether angle and length of the flying end-effector.
  JointState arm() const { return joints_now(); }
  Vector2d end_effector() const { return ee_now().head<2>(); }
  bool tether_taut() const { return last_.taut; }

  /// Advances one control tick and returns its record.
  const TraceRecord& step() {
    if (done_) throw ValidationError("simulation already finished");
    const auto wall0 = std::chrono::steady_clock::now();
    const double t = time();
    std::vector<std::string> events;

    // vision: capture on frame ticks, deliver after the latency
    if (tick_ % frame_ticks_ == 0) pending_.push_back({tick_ + latency_ticks_, observer_.observe(t, target_.position())});
    bool fresh = false;
    while (!pending_.empty() && pending_.front().first <= tick_) {
      latest_ = pending_.front().second;
      pending_.pop_front();
      fresh = true;
    }

    TraceRecord rec;
    rec.t = t;
    if (const auto term = terminal_check(t)) {
      phase_ = Phase::terminal;
      events.push_back(*term);
      fill_state(rec);
      finish(rec, events, wall0);
      done_ = true;
      outcome_.t_terminal = t;
      return last_;
    }

    double tau1 = 0.0, f3 = 0.0, u = 0.0;
    bool taut = true;
    if (phase_ == Phase::startup) {
      if (fresh) update_goal();
      if (const auto ev = swing_mode_update(t)) events.push_back(*ev);
      if (ref_.mode() == control::SwingMode::maintain && t >= burst_until_ && release_ready()) {
        throw_now(t, events);
      } else {
        const control::ReferenceSample r = ref_.sample(t, arm_, dt_);
        const control::OutputCommand oc = control::tracking_inputs(r, arm_, sc_.gains);
        const control::LinearizingCommand lc = control::linearizing_feedback(sc_.robot, arm_, oc.u2, oc.u3);
        tau1 = lc.tau1;
        f3 = std::max(lc.f3, 0.0);
        taut = lc.taut;
      }
    }
    if (phase_ == Phase::thrown || phase_ == Phase::steering) {
      if (fresh && latest_ && latest_->t > used_obs_t_) {
        if (phase_ == Phase::thrown && sc_.controller != ControllerKind::none) {
          phase_ = Phase::steering;
          events.push_back("steer");
        }
        control_update(t, events);
      }
      if (sc_.controller == ControllerKind::piecewise) u = schedule_->at(t);
      if (locked_) {
        const double tension = sc_.robot.m3 * lock_.tension_per_mass(sc_.robot.g);
        f3 = std::max(tension, 0.0);
        taut = tension >= 0.0;
      } else {
        f3 = u;
        taut = u > 0.0;
      }
    }
    const bool brake_now = phase_ != Phase::startup && impulse_ && !locked_ && impulse_->t_brake() &&
                           *impulse_->t_brake() < t + dt_;
    if (brake_now) events.push_back("brake");

    if (target_.advance(t + dt_, dt_, outcome_.t_throw) && !clamp_logged_) {
      clamp_logged_ = true;
      events.push_back("target_clamped");
    }

    fill_state(rec);
    rec.tau1 = tau1;
    rec.f3 = f3;
    rec.u_cmd = u;
    rec.taut = taut;
    finish(rec, events, wall0);

    try {
      if (phase_ == Phase::startup) {
        integrate_arm(tau1, f3);
      } else {
        integrate_flight(t, u, brake_now);
      }
    } catch (const IntegrationDivergedError& e) {
      diverged_ = e.what();
    }
    ++tick_;
    return last_;
  }

  /// Runs to completion.
  void run() {
    while (!done_) step();
  }

 private:
  static vision::SynthObserver make_observer(const Scenario& s) {
    const vision::Homography w2i = s.vision.camera.world_to_image();
    vision::Homography est = w2i.inverse();
    if (!s.vision.exact_calibration) {
      const auto batch = vision::synth_calibration(s.vision.camera, calibration_markers(), s.vision.calibration_sigma,
                                                   s.vision.quantize, stream_seed(s.seed, "vision.calibration"));
      est = vision::estimate_homography(batch).h;
    }
    vision::ObserverConfig cfg;
    cfg.frame_period = s.vision.frame_period;
    cfg.pixel_sigma = s.vision.pixel_sigma;
    cfg.quantize = s.vision.quantize;
    cfg.latency = s.vision.latency;
    return vision::SynthObserver(cfg, w2i, est, stream_seed(s.seed, "vision.noise"));
  }

  // (x, y, xdot, ydot) of the end-effector right now
  Vector4d ee_now() const {
    if (phase_ == Phase::startup) {
      const EndEffectorPose fk = forward_kinematics(sc_.robot, arm_);
      const Vector3d te = jacobian(sc_.robot, arm_) * arm_.qdot;
      return {fk.x, fk.y, te[0], te[1]};
    }
    if (locked_) {
      const Vector2d p = lock_.pos(), v = lock_.vel();
      return {p.x(), p.y(), v.x(), v.y()};
    }
    return fs_.packed();
  }

  JointState joints_now() const {
    if (phase_ == Phase::startup) return arm_;
    const Vector4d e = ee_now();
    const Vector2d d = e.head<2>() - fs_.anchor;
    const Vector2d v = e.tail<2>();
    const double r2 = d.squaredNorm();
    JointState js;
    const double abs_angle = std::atan2(d.x(), -d.y());
    js.q = {q1_held_, abs_angle - q1_held_, std::sqrt(r2)};
    js.qdot = {0.0, (d.x() * v.y() - d.y() * v.x()) / r2, d.dot(v) / std::sqrt(r2)};
    return js;
  }

  void fill_state(TraceRecord& rec) const {
    rec.phase = phase_;
    const JointState js = joints_now();
    const Vector4d e = ee_now();
    for (int i = 0; i < 3; ++i) {
      rec.q[i] = js.q[i];
      rec.qd[i] = js.qdot[i];
    }
    rec.xe = e[0];
    rec.ye = e[1];
    rec.xde = e[2];
    rec.yde = e[3];
    rec.obs = latest_;
  }

  void finish(TraceRecord& rec, const std::vector<std::string>& events,
              std::chrono::steady_clock::time_point wall0) {
    for (std::size_t i = 0; i < events.size(); ++i) rec.event += (i ? ";" : "") + events[i];
    last_ = rec;
    if (keep_trace_) trace_.push_back(rec);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall0).count();
    outcome_.max_tick_ms = std::max(outcome_.max_tick_ms, ms);
  }

  std::optional<std::string> terminal_check(double t) {
    if (diverged_) {
      outcome_.result = Result::missed;
      outcome_.reason = "diverged: " + *diverged_;
      return std::string("diverged");
    }
    if (phase_ == Phase::thrown || phase_ == Phase::steering) {
      const Vector4d e = ee_now();
      const double d = (e.head<2>() - target_.position()).norm();
      outcome_.min_distance = std::min(outcome_.min_distance, d);
      if (d <= sc_.catch_radius) {
        outcome_.result = Result::caught;
        outcome_.reason = "catch";
        return std::string("catch");
      }
      if (e[1] < 0.0) {
        outcome_.result = Result::missed;
        outcome_.reason = "ground";
        return std::string("ground");
      }
    }
    if (t >= sc_.timing.max_duration - 1e-12) {
      outcome_.result = Result::timeout;
      outcome_.reason = "timeout";
      return std::string("timeout");
    }
    return std::nullopt;
  }

  void update_goal() {
    x_goal_ = latest_->p.x() + sc_.release.margin;
    const auto e = control::energy_for_reach(sc_.robot, x_goal_ + sc_.release.energy_headroom);
    e_goal_ = e ? *e : 2.0 * beta_ * 0.999;
  }

  std::optional<std::string> swing_mode_update(double t) {
    if (ref_.mode() == control::SwingMode::establish) {
      const double energy = control::zero_dynamics_energy(beta_, arm_.q[0], arm_.qdot[0]);
      if ((bursting_ && t >= burst_until_) || (!bursting_ && energy >= e_goal_)) {
        ref_.enter_maintenance();
        bursting_ = false;
        t_maintain_ = t;
        return std::string("maintain");
      }
    } else if (t - t_maintain_ > sc_.release.repump_after) {
      ref_.enter_establishment();
      bursting_ = true;
      burst_until_ = t + sc_.release.repump_duration;
      return std::string("repump");
    }
    return std::nullopt;
  }

  bool release_ready() const {
    if (!latest_) return false;
    const Vector4d e = ee_now();
    if (e[2] <= 0.0 || e[1] <= 0.0) return false;
    const PlanarFlightState fs{e.head<2>(), e.tail<2>(), tether_anchor(sc_.robot, arm_.q[0])};
    return control::predict_x_land(fs, sc_.robot.g) >= x_goal_;
  }

  void throw_now(double t, std::vector<std::string>& events) {
    const Vector4d e = ee_now();
    q1_held_ = arm_.q[0];
    fs_ = PlanarFlightState{e.head<2>(), e.tail<2>(), tether_anchor(sc_.robot, q1_held_)};
    phase_ = Phase::thrown;
    outcome_.t_throw = t;
    outcome_.release = fs_;
    events.push_back("throw");
    control_update(t, events);
  }

  void control_update(double t, std::vector<std::string>& events) {
    if (!latest_) return;
    used_obs_t_ = latest_->t;
    const auto wall0 = std::chrono::steady_clock::now();
    if (impulse_ && !locked_) {
      impulse_->observe(t, fs_, *latest_);
      outcome_.brake_plans.push_back(impulse_->t_brake().value_or(std::numeric_limits<double>::infinity()));
      events.push_back("plan");
    } else if (schedule_) {
      // a segment may not start before the previous one; the throw-time plan
      // uses an observation captured before the throw
      TargetObservation obs = *latest_;
      if (!schedule_->empty() && !(obs.t > schedule_->segments().back().t_start)) return;
      control::replan_on_measurement(model_, fs_, obs, table_ ? &*table_ : nullptr, *schedule_);
      ++outcome_.replans;
      events.push_back("replan");
    } else {
      return;
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall0).count();
    outcome_.max_replan_ms = std::max(outcome_.max_replan_ms, ms);
  }

  void integrate_arm(double tau1, double f3) {
    Vector6 x;
    x << arm_.q, arm_.qdot;
    x = rk4_step(
        [&](const Vector6& z) {
          Vector6 d;
          d.head<3>() = z.tail<3>();
          d.tail<3>() = planar_joint_accel(sc_.robot, {z.head<3>(), z.tail<3>()}, tau1, f3);
          return d;
        },
        x, dt_);
    arm_.q = x.head<3>();
    arm_.qdot = x.tail<3>();
  }

  struct FlightSnapshot {
    PlanarFlightState fs;
    control::LockedTetherState lock;
    bool locked = false;
  };

  // Advances a flight snapshot by h seconds; a brake at offset `brake_at`
  // (when set) locks the tether part-way through.
  FlightSnapshot advance_flight(FlightSnapshot s, double u, double h, std::optional<double> brake_at) const {
    const double g = sc_.robot.g;
    double rest = h;
    if (!s.locked) {
      const double free = brake_at ? std::clamp(*brake_at, 0.0, h) : h;
      if (free > 0.0) {
        const Vector4d x = rk4_step(
            [&](const Vector4d& z) { return planar_flight_field(z, s.fs.anchor, sc_.robot.m3, g, u); },
            s.fs.packed(), free);
        s.fs = PlanarFlightState::unpack(x, s.fs.anchor);
      }
      rest = h - free;
      if (brake_at && *brake_at <= h) {
        s.lock = control::lock_tether(s.fs);
        s.locked = true;
      }
    }
    if (s.locked && rest > 0.0) {
      const double len = s.lock.length;
      const Vector2d th = rk4_step([&](const Vector2d& z) { return control::locked_tether_field(z, len, g); },
                                   Vector2d(s.lock.theta, s.lock.theta_dot), rest);
      s.lock.theta = th[0];
      s.lock.theta_dot = th[1];
    }
    return s;
  }

  static Vector2d snapshot_pos(const FlightSnapshot& s) { return s.locked ? s.lock.pos() : s.fs.pos; }

  void integrate_flight(double t, double u, bool brake_now) {
    const FlightSnapshot start{fs_, lock_, locked_};
    std::optional<double> brake_at;
    if (brake_now) {
      brake_at = std::max(0.0, *impulse_->t_brake() - t);
      outcome_.t_brake = t + *brake_at;
      impulse_->engage();
    }
    const FlightSnapshot end = advance_flight(start, u, dt_, brake_at);
    if (snapshot_pos(start).y() >= 0.0 && snapshot_pos(end).y() < 0.0) {
      double lo = 0.0, hi = dt_;
      for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (lo + hi);
        (snapshot_pos(advance_flight(start, u, mid, brake_at)).y() >= 0.0 ? lo : hi) = mid;
      }
      outcome_.x_land = snapshot_pos(advance_flight(start, u, lo, brake_at)).x();
    }
    fs_ = end.fs;
    lock_ = end.lock;
    locked_ = end.locked;
    if (locked_) fs_.pos = lock_.pos(), fs_.vel = lock_.vel();
  }

  using Vector6 = Eigen::Matrix<double, 6, 1>;

  Scenario sc_;
  bool keep_trace_;
  double dt_;
  long frame_ticks_;
  long latency_ticks_;
  double beta_;
  control::SwingReference ref_;
  TargetTrack target_;
  vision::SynthObserver observer_;
  control::FlightModel model_;

  long tick_ = 0;
  Phase phase_ = Phase::startup;
  bool done_ = false;
  std::optional<std::string> diverged_;
  JointState arm_;
  double q1_held_ = 0.0;
  PlanarFlightState fs_;
  control::LockedTetherState lock_;
  bool locked_ = false;

  std::deque<std::pair<long, TargetObservation>> pending_;
  std::optional<TargetObservation> latest_;
  double used_obs_t_ = -std::numeric_limits<double>::infinity();

  double x_goal_ = std::numeric_limits<double>::infinity();
  double e_goal_ = std::numeric_limits<double>::infinity();
  double t_maintain_ = 0.0;
  double burst_until_ = 0.0;
  bool bursting_ = false;
  bool clamp_logged_ = false;

  std::optional<control::ImpulseController> impulse_;
  std::optional<control::ForceSchedule> schedule_;
  std::optional<control::LookupTable> table_;

  std::vector<TraceRecord> trace_;
  TraceRecord last_;
  Outcome outcome_;
};

struct RunResult {
  std::vector<TraceRecord> trace;
  Outcome outcome;
};

inline RunResult run_scenario(const Scenario& s) {
  Simulator sim(s);
  sim.run();
  return {sim.trace(), sim.outcome()};
}

/// Flight state at the instant the scenario throws; the steering controller is
/// irrelevant up to that point.
inline PlanarFlightState release_state(Scenario s) {
  s.controller = ControllerKind::none;
  s.steering.table.clear();
  Simulator sim(std::move(s), false);
  while (!sim.done() && sim.phase() == Phase::startup) sim.step();
  if (!sim.outcome().release) throw ValidationError("scenario never reaches the throw");
  return *sim.outcome().release;
}

/// Recomputes the outcome from a trace and its scenario alone: the target
/// track is replayed from the scenario, the end-effector comes from the trace.
inline Outcome scan_outcome(const std::vector<TraceRecord>& trace, const Scenario& s) {
  if (s.target.kind == TargetKind::external) throw ValidationError("external targets cannot be rescanned");
  if (trace.empty()) throw ValidationError("empty trace");
  Outcome out;
  TargetTrack target(s.target);
  for (const auto& r : trace) {
    if (r.event.find("throw") != std::string::npos && !out.t_throw) out.t_throw = r.t;
    if (r.phase == Phase::thrown || r.phase == Phase::steering ||
        (r.phase == Phase::terminal && out.t_throw)) {
      const double d = (Vector2d(r.xe, r.ye) - target.position()).norm();
      out.min_distance = std::min(out.min_distance, d);
    }
    target.advance(r.t + s.timing.dt_control, s.timing.dt_control, out.t_throw);
  }
  const TraceRecord& last = trace.back();
  out.t_terminal = last.t;
  if (out.min_distance <= s.catch_radius) {
    out.result = Result::caught;
  } else if (last.event.find("timeout") != std::string::npos) {
    out.result = Result::timeout;
  } else {
    out.result = Result::missed;
  }
  return out;
}

struct ReplayReport {
  bool match = false;
  std::optional<std::size_t> first_divergent_tick;
  std::string expected;  ///< line from the supplied trace
  std::string actual;    ///< line from the re-run
};

/// Re-runs the scenario and compares it line by line with a stored trace.
inline ReplayReport replay_check(std::istream& trace_csv, const Scenario& s) {
  const TraceFile stored = read_trace_csv(trace_csv);
  Simulator sim(s, false);
  ReplayReport rep;
  std::size_t i = 0;
  while (!sim.done()) {
    const std::string line = format_trace_row(sim.step());
    if (i >= stored.lines.size() || line != stored.lines[i]) {
      rep.first_divergent_tick = i;
      rep.expected = i < stored.lines.size() ? stored.lines[i] : std::string("<end of trace>");
      rep.actual = line;
      return rep;
    }
    ++i;
  }
  if (i != stored.lines.size()) {
    rep.first_divergent_tick = i;
    rep.expected = stored.lines[i];
    rep.actual = "<end of run>";
    return rep;
  }
  rep.match = true;
  return rep;
}

}  // namespace casting::sim
