#pragma once

// Output references for the swing phase. During establishment the tether
// angle is driven against the arm's swing direction to pump energy into the
// unactuated pendulum motion; maintenance holds the tether angle at zero and
// the tether length at its nominal value.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "casting/control/ballistics.hpp"
#include "casting/control/feedback_linearization.hpp"
#include "casting/control/zero_dynamics.hpp"
#include "casting/dynamics.hpp"
#include "casting/error.hpp"

namespace casting::control {

struct SwingConfig {
  double amplitude = 0.35;       ///< tether-angle excursion while pumping [rad]
  double ramp_time = 2.0;        ///< amplitude ramp-in [s]
  double rate_width = 0.5;       ///< q1dot scale of the smooth sign [rad/s]
  double filter_omega = 15.0;    ///< bandwidth of the reference shaping filter [rad/s]
  double q2_hold = 0.0;          ///< maintenance tether angle [rad]

  void validate() const {
    if (!(amplitude >= 0 && ramp_time > 0 && rate_width > 0 && filter_omega > 0))
      throw ValidationError("invalid swing configuration");
  }
};

enum class SwingMode { establish, maintain };

/// Stateful reference generator, advanced once per control tick.
///
/// The raw tether-angle command is a seed sinusoid at the pendulum's natural
/// frequency for one period, then -A tanh(q1dot / w). It is passed through a
/// critically damped second-order filter so q2_ref, its rate and its
/// acceleration are mutually consistent.
class SwingReference {
 public:
  SwingReference(const RobotParams& p, SwingConfig cfg = {})
      : cfg_(cfg), q3bar_(p.q3_nominal), omega_n_(std::sqrt(zero_dynamics_beta(p))) {
    cfg_.validate();
  }

  SwingMode mode() const { return mode_; }
  void enter_maintenance() { mode_ = SwingMode::maintain; }
  void enter_establishment() { mode_ = SwingMode::establish; }
  double q3_bar() const { return q3bar_; }

  /// Reference at the current tick; advances the filter by `dt` afterwards.
  ReferenceSample sample(double t, const JointState& s, double dt) {
    const double target = raw_command(t, s);
    const double w = cfg_.filter_omega;
    ReferenceSample ref;
    ref.q2 = r_;
    ref.q2dot = rdot_;
    ref.q2ddot = w * w * (target - r_) - 2.0 * w * rdot_;
    ref.q3 = q3bar_;
    // semi-implicit Euler keeps the filter unconditionally stable at dt*w << 1
    rdot_ += dt * ref.q2ddot;
    r_ += dt * rdot_;
    return ref;
  }

  double raw_command(double t, const JointState& s) const {
    if (mode_ == SwingMode::maintain) return cfg_.q2_hold;
    const double amp = cfg_.amplitude * std::min(1.0, t / cfg_.ramp_time);
    const double seed_end = 2.0 * std::numbers::pi / omega_n_;
    if (t < seed_end) return amp * std::sin(omega_n_ * t);
    return -amp * std::tanh(s.qdot[0] / cfg_.rate_width);
  }

 private:
  SwingConfig cfg_;
  double q3bar_;
  double omega_n_;
  SwingMode mode_ = SwingMode::establish;
  double r_ = 0.0;
  double rdot_ = 0.0;
};

/// Farthest landing abscissa over one forward half-swing of the maintenance
/// orbit with zero-dynamics energy `energy` (tether straight along link 1 at
/// its nominal length). Releases are considered only while the end-effector
/// moves towards +x.
inline double orbit_reach(const RobotParams& p, double energy, int samples = 256) {
  const double beta = zero_dynamics_beta(p);
  const double c = 1.0 - energy / beta;
  const double amp = c <= -1.0 ? std::numbers::pi : std::acos(std::clamp(c, -1.0, 1.0));
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= samples; ++i) {
    const double q1 = -amp + 2.0 * amp * i / samples;
    const double ke = energy - beta * (1.0 - std::cos(q1));
    if (ke < 0.0) continue;
    JointState s;
    s.q = {q1, 0.0, p.q3_nominal};
    s.qdot = {std::sqrt(2.0 * ke), 0.0, 0.0};
    const EndEffectorPose fk = forward_kinematics(p, s);
    const Vector3d te = jacobian(p, s) * s.qdot;
    const PlanarFlightState fs{{fk.x, fk.y}, {te[0], te[1]}, tether_anchor(p, q1)};
    if (fs.pos.y() < 0.0) continue;
    best = std::max(best, predict_x_land(fs, p.g));
  }
  return best;
}

/// Smallest zero-dynamics energy whose orbit reaches `x_goal`, or empty when
/// no orbit below the separatrix does.
inline std::optional<double> energy_for_reach(const RobotParams& p, double x_goal) {
  const double e_max = 2.0 * zero_dynamics_beta(p) * 0.999;
  if (orbit_reach(p, e_max) < x_goal) return std::nullopt;
  double lo = 0.0, hi = e_max;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (orbit_reach(p, mid) >= x_goal ? hi : lo) = mid;
  }
  return hi;
}

inline SwingReference swing_reference(const RobotParams& p, SwingConfig cfg = {}) {
  return SwingReference(p, cfg);
}

}  // namespace casting::control
