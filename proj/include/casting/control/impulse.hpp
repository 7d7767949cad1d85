#pragma once

// Single-brake steering: the tether unwinds freely until the braking instant,
// then its length is locked and the end-effector swings on a circle about the
// anchor through the target.

#include <cmath>
#include <optional>
#include <vector>

#include "casting/control/ballistics.hpp"
#include "casting/error.hpp"
#include "casting/flight.hpp"
#include "casting/observation.hpp"

namespace casting::control {

enum class BrakeCommand { release, hold };

struct BrakePlan {
  double obs_t = 0.0;
  double radius = 0.0;
  std::optional<double> t_brake;
};

class ImpulseController {
 public:
  explicit ImpulseController(double g, double ground = 0.0) : g_(g), ground_(ground) {
    if (!(g > 0)) throw ValidationError("gravity must be positive");
  }

  /// Recomputes the braking instant from the current free-flight state and
  /// the newest observation. Ignored once the brake is engaged.
  const BrakePlan& observe(double t, const PlanarFlightState& fs, const TargetObservation& obs) {
    if (!braked_) {
      const BrakingPrediction b = braking_time(fs, obs.p, g_, t, ground_);
      history_.push_back({obs.t, b.radius, b.t_brake});
    }
    return history_.back();
  }

  std::optional<double> t_brake() const {
    return history_.empty() ? std::nullopt : history_.back().t_brake;
  }
  double radius() const { return history_.empty() ? 0.0 : history_.back().radius; }

  BrakeCommand command(double t) const {
    if (braked_) return BrakeCommand::hold;
    const auto tb = t_brake();
    return tb && t >= *tb ? BrakeCommand::hold : BrakeCommand::release;
  }

  void engage() { braked_ = true; }
  bool braked() const { return braked_; }
  const std::vector<BrakePlan>& history() const { return history_; }

 private:
  double g_;
  double ground_;
  bool braked_ = false;
  std::vector<BrakePlan> history_;
};

/// End-effector on a tether of locked length: angle from the downward
/// vertical through the anchor and its rate.
struct LockedTetherState {
  Vector2d anchor = Vector2d::Zero();
  double length = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;

  Vector2d pos() const { return anchor + length * Vector2d(std::sin(theta), -std::cos(theta)); }
  Vector2d vel() const {
    return length * theta_dot * Vector2d(std::cos(theta), std::sin(theta));
  }
  /// Tether tension per unit mass; negative means the tether cannot stay taut.
  double tension_per_mass(double g) const {
    return length * theta_dot * theta_dot + g * std::cos(theta);
  }
};

/// Locks the tether at the current anchor distance. The radial velocity is
/// absorbed by the brake; only the tangential component survives.
inline LockedTetherState lock_tether(const PlanarFlightState& fs) {
  const Vector2d d = fs.pos - fs.anchor;
  const double len = d.norm();
  if (len < kCoincidenceTol) throw DegenerateGeometryError("end-effector at tether anchor");
  LockedTetherState s;
  s.anchor = fs.anchor;
  s.length = len;
  s.theta = std::atan2(d.x(), -d.y());
  const Vector2d e_theta(std::cos(s.theta), std::sin(s.theta));
  s.theta_dot = fs.vel.dot(e_theta) / len;
  return s;
}

/// (theta, theta_dot) derivative of the locked-length pendulum.
inline Vector2d locked_tether_field(const Vector2d& x, double length, double g) {
  return {x[1], -g / length * std::sin(x[0])};
}

}  // namespace casting::control
