#pragma once

#include <algorithm>
#include <optional>

#include "casting/sim/scenario.hpp"

namespace casting::sim {

/// Commanded target position as a function of the track's own clock.
inline Vector2d commanded_target(const TargetSpec& spec, double tau) {
  tau = std::max(tau, 0.0);
  switch (spec.kind) {
    case TargetKind::fixed:
    case TargetKind::external:
      return spec.position;
    case TargetKind::constant_velocity:
      return spec.position + tau * spec.velocity;
    case TargetKind::waypoints: {
      const auto& w = spec.waypoints;
      if (tau <= w.front().t) return spec.position;
      if (tau >= w.back().t) return w.back().p;
      std::size_t k = 1;
      while (w[k].t < tau) ++k;
      const double s = (tau - w[k - 1].t) / (w[k].t - w[k - 1].t);
      return (1.0 - s) * w[k - 1].p + s * w[k].p;
    }
  }
  return spec.position;
}

/// Target that follows its commanded track but never faster than the speed
/// cap; advanced once per control tick.
class TargetTrack {
 public:
  explicit TargetTrack(const TargetSpec& spec) : spec_(spec), pos_(spec.position), external_(spec.position) {}

  const Vector2d& position() const { return pos_; }
  bool clamped() const { return clamped_; }

  /// Sets the commanded position of an external target.
  void set_external(const Vector2d& p) { external_ = p; }

  /// Moves to the commanded position at time `t`; `t_release` is the throw
  /// time once known. Returns true when the speed cap limited this move.
  bool advance(double t, double dt, std::optional<double> t_release) {
    Vector2d goal;
    if (spec_.kind == TargetKind::external) {
      goal = external_;
    } else {
      const double tau = spec_.clock == TargetClock::sim ? t : (t_release ? t - *t_release : 0.0);
      goal = commanded_target(spec_, tau);
    }
    const Vector2d step = goal - pos_;
    const double max_step = spec_.speed_cap * dt;
    const double n = step.norm();
    if (n > max_step * (1.0 + 1e-12)) {
      pos_ += step * (max_step / n);
      clamped_ = true;
      return true;
    }
    pos_ = goal;
    return false;
  }

 private:
  TargetSpec spec_;
  Vector2d pos_;
  Vector2d external_;
  bool clamped_ = false;
};

}  // namespace casting::sim
