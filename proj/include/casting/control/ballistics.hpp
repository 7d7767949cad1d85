#pragma once

// Free-flight (tether released) predictions: landing abscissa and the braking
// instant at which the unwound tether length reaches the anchor-target
// distance.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "casting/error.hpp"
#include "casting/flight.hpp"

namespace casting::control {

/// Time until the free parabola descends to height `ground`.
inline double landing_time(const PlanarFlightState& fs, double g, double ground = 0.0) {
  if (!(g > 0.0)) throw ValidationError("gravity must be positive");
  const double h = fs.pos.y() - ground;
  const double vy = fs.vel.y();
  const double disc = vy * vy + 2.0 * g * h;
  if (disc < 0.0) throw NeverLandsError("parabola never reaches the ground plane");
  return (vy + std::sqrt(disc)) / g;
}

/// Abscissa where the free parabola meets the ground plane.
inline double predict_x_land(const PlanarFlightState& fs, double g, double ground = 0.0) {
  return fs.pos.x() + fs.vel.x() * landing_time(fs, g, ground);
}

/// Position on the free parabola `tau` seconds ahead.
inline Vector2d ballistic_position(const PlanarFlightState& fs, double g, double tau) {
  return fs.pos + fs.vel * tau - Vector2d(0.0, 0.5 * g * tau * tau);
}

inline Vector2d ballistic_velocity(const PlanarFlightState& fs, double g, double tau) {
  return fs.vel - Vector2d(0.0, g * tau);
}

/// Real roots of c[0] + c[1] t + ... + c[n] t^n, from the companion matrix and
/// polished by Newton.
inline std::vector<double> real_polynomial_roots(std::vector<double> c, double imag_tol = 1e-7) {
  while (!c.empty() && c.back() == 0.0) c.pop_back();
  const int n = static_cast<int>(c.size()) - 1;
  if (n < 1) return {};
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < n; ++i) comp(i, n - 1) = -c[i] / c[n];
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(comp, false).eigenvalues();

  auto eval = [&](double t, double& dp) {
    double p = c[n];
    dp = 0.0;
    for (int i = n - 1; i >= 0; --i) {
      dp = dp * t + p;
      p = p * t + c[i];
    }
    return p;
  };
  std::vector<double> roots;
  for (int i = 0; i < n; ++i) {
    const double scale = std::max(1.0, std::abs(ev[i]));
    if (std::abs(ev[i].imag()) > imag_tol * scale) continue;
    double t = ev[i].real();
    for (int it = 0; it < 8; ++it) {
      double dp = 0.0;
      const double p = eval(t, dp);
      if (dp == 0.0) break;
      const double step = p / dp;
      t -= step;
      if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(t))) break;
    }
    roots.push_back(t);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

struct BrakingPrediction {
  double radius = 0.0;            ///< anchor-to-target distance the tether must reach
  std::optional<double> t_brake;  ///< absolute time, empty when unreachable
};

/// Earliest instant at or after `t_now` when the free-flight distance to the
/// anchor equals the anchor-target distance. If the end-effector is already at
/// or beyond that radius the answer is `t_now`. Crossings after ground contact
/// count as unreachable.
inline BrakingPrediction braking_time(const PlanarFlightState& fs, const Vector2d& target, double g,
                                      double t_now, double ground = 0.0) {
  BrakingPrediction out;
  out.radius = (fs.anchor - target).norm();
  const Vector2d d = fs.pos - fs.anchor;
  if (d.norm() >= out.radius) {
    out.t_brake = t_now;
    return out;
  }
  double t_ground = std::numeric_limits<double>::infinity();
  try {
    t_ground = landing_time(fs, g, ground);
  } catch (const NeverLandsError&) {
  }

  // |d + v t - (g/2) t^2 e_y|^2 - R^2 as a quartic in t.
  const Vector2d v = fs.vel;
  const double hg = 0.5 * g;
  const std::vector<double> c{d.squaredNorm() - out.radius * out.radius, 2.0 * d.dot(v),
                              v.squaredNorm() - 2.0 * hg * d.y(), -2.0 * hg * v.y(), hg * hg};
  for (double tau : real_polynomial_roots(c)) {
    if (tau < 0.0) continue;
    if (tau > t_ground) break;
    out.t_brake = t_now + tau;
    break;
  }
  return out;
}

}  // namespace casting::control
