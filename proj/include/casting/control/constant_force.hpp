#pragma once

// Steering with a single constant tether force: predict the flight under a
// given force, score it by the closest approach to the target before the
// end-effector drops through the target height, and pick the best force in
// [0, u_max].

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "casting/error.hpp"
#include "casting/flight.hpp"
#include "casting/integrate.hpp"

namespace casting::control {

struct FlightModel {
  double m = 0.084;
  double g = 9.81;
  double dt = 1e-3;      ///< prediction step [s]
  double horizon = 3.0;  ///< longest predicted flight [s]

  void validate() const {
    if (!(m > 0 && g > 0 && dt > 0 && horizon > dt)) throw ValidationError("invalid flight model");
  }
};

struct ApproachPrediction {
  double t_f = 0.0;   ///< time of closest approach, relative to the start state
  double miss = 0.0;  ///< distance at closest approach
  Vector2d pos = Vector2d::Zero();
  bool crossed = false;  ///< window closed by a downward crossing of the target height
};

namespace detail {

struct HermiteSpan {
  Vector4d a, b;
  double h;
  Vector2d pos(double s) const {  // s in [0, 1]
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    return h00 * a.head<2>() + h10 * h * a.tail<2>() + h01 * b.head<2>() + h11 * h * b.tail<2>();
  }
};

inline double golden_min(const auto& f, double lo, double hi, int iters) {
  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = hi - kInvPhi * (hi - lo), x2 = lo + kInvPhi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 <= f2) {
      hi = x2; x2 = x1; f2 = f1;
      x1 = hi - kInvPhi * (hi - lo); f1 = f(x1);
    } else {
      lo = x1; x1 = x2; f1 = f2;
      x2 = lo + kInvPhi * (hi - lo); f2 = f(x2);
    }
  }
  return f1 <= f2 ? x1 : x2;
}

}  // namespace detail

/// Closest approach to `target` under constant force `u`. The window ends
/// when the end-effector crosses the target height moving down, or at the
/// model horizon. Sampled with RK4 and refined on cubic Hermite interpolants.
inline ApproachPrediction predict_approach(const FlightModel& model, const PlanarFlightState& fs,
                                           const Vector2d& target, double u) {
  const auto field = [&](const Vector4d& x) {
    return planar_flight_field(x, fs.anchor, model.m, model.g, u);
  };
  const double y_t = target.y();
  const auto n_steps = static_cast<std::size_t>(std::ceil(model.horizon / model.dt));

  std::vector<Vector4d> xs;
  xs.reserve(n_steps + 1);
  xs.push_back(fs.packed());
  std::optional<detail::HermiteSpan> crossing;
  while (xs.size() <= n_steps) {
    const Vector4d next = rk4_step(field, xs.back(), model.dt);
    if (xs.back()[1] >= y_t && next[1] < y_t) {
      crossing = detail::HermiteSpan{xs.back(), next, model.dt};
      break;
    }
    xs.push_back(next);
  }

  std::size_t best_k = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double d2 = (xs[k].head<2>() - target).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best_k = k;
    }
  }
  ApproachPrediction out;
  out.t_f = static_cast<double>(best_k) * model.dt;
  out.pos = xs[best_k].head<2>();

  const auto refine = [&](const detail::HermiteSpan& span, double t0, double s_hi) {
    const auto d2 = [&](double s) { return (span.pos(s) - target).squaredNorm(); };
    const double s = detail::golden_min(d2, 0.0, s_hi, 40);
    if (d2(s) < best_d2) {
      best_d2 = d2(s);
      out.t_f = t0 + s * span.h;
      out.pos = span.pos(s);
    }
  };
  const double kdt = static_cast<double>(best_k) * model.dt;
  if (best_k > 0) refine({xs[best_k - 1], xs[best_k], model.dt}, kdt - model.dt, 1.0);
  if (best_k + 1 < xs.size()) refine({xs[best_k], xs[best_k + 1], model.dt}, kdt, 1.0);

  if (crossing) {
    const auto& sp = *crossing;
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      (sp.pos(mid).y() >= y_t ? lo : hi) = mid;
    }
    out.crossed = true;
    if (best_k + 1 == xs.size()) refine(sp, kdt, lo);
  }
  out.miss = std::sqrt(best_d2);
  return out;
}

struct ConstantForceResult {
  double u = 0.0;
  double t_f = 0.0;   ///< predicted time of closest approach (relative)
  double miss = 0.0;
  int iterations = 0;
  bool converged = true;
};

struct ConstantForceOptions {
  int scan_points = 33;
  double tol = 1e-3;          ///< force resolution as a fraction of u_max
  int max_newton = 20;
  double newton_step_cap = 0.1;  ///< fraction of u_max
};

/// Bounded scalar minimisation of the squared closest-approach distance.
///
/// Without a warm start: uniform scan, then golden section on the best
/// bracket. With a warm start: safeguarded Newton on finite-difference
/// derivatives, falling back to the cold search if it fails to converge.
inline ConstantForceResult constant_force_opt(const FlightModel& model, const PlanarFlightState& fs,
                                              const Vector2d& target, double u_max,
                                              std::optional<double> warm = std::nullopt,
                                              const ConstantForceOptions& opt = {}) {
  if (!(u_max > 0.0)) throw ValidationError("u_max must be positive");
  const auto cost = [&](double u) { return predict_approach(model, fs, target, u).miss; };
  const double tol = opt.tol * u_max;

  const auto finish = [&](double u, int iters, bool converged) {
    u = std::clamp(u, 0.0, u_max);
    const ApproachPrediction a = predict_approach(model, fs, target, u);
    return ConstantForceResult{u, a.t_f, a.miss, iters, converged};
  };

  const auto cold = [&]() {
    const int n = std::max(opt.scan_points, 3);
    double best_u = 0.0, best_c = std::numeric_limits<double>::infinity();
    int best_i = 0;
    for (int i = 0; i < n; ++i) {
      const double u = u_max * i / (n - 1);
      const double c = cost(u);
      if (c < best_c) {
        best_c = c;
        best_u = u;
        best_i = i;
      }
    }
    const double lo = u_max * std::max(best_i - 1, 0) / (n - 1);
    const double hi = u_max * std::min(best_i + 1, n - 1) / (n - 1);
    const int iters = static_cast<int>(std::ceil(std::log((hi - lo) / tol) / std::log(1.618034))) + 1;
    const double u = detail::golden_min([&](double v) { return cost(v) * cost(v); }, lo, hi,
                                        std::max(iters, 1));
    if (cost(u) <= best_c) best_u = u;
    return finish(best_u, iters, true);
  };

  if (!warm) return cold();

  // Safeguarded Newton on J(u) = miss^2.
  const auto J = [&](double u) {
    const double c = cost(u);
    return c * c;
  };
  const double h = 1e-4 * u_max;
  double u = std::clamp(*warm, 0.0, u_max);
  double Ju = J(u);
  for (int it = 1; it <= opt.max_newton; ++it) {
    const double lo = std::max(u - h, 0.0), hi = std::min(u + h, u_max);
    const double Jl = J(lo), Jh = J(hi);
    const double grad = (Jh - Jl) / (hi - lo);
    const double curv = lo < u && u < hi ? (Jh - 2.0 * Ju + Jl) / (h * h) : 0.0;
    const double cap = opt.newton_step_cap * u_max;
    double step = curv > 0.0 ? -grad / curv : (grad > 0.0 ? -cap : cap);
    step = std::clamp(step, -cap, cap);
    double u_new = std::clamp(u + step, 0.0, u_max);
    double J_new = J(u_new);
    for (int bt = 0; bt < 12 && J_new > Ju; ++bt) {
      step *= 0.5;
      u_new = std::clamp(u + step, 0.0, u_max);
      J_new = J(u_new);
    }
    if (J_new > Ju) return finish(u, it, true);  // no descent left at this resolution
    const double moved = std::abs(u_new - u);
    u = u_new;
    Ju = J_new;
    if (moved <= tol) return finish(u, it, true);
  }
  ConstantForceResult fallback = cold();
  fallback.converged = false;
  if (finish(u, opt.max_newton, false).miss < fallback.miss) return finish(u, opt.max_newton, false);
  return fallback;
}

}  // namespace casting::control
