#pragma once

// Minimum-time transfer of the one-cable robot m x'' = -sign(x) u, u in
// [0, u_max], to rest at x_t != 0.
//
// Under full force the "energy" E = v^2/2 + a|x| (a = u_max/m) is conserved,
// so every full-force arc runs on a closed orbit; coasting changes E by
// a * change in |x|. A time-optimal plan therefore ends by riding the orbit
// E = a|x_t| into (x_t, 0), entered from a coast. The solver shoots on the
// durations of the arcs before that final coast; the final coast and the ride
// are solved in closed form.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "casting/error.hpp"
#include "casting/flight.hpp"
#include "casting/integrate.hpp"
#include "casting/optimal/nelder_mead.hpp"

namespace casting::optimal {

struct LineState {
  double x = 0.0;
  double v = 0.0;
};

struct BangBangPlan {
  std::vector<double> switch_times;  ///< strictly increasing, all < t_f
  std::vector<double> levels;        ///< force on each arc, alternating 0 / u_max
  double t_f = 0.0;
  LineState terminal;                ///< closed-form end state of the plan
  double terminal_error = 0.0;       ///< max(|x - x_t|, |v|)
  bool feasible = true;
  bool switch_cap_binding = false;   ///< best plan uses the full switch budget

  double level_at(double t) const {
    std::size_t k = 0;
    while (k < switch_times.size() && t >= switch_times[k]) ++k;
    return levels.empty() ? 0.0 : levels[k];
  }
};

struct BangBangOptions {
  int max_switches = 6;
  double duration_scale = 1.0;  ///< multiplies the default arc-duration search range
};

namespace detail {

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// Exact propagation of one arc with constant force level; `acc` is u/m.
inline LineState propagate(LineState s, double acc, double dur) {
  if (acc == 0.0 || (s.x == 0.0 && s.v == 0.0)) return {s.x + s.v * dur, s.v};
  double left = dur;
  for (int guard = 0; guard < 100000 && left > 0.0; ++guard) {
    double side = sgn(s.x);
    if (side == 0.0) side = sgn(s.v);
    if (side == 0.0) break;
    const double a = -side * acc;
    // time to reach x = 0 on this side (moving towards or away and returning)
    const double disc = s.v * s.v - 2.0 * a * s.x;
    double t_cross = std::numeric_limits<double>::infinity();
    if (disc >= 0.0) {
      const double r = std::sqrt(disc);
      for (double cand : {(-s.v - r) / a, (-s.v + r) / a}) {
        if (cand > 1e-15 && cand < t_cross) t_cross = cand;
      }
    }
    if (t_cross >= left) {
      s = {s.x + s.v * left + 0.5 * a * left * left, s.v + a * left};
      left = 0.0;
    } else {
      s = {0.0, s.v + a * t_cross};  // the next pass picks the side from the velocity
      left -= t_cross;
      if (s.v == 0.0) break;
    }
  }
  return s;
}

/// Time from (x, v) on the orbit E = acc * x_t (x_t > 0) to (x_t, 0) riding
/// under full force.
inline double ride_time(const LineState& s, double acc, double x_t) {
  const double w = std::sqrt(2.0 * acc * x_t);
  const double q = w / acc;
  double tau;  // phase measured from (x_t, 0) along the motion
  if (s.x >= 0.0 && s.v <= 0.0) tau = -s.v / acc;
  else if (s.x <= 0.0 && s.v <= 0.0) tau = q + (s.v + w) / acc;
  else if (s.x <= 0.0 && s.v >= 0.0) tau = 2.0 * q + s.v / acc;
  else tau = 3.0 * q + (w - s.v) / acc;
  const double period = 4.0 * q;
  double r = period - tau;
  if (r >= period) r -= period;
  if (r < 0.0) r = 0.0;
  return r;
}

/// Non-negative coast durations after which the state lies on the target
/// orbit, in increasing order.
inline std::vector<double> coast_hits(const LineState& s, double acc, double x_t) {
  std::vector<double> out;
  const double rho = x_t - s.v * s.v / (2.0 * acc);
  if (rho < 0.0) return out;
  if (s.v == 0.0) {
    if (std::abs(std::abs(s.x) - rho) <= 1e-12 * std::max(1.0, x_t)) out.push_back(0.0);
    return out;
  }
  for (double target : {rho, -rho}) {
    const double t = (target - s.x) / s.v;
    if (t >= -1e-14) out.push_back(std::max(t, 0.0));
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Completion {
  double total = std::numeric_limits<double>::infinity();
  double coast = 0.0;
  double ride = 0.0;
};

/// Best finish from `s`: coast onto the target orbit, then ride.
inline Completion complete(const LineState& s, double acc, double x_t) {
  Completion best;
  for (double c : coast_hits(s, acc, x_t)) {
    const LineState on = {s.x + s.v * c, s.v};
    const double r = ride_time(on, acc, x_t);
    if (c + r < best.total) best = {c + r, c, r};
  }
  return best;
}

}  // namespace detail

/// Time-optimal bang-bang plan with at most `max_switches` switches.
inline BangBangPlan bangbang_min_time(double m, double u_max, LineState xi0, double x_t,
                                      const BangBangOptions& opt = {}) {
  if (!(m > 0 && u_max > 0)) throw ValidationError("mass and force bound must be positive");
  if (x_t == 0.0) throw ValidationError("target at the origin is excluded");
  if (opt.max_switches < 0) throw ValidationError("max_switches must be >= 0");

  // Work on x_t > 0; the dynamics are odd, so mirroring leaves the plan unchanged.
  const double mirror = x_t > 0.0 ? 1.0 : -1.0;
  const LineState s0{mirror * xi0.x, mirror * xi0.v};
  const double xt = mirror * x_t;
  const double acc = u_max / m;

  BangBangPlan plan;
  if (s0.x == xt && s0.v == 0.0) {
    plan.terminal = xi0;
    return plan;
  }

  const auto period = [&](double e) { return 4.0 * std::sqrt(2.0 * std::max(e, 0.0)) / acc; };
  const double e0 = 0.5 * s0.v * s0.v + acc * std::abs(s0.x);
  const double d_max = opt.duration_scale * std::max(period(e0), period(acc * xt));

  // Prefix of k free arcs, the last one at full force, alternating backwards.
  const auto prefix_level = [&](int k, int i) { return (k - 1 - i) % 2 == 0 ? acc : 0.0; };
  const auto evaluate = [&](int k, const std::vector<double>& d) {
    LineState s = s0;
    double t = 0.0;
    for (int i = 0; i < k; ++i) {
      const double di = std::clamp(d[static_cast<std::size_t>(i)], 0.0, d_max);
      s = detail::propagate(s, prefix_level(k, i), di);
      t += di;
    }
    return t + detail::complete(s, acc, xt).total;
  };

  struct Best {
    double t = std::numeric_limits<double>::infinity();
    int k = -1;
    std::vector<double> d;
  } best;

  // k = 0 covers "coast then ride" (one switch) and "ride only" (none).
  const int k_max = std::max(0, opt.max_switches - 1);
  static constexpr std::array<int, 6> kGrid{1, 1500, 120, 36, 14, 8};
  for (int k = 0; k <= k_max; ++k) {
    const int n = k < static_cast<int>(kGrid.size()) ? kGrid[static_cast<std::size_t>(k)] : 6;
    struct Cand {
      double t;
      std::vector<double> d;
    };
    std::vector<Cand> cands;
    std::vector<int> idx(static_cast<std::size_t>(k), 0);
    std::vector<double> d(static_cast<std::size_t>(k), 0.0);
    while (true) {
      for (int i = 0; i < k; ++i)
        d[static_cast<std::size_t>(i)] = d_max * idx[static_cast<std::size_t>(i)] / std::max(n - 1, 1);
      const double t = evaluate(k, d);
      if (std::isfinite(t)) cands.push_back({t, d});
      int i = 0;
      while (i < k && ++idx[static_cast<std::size_t>(i)] == n) idx[static_cast<std::size_t>(i++)] = 0;
      if (i == k) break;
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.t < b.t; });
    const std::size_t n_refine = k == 0 ? std::min<std::size_t>(cands.size(), 1) : std::min<std::size_t>(cands.size(), 12);
    for (std::size_t c = 0; c < n_refine; ++c) {
      std::vector<double> x = cands[c].d;
      double t = cands[c].t;
      if (k > 0) {
        const double step = d_max / std::max(n - 1, 1);
        const auto f = [&](const std::vector<double>& z) {
          double pen = 0.0;
          for (double zi : z) pen += std::max(0.0, -zi) + std::max(0.0, zi - d_max);
          return evaluate(k, z) + 1e3 * pen;
        };
        NelderMeadResult r = nelder_mead(f, x, 0.5 * step, 1e-13, 4000);
        r = nelder_mead(f, r.x, 0.05 * step, 1e-14, 4000);
        for (double& zi : r.x) zi = std::clamp(zi, 0.0, d_max);
        const double tr = evaluate(k, r.x);
        if (tr < t) {
          t = tr;
          x = r.x;
        }
      }
      if (t < best.t - 1e-12) best = {t, k, x};
    }
  }

  if (!std::isfinite(best.t)) {
    plan.feasible = false;
    plan.t_f = std::numeric_limits<double>::infinity();
    plan.terminal = xi0;
    plan.terminal_error = std::max(std::abs(xi0.x - x_t), std::abs(xi0.v));
    return plan;
  }

  // Assemble arcs, then merge zero-length ones.
  std::vector<std::pair<double, double>> arcs;  // (level as force, duration)
  LineState s = s0;
  for (int i = 0; i < best.k; ++i) {
    const double di = std::clamp(best.d[static_cast<std::size_t>(i)], 0.0, d_max);
    arcs.emplace_back(prefix_level(best.k, i) == 0.0 ? 0.0 : u_max, di);
    s = detail::propagate(s, prefix_level(best.k, i), di);
  }
  const detail::Completion fin = detail::complete(s, acc, xt);
  arcs.emplace_back(0.0, fin.coast);
  arcs.emplace_back(u_max, fin.ride);

  std::vector<std::pair<double, double>> merged;
  constexpr double kZeroArc = 1e-12;
  for (const auto& a : arcs) {
    if (a.second <= kZeroArc) continue;
    if (!merged.empty() && merged.back().first == a.first) merged.back().second += a.second;
    else merged.push_back(a);
  }

  double t = 0.0;
  LineState end = s0;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    if (i > 0) plan.switch_times.push_back(t);
    plan.levels.push_back(merged[i].first);
    t += merged[i].second;
    end = detail::propagate(end, merged[i].first / m, merged[i].second);
  }
  if (plan.levels.empty()) plan.levels.push_back(0.0);
  plan.t_f = t;
  plan.terminal = {mirror * end.x, mirror * end.v};
  plan.terminal_error = std::max(std::abs(plan.terminal.x - x_t), std::abs(plan.terminal.v));
  plan.switch_cap_binding = static_cast<int>(plan.switch_times.size()) >= opt.max_switches;
  return plan;
}

/// Forward RK4 simulation of a plan through the one-cable model. Steps are
/// cut at the switch times and at every passage through x = 0, where the
/// force direction flips.
inline LineState simulate_plan(const BangBangPlan& plan, double m, LineState xi0, double max_dt) {
  if (!(max_dt > 0.0)) throw ValidationError("max_dt must be positive");
  Vector2d x(xi0.x, xi0.v);
  std::vector<double> bounds = plan.switch_times;
  bounds.push_back(plan.t_f);
  double t = 0.0;
  for (std::size_t arc = 0; arc < bounds.size(); ++arc) {
    const double u = plan.levels.empty() ? 0.0 : plan.levels[arc];
    while (t < bounds[arc]) {
      const double side = x[0] != 0.0 ? detail::sgn(x[0]) : detail::sgn(x[1]);
      if (side == 0.0 && u > 0.0) break;  // at rest on the origin
      const auto field = [&](const Vector2d& z) { return Vector2d(z[1], one_cable_accel(m, side, u)); };
      double h = std::min(max_dt, bounds[arc] - t);
      Vector2d next = rk4_step(field, x, h);
      if (side != 0.0 && u > 0.0 && detail::sgn(next[0]) == -side) {
        double lo = 0.0, hi = h;
        for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
          const double mid = 0.5 * (lo + hi);
          (detail::sgn(rk4_step(field, x, mid)[0]) == -side ? hi : lo) = mid;
        }
        h = hi;
        next = rk4_step(field, x, h);
        next[0] = 0.0;
      }
      x = next;
      t += h;
    }
    t = bounds[arc];
  }
  return {x[0], x[1]};
}

}  // namespace casting::optimal
