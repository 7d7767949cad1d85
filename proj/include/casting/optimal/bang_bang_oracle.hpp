#pragma once

// Brute-force reference for the one-cable minimum-time problem: switch times
// on nested grids, the closing coast found by scanning and bisection on the
// energy residual, and the final full-force ride simulated arc by arc. Kept
// independent of the shooting solver so the two can cross-check each other.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "casting/error.hpp"
#include "casting/optimal/bang_bang.hpp"

namespace casting::optimal {

struct OracleOptions {
  double resolution = 1e-3;  ///< finest switch-time grid step [s]
  /// Grid intervals per arc on the coarsest level, indexed by prefix length - 1;
  /// its size is the number of arcs allowed before the closing coast.
  std::vector<int> coarse_points{240, 60, 24, 12, 8};
  int keep = 10;             ///< candidates carried to each finer level
  double horizon = 0.0;      ///< per-arc duration bound; 0 picks one from the orbit periods
};

struct OracleResult {
  double t_f = std::numeric_limits<double>::infinity();
  std::vector<double> durations;  ///< every arc, including the closing coast and ride
  double first_level = 0.0;       ///< force of the first arc
  double resolution = 0.0;        ///< coarsest final grid step over the refinement chains
};

namespace oracle_detail {

// Kinematics of one arc, stepped through origin crossings.
inline LineState advance(LineState s, double acc, double dur) {
  while (dur > 0.0) {
    if (acc == 0.0) return {s.x + s.v * dur, s.v};
    const double side = s.x != 0.0 ? (s.x > 0 ? 1.0 : -1.0) : (s.v > 0 ? 1.0 : (s.v < 0 ? -1.0 : 0.0));
    if (side == 0.0) return s;
    const double a = -side * acc;
    // x + v t + a t^2 / 2 = 0
    double t0 = std::numeric_limits<double>::infinity();
    const double disc = s.v * s.v - 2.0 * a * s.x;
    if (disc >= 0.0) {
      const double r = std::sqrt(disc);
      for (double c : {(-s.v + r) / a, (-s.v - r) / a})
        if (c > 1e-15) t0 = std::min(t0, c);
    }
    if (t0 >= dur) return {s.x + s.v * dur + 0.5 * a * dur * dur, s.v + a * dur};
    s = {0.0, s.v + a * t0};
    dur -= t0;
  }
  return s;
}

inline double energy(const LineState& s, double acc) { return 0.5 * s.v * s.v + acc * std::abs(s.x); }

/// Earliest coast duration in [0, horizon] that brings the energy to e_t.
inline double closing_coast(const LineState& s, double acc, double e_t, double horizon, double scan) {
  const auto f = [&](double c) { return energy({s.x + s.v * c, s.v}, acc) - e_t; };
  double prev_c = 0.0, prev_f = f(0.0);
  if (std::abs(prev_f) <= 1e-13 * std::max(1.0, e_t)) return 0.0;
  for (double c = scan; c <= horizon + scan; c += scan) {
    const double fc = f(c);
    if ((fc <= 0.0) != (prev_f <= 0.0)) {
      double lo = prev_c, hi = c;
      for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        ((f(mid) <= 0.0) == (prev_f <= 0.0) ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    prev_c = c;
    prev_f = fc;
  }
  return -1.0;
}

/// Full-force ride from a state on the target orbit until it comes to rest at x_t.
inline double ride_to_rest(LineState s, double acc, double x_t) {
  double t = 0.0;
  for (int guard = 0; guard < 8; ++guard) {
    if (s.x == 0.0 && s.v == 0.0) return -1.0;
    if (s.x >= 0.0 && s.v >= 0.0) {
      // decelerate to the turning point, which must be the target
      const double x_turn = s.x + 0.5 * s.v * s.v / acc;
      if (std::abs(x_turn - x_t) > 1e-6 * std::max(1.0, x_t)) return -1.0;
      return t + s.v / acc;
    }
    double step;
    if (s.x > 0.0) {  // falling in from the right
      step = (s.v + std::sqrt(s.v * s.v + 2.0 * acc * s.x)) / acc;
      s = {0.0, s.v - acc * step};
    } else if (s.v < 0.0) {  // braking on the left
      step = -s.v / acc;
      s = {s.x - 0.5 * s.v * s.v / acc, 0.0};
    } else {  // falling in from the left
      step = (-s.v + std::sqrt(s.v * s.v - 2.0 * acc * s.x)) / acc;
      s = {0.0, s.v + acc * step};
    }
    t += step;
  }
  return -1.0;
}

}  // namespace oracle_detail

inline OracleResult bangbang_oracle(double m, double u_max, LineState xi0, double x_t,
                                    const OracleOptions& opt = {}) {
  if (!(opt.resolution > 0.0)) throw ValidationError("oracle resolution must be positive");
  if (x_t == 0.0) throw ValidationError("target at the origin is excluded");
  const double mirror = x_t > 0.0 ? 1.0 : -1.0;
  const LineState s0{mirror * xi0.x, mirror * xi0.v};
  const double xt = mirror * x_t;
  const double acc = u_max / m;
  const double e_t = acc * xt;

  OracleResult best;
  if (s0.x == xt && s0.v == 0.0) {
    best.t_f = 0.0;
    return best;
  }
  const double e0 = oracle_detail::energy(s0, acc);
  const double horizon = opt.horizon > 0.0
                             ? opt.horizon
                             : 4.0 * std::sqrt(2.0 * std::max(e0, e_t)) / acc;

  // Cost of a prefix (durations of alternating arcs starting at `lead`).
  const auto cost = [&](double lead, const std::vector<double>& d, double scan, std::vector<double>* arcs) {
    LineState s = s0;
    double t = 0.0, level = lead;
    for (double di : d) {
      s = oracle_detail::advance(s, level, di);
      t += di;
      level = level == 0.0 ? acc : 0.0;
    }
    // the closing coast needs the previous arc at full force (or no prefix)
    if (!d.empty() && level != 0.0) return std::numeric_limits<double>::infinity();
    const double c = oracle_detail::closing_coast(s, acc, e_t, 2.0 * horizon, scan);
    if (c < 0.0) return std::numeric_limits<double>::infinity();
    s = {s.x + s.v * c, s.v};
    const double r = oracle_detail::ride_to_rest(s, acc, xt);
    if (r < 0.0) return std::numeric_limits<double>::infinity();
    if (arcs) {
      *arcs = d;
      arcs->push_back(c);
      arcs->push_back(r);
    }
    return t + c + r;
  };

  struct Cand {
    double t;
    double lead;
    std::vector<double> d;
  };
  const auto consider = [&](std::vector<Cand>& pool, const Cand& c) {
    if (!std::isfinite(c.t)) return;
    pool.push_back(c);
  };
  const auto trim = [&](std::vector<Cand>& pool) {
    std::sort(pool.begin(), pool.end(), [](const Cand& a, const Cand& b) { return a.t < b.t; });
    if (pool.size() > static_cast<std::size_t>(opt.keep)) pool.resize(static_cast<std::size_t>(opt.keep));
  };

  const double scan = horizon / 500.0;
  // Halves the step around every kept candidate until it is at most the
  // resolution. A finer resolution only appends levels to the same chain and
  // incumbents survive each level, so it never does worse.
  double final_h = 0.0;
  const auto refine = [&](std::vector<Cand> pool, double h) {
    while (h > opt.resolution) {
      h *= 0.5;
      std::vector<Cand> next = pool;
      for (const Cand& c : pool) {
        const std::size_t k = c.d.size();
        std::vector<int> off(k, -2);
        while (true) {
          std::vector<double> d = c.d;
          bool ok = true;
          for (std::size_t i = 0; i < k; ++i) {
            d[i] += h * off[i];
            if (d[i] < 0.0) ok = false;
          }
          if (ok) consider(next, {cost(c.lead, d, scan, nullptr), c.lead, d});
          std::size_t i = 0;
          while (i < k && ++off[i] > 2) off[i++] = -2;
          if (i == k) break;
        }
      }
      trim(next);
      pool = std::move(next);
    }
    final_h = std::max(final_h, h);
    return pool;
  };

  std::vector<Cand> pool;
  consider(pool, {cost(0.0, {}, scan, nullptr), 0.0, {}});
  // Each prefix length gets its own coarse grid and refinement chain.
  for (std::size_t k = 1; k <= opt.coarse_points.size(); ++k) {
    const int n = opt.coarse_points[k - 1];
    if (n < 1) throw ValidationError("coarse grid needs at least one interval");
    const double hk = horizon / n;
    const double lead = k % 2 == 1 ? acc : 0.0;  // alternate so the last prefix arc is at full force
    std::vector<Cand> kp;
    std::vector<int> idx(k, 0);
    std::vector<double> d(k);
    while (true) {
      for (std::size_t i = 0; i < k; ++i) d[i] = hk * idx[i];
      consider(kp, {cost(lead, d, scan, nullptr), lead, d});
      std::size_t i = 0;
      while (i < k && ++idx[i] > n) idx[i++] = 0;
      if (i == k) break;
    }
    trim(kp);
    for (auto& c : refine(std::move(kp), hk)) pool.push_back(std::move(c));
  }
  trim(pool);

  if (pool.empty()) return best;
  std::vector<double> arcs;
  best.t_f = cost(pool.front().lead, pool.front().d, scan, &arcs);
  best.durations = arcs;
  best.first_level = pool.front().d.empty() || pool.front().lead == 0.0 ? 0.0 : u_max;
  best.resolution = final_h;
  return best;
}

}  // namespace casting::optimal
