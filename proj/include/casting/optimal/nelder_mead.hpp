#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace casting::optimal {

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  int evaluations = 0;
};

/// Unconstrained Nelder-Mead simplex search (standard coefficients). Stops
/// when the spread of simplex values falls below `ftol` or after `max_evals`.
template <class F>
NelderMeadResult nelder_mead(const F& f, std::vector<double> x0, double step, double ftol, int max_evals) {
  const std::size_t n = x0.size();
  NelderMeadResult res;
  if (n == 0) {
    res.x = x0;
    res.f = f(x0);
    res.evaluations = 1;
    return res;
  }
  std::vector<std::vector<double>> pts(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step;
  std::vector<double> vals(n + 1);
  int evals = 0;
  for (std::size_t i = 0; i <= n; ++i) {
    vals[i] = f(pts[i]);
    ++evals;
  }
  std::vector<std::size_t> order(n + 1);
  const auto point = [&](const std::vector<double>& c, const std::vector<double>& p, double t) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = c[i] + t * (p[i] - c[i]);
    return out;
  };
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t lo = order.front(), hi = order.back(), nh = order[n - 1];
    if (std::abs(vals[hi] - vals[lo]) <= ftol) break;

    std::vector<double> c(n, 0.0);
    for (std::size_t k = 0; k <= n; ++k) {
      if (k == hi) continue;
      for (std::size_t i = 0; i < n; ++i) c[i] += pts[k][i] / static_cast<double>(n);
    }
    const auto xr = point(c, pts[hi], -1.0);
    const double fr = f(xr);
    ++evals;
    if (fr < vals[lo]) {
      const auto xe = point(c, pts[hi], -2.0);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        pts[hi] = xe;
        vals[hi] = fe;
      } else {
        pts[hi] = xr;
        vals[hi] = fr;
      }
    } else if (fr < vals[nh]) {
      pts[hi] = xr;
      vals[hi] = fr;
    } else {
      const bool outside = fr < vals[hi];
      const auto xc = point(c, outside ? xr : pts[hi], 0.5);
      const double fc = f(xc);
      ++evals;
      if (fc < (outside ? fr : vals[hi])) {
        pts[hi] = xc;
        vals[hi] = fc;
      } else {
        for (std::size_t k = 0; k <= n; ++k) {
          if (k == lo) continue;
          pts[k] = point(pts[lo], pts[k], 0.5);
          vals[k] = f(pts[k]);
          ++evals;
        }
      }
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  res.x = pts[best];
  res.f = vals[best];
  res.evaluations = evals;
  return res;
}

}  // namespace casting::optimal
