#pragma once

// Plane-to-plane homography between image pixels and world coordinates on the
// target plane, estimated with the normalized direct linear transform.

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "casting/error.hpp"

namespace casting::vision {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

struct Correspondence {
  Vector2d img = Vector2d::Zero();   ///< pixels
  Vector2d real = Vector2d::Zero();  ///< metres
};

class Homography {
 public:
  Homography() : h_(Matrix3d::Identity()) {}
  explicit Homography(const Matrix3d& h) : h_(h) {
    if (std::abs(h(2, 2)) < 1e-12) throw DegenerateConfigurationError("homography with H[2][2] = 0");
    h_ /= h(2, 2);
    if (std::abs(h_.determinant()) <= 1e-12) throw DegenerateConfigurationError("singular homography");
  }

  const Matrix3d& matrix() const { return h_; }

  Vector2d apply(const Vector2d& p) const {
    const Vector3d q = h_ * p.homogeneous();
    if (std::abs(q.z()) <= 1e-12) throw DegenerateConfigurationError("point maps to infinity");
    return q.hnormalized();
  }

  Homography inverse() const { return Homography(h_.inverse()); }

  /// (a * b).apply(p) == a.apply(b.apply(p))
  friend Homography operator*(const Homography& a, const Homography& b) { return Homography(a.h_ * b.h_); }

 private:
  Matrix3d h_;
};

struct HomographyEstimate {
  Homography h;
  double rms_world = 0.0;  ///< RMS of |H p_img - p_real| over the batch [m]
  double max_world = 0.0;
};

namespace detail {

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
inline Matrix3d normalizer(const std::vector<Vector2d>& pts) {
  Vector2d c = Vector2d::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean = 0.0;
  for (const auto& p : pts) mean += (p - c).norm();
  mean /= static_cast<double>(pts.size());
  if (mean <= 0.0) throw DegenerateConfigurationError("all points coincide");
  const double s = std::sqrt(2.0) / mean;
  Matrix3d t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

inline double line_distance(const Vector2d& a, const Vector2d& b, const Vector2d& p) {
  const Vector2d d = b - a;
  const double n = d.norm();
  if (n == 0.0) return (p - a).norm();
  return std::abs(d.x() * (p - a).y() - d.y() * (p - a).x()) / n;
}

/// True when four of the points form a quadrilateral with no three collinear.
inline bool has_general_quad(const std::vector<Vector2d>& pts) {
  double scale = 0.0;
  for (const auto& p : pts) scale = std::max(scale, (p - pts.front()).norm());
  const double tol = 1e-9 * std::max(scale, 1e-300);
  std::size_t i1 = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if ((pts[i] - pts[0]).norm() > (pts[i1] - pts[0]).norm()) i1 = i;
  if ((pts[i1] - pts[0]).norm() <= tol) return false;
  std::size_t i2 = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = line_distance(pts[0], pts[i1], pts[i]);
    if (d > best) best = d, i2 = i;
  }
  if (best <= tol) return false;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = std::min({line_distance(pts[0], pts[i1], pts[i]), line_distance(pts[0], pts[i2], pts[i]),
                               line_distance(pts[i1], pts[i2], pts[i])});
    if (d > tol) return true;
  }
  return false;
}

}  // namespace detail

inline HomographyEstimate estimate_homography(const std::vector<Correspondence>& batch) {
  if (batch.size() < 4) throw DegenerateConfigurationError("need at least 4 correspondences");
  std::vector<Vector2d> img, real;
  for (const auto& c : batch) {
    if (!c.img.allFinite() || !c.real.allFinite()) throw ValidationError("non-finite correspondence");
    img.push_back(c.img);
    real.push_back(c.real);
  }
  if (!detail::has_general_quad(img) || !detail::has_general_quad(real))
    throw DegenerateConfigurationError("correspondences are collinear");

  const Matrix3d ti = detail::normalizer(img);
  const Matrix3d tr = detail::normalizer(real);
  Eigen::MatrixXd a(2 * batch.size(), 9);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Vector3d p = ti * img[k].homogeneous();
    const Vector3d q = tr * real[k].homogeneous();
    const auto r = static_cast<Eigen::Index>(2 * k);
    a.row(r) << 0, 0, 0, -q.z() * p.transpose(), q.y() * p.transpose();
    a.row(r + 1) << q.z() * p.transpose(), 0, 0, 0, -q.x() * p.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd hv = svd.matrixV().col(8);
  Matrix3d hn;
  hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);

  HomographyEstimate out{Homography(tr.inverse() * hn * ti), 0.0, 0.0};
  double ss = 0.0;
  for (const auto& c : batch) {
    const double e = (out.h.apply(c.img) - c.real).norm();
    ss += e * e;
    out.max_world = std::max(out.max_world, e);
  }
  out.rms_world = std::sqrt(ss / static_cast<double>(batch.size()));
  return out;
}

/// Rows of "u,v,x,y"; a leading non-numeric header line and blank lines are skipped.
inline std::vector<Correspondence> read_correspondences_csv(std::istream& is) {
  std::vector<Correspondence> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ss(line);
    double u, v, x, y;
    if (!(ss >> u >> v >> x >> y)) {
      if (out.empty() && lineno == 1) continue;
      throw ValidationError("malformed correspondence on line " + std::to_string(lineno));
    }
    out.push_back({{u, v}, {x, y}});
  }
  return out;
}

inline void write_homography(std::ostream& os, const HomographyEstimate& est, std::size_t n_points) {
  char buf[160];
  const Matrix3d& h = est.h.matrix();
  for (int r = 0; r < 3; ++r) {
    std::snprintf(buf, sizeof buf, "%.12g %.12g %.12g\n", h(r, 0), h(r, 1), h(r, 2));
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "points %zu\nrms_world_m %.6g\nmax_world_m %.6g\n", n_points, est.rms_world,
                est.max_world);
  os << buf;
}

}  // namespace casting::vision
