#pragma once

// Synthetic stand-in for the camera front end: true target positions are
// projected to pixels, perturbed, quantized and mapped back to the plane.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "casting/error.hpp"
#include "casting/observation.hpp"
#include "casting/vision/homography.hpp"

namespace casting::vision {

inline constexpr double kFramePeriod = 1.0 / 16.0;  // 16 fps, shown as 62 ms

/// Pinhole camera looking at the world plane z = 0 (x right, y up).
struct PinholeCamera {
  double focal_px = 800.0;
  Vector2d principal{320.0, 240.0};
  Vector3d center{1.2, 0.4, 3.0};  ///< camera position in world coordinates [m]
  double yaw = 0.08;               ///< rotation about the world y axis [rad]
  double pitch = -0.05;            ///< rotation about the camera x axis [rad]

  /// Homography taking world plane points to pixels.
  Homography world_to_image() const {
    // camera looks along -z; image v grows downwards
    Matrix3d base;
    base << 1, 0, 0, 0, -1, 0, 0, 0, -1;
    const Matrix3d r = Eigen::AngleAxisd(pitch, Vector3d::UnitX()).toRotationMatrix() *
                       Eigen::AngleAxisd(yaw, Vector3d::UnitY()).toRotationMatrix() * base;
    const Vector3d t = -r * center;
    Matrix3d k;
    k << focal_px, 0, principal.x(), 0, focal_px, principal.y(), 0, 0, 1;
    Matrix3d m;
    m.col(0) = r.col(0);
    m.col(1) = r.col(1);
    m.col(2) = t;
    return Homography(k * m);
  }
  Homography image_to_world() const { return world_to_image().inverse(); }
};

struct ObserverConfig {
  double frame_period = kFramePeriod;
  double pixel_sigma = 0.5;
  bool quantize = true;
  double latency = 0.0;  ///< delivery delay after capture [s]

  void validate() const {
    if (!(frame_period > 0)) throw ValidationError("frame period must be positive");
    if (!(pixel_sigma >= 0)) throw ValidationError("pixel noise must be non-negative");
    if (!(latency >= 0)) throw ValidationError("latency must be non-negative");
  }
};

/// Produces one observation per frame from the true target position. The
/// observation carries the capture time.
class SynthObserver {
 public:
  SynthObserver(const ObserverConfig& cfg, const Homography& world_to_image, const Homography& estimated,
                std::uint64_t seed)
      : cfg_(cfg), to_img_(world_to_image), est_(estimated), rng_(seed) {
    cfg.validate();
  }

  const ObserverConfig& config() const { return cfg_; }

  Vector2d to_pixels(const Vector2d& p_world) {
    Vector2d px = to_img_.apply(p_world);
    if (cfg_.pixel_sigma > 0.0) {
      std::normal_distribution<double> n(0.0, cfg_.pixel_sigma);
      px += Vector2d(n(rng_), n(rng_));
    }
    if (cfg_.quantize) px = px.array().round();
    return px;
  }

  TargetObservation observe(double t_capture, const Vector2d& p_true) {
    return {t_capture, est_.apply(to_pixels(p_true))};
  }

  /// Observations of a track sampled at every frame in [0, t_end].
  std::vector<TargetObservation> stream(const std::function<Vector2d(double)>& track, double t_end) {
    std::vector<TargetObservation> out;
    for (long k = 0;; ++k) {
      const double t = static_cast<double>(k) * cfg_.frame_period;
      if (t > t_end) break;
      out.push_back(observe(t, track(t)));
    }
    return out;
  }

 private:
  ObserverConfig cfg_;
  Homography to_img_;
  Homography est_;
  std::mt19937_64 rng_;
};

/// Calibration batch: world points on the plane and their noisy, quantized
/// pixel images.
inline std::vector<Correspondence> synth_calibration(const PinholeCamera& cam, const std::vector<Vector2d>& world,
                                                     double pixel_sigma, bool quantize, std::uint64_t seed) {
  ObserverConfig cfg;
  cfg.pixel_sigma = pixel_sigma;
  cfg.quantize = quantize;
  const Homography w2i = cam.world_to_image();
  SynthObserver obs(cfg, w2i, w2i.inverse(), seed);
  std::vector<Correspondence> out;
  for (const auto& p : world) out.push_back({obs.to_pixels(p), p});
  return out;
}

}  // namespace casting::vision
