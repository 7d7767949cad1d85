#pragma once

#include <Eigen/Core>

namespace casting {

/// Target position as reported by the vision system, stamped with the frame
/// capture time.
struct TargetObservation {
  double t = 0.0;
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
};

}  // namespace casting
