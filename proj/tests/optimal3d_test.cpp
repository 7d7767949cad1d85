#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "casting/optimal/angle_sweep.hpp"
#include "casting/optimal/min_time_3d.hpp"

using namespace casting;
using namespace casting::optimal;

namespace {

constexpr double kOmega = 10.0;
const Vector3d kTarget(2.0, 0.0, -1.0);
constexpr double kAlpha = 3.76;

MinTime3DOptions coarse() {
  MinTime3DOptions o;
  o.n_seg = 10;
  o.substeps = 6;
  return o;
}

Vector3d rotate_z(const Vector3d& p, double th) {
  return {std::cos(th) * p.x() - std::sin(th) * p.y(), std::sin(th) * p.x() + std::cos(th) * p.y(), p.z()};
}

void expect_in_box(const MinTime3DSolution& s, double u_max) {
  for (const auto& u : s.u_segments) {
    EXPECT_GE(u.minCoeff(), 0.0);
    EXPECT_LE(u.maxCoeff(), u_max);
  }
}

}  // namespace

TEST(MinTime3D, ConvergesInsideForceBoxAndSimulationHitsTarget) {
  const Caster3DGeometry geom;
  const MinTime3DSolution s = min_time_3d(geom, kOmega, kTarget, kAlpha);
  ASSERT_TRUE(s.converged);
  EXPECT_EQ(s.u_segments.size(), 20u);
  expect_in_box(s, geom.u_max);
  EXPECT_LE(s.terminal_miss, 1e-6);
  EXPECT_LE(s.terminal_speed, 1e-6);
  // independent integration through the flight model at a finer step
  const Flight3DState end = simulate_min_time_3d(geom, kOmega, s, 64);
  EXPECT_LE((end.p - kTarget).norm(), 1e-5);
  EXPECT_LE(end.v.norm(), 1e-5);
  EXPECT_GT(s.t_f, min_time_lower_bound(geom, throw_state_3d(geom, kAlpha, kOmega), kTarget));
}

TEST(MinTime3D, ProfilesAreNearBangWithAndWithoutGravity) {
  for (double g : {0.0, 9.81}) {
    Caster3DGeometry geom;
    geom.g = g;
    const MinTime3DSolution s = min_time_3d(geom, kOmega, kTarget, kAlpha);
    ASSERT_TRUE(s.converged) << "g=" << g;
    int at_bound = 0;
    for (const auto& u : s.u_segments)
      for (int i = 0; i < 3; ++i) at_bound += (u[i] <= 0.02 * geom.u_max || u[i] >= 0.98 * geom.u_max);
    const double frac = at_bound / (3.0 * static_cast<double>(s.u_segments.size()));
    RecordProperty(g == 0.0 ? "bang_fraction_g0" : "bang_fraction_g", std::to_string(frac));
    EXPECT_GE(frac, 0.75) << "g=" << g;
  }
}

TEST(MinTime3D, DoublingForceBoundNeverIncreasesTime) {
  for (double alpha : {1.0, 3.76, 5.0}) {
    Caster3DGeometry weak;
    Caster3DGeometry strong;
    strong.u_max = 2.0 * weak.u_max;
    const auto a = min_time_3d(weak, kOmega, kTarget, alpha, coarse());
    const auto b = min_time_3d(strong, kOmega, kTarget, alpha, coarse());
    ASSERT_TRUE(a.converged && b.converged) << alpha;
    EXPECT_LE(b.t_f, a.t_f * (1.0 + 1e-3)) << alpha;
    expect_in_box(b, strong.u_max);
  }
}

TEST(MinTime3D, ZeroGravityRayTargetRespectsStraightLineBound) {
  // With g = 0 and the target ahead on the release velocity ray, no motion
  // can beat a double integrator along the ray with all three cables pulling
  // in the best direction: |a| <= 3 u_max / m.
  Caster3DGeometry geom;
  geom.g = 0.0;
  const double alpha = 0.5;
  const Flight3DState s0 = throw_state_3d(geom, alpha, kOmega);
  const double d = 1.5;
  const Vector3d target = s0.p + d * s0.v.normalized();
  const double a = 3.0 * geom.u_max / geom.m;
  const double v = s0.v.norm();
  // coast-free bang-bang: accelerate, then brake to rest exactly at the target
  const double peak = std::sqrt(a * d + 0.5 * v * v);
  const double bound = (peak - v) / a + peak / a;
  const auto s = min_time_3d(geom, kOmega, target, alpha, coarse());
  ASSERT_TRUE(s.converged);
  EXPECT_GE(s.t_f, bound);
  RecordProperty("ratio_to_bound", std::to_string(s.t_f / bound));
}

TEST(MinTime3D, RotatingTargetAndAngleTogetherLeavesTimeUnchanged) {
  const Caster3DGeometry geom;
  const auto base = min_time_3d(geom, kOmega, kTarget, kAlpha, coarse());
  ASSERT_TRUE(base.converged);
  for (double th : {0.7, 2.0, 4.5}) {
    const auto rot = min_time_3d(geom, kOmega, rotate_z(kTarget, th), kAlpha + th, coarse());
    ASSERT_TRUE(rot.converged);
    EXPECT_NEAR(rot.t_f, base.t_f, 1e-3 * base.t_f) << th;
  }
}

TEST(MinTime3D, InvalidInputsRejected) {
  const Caster3DGeometry geom;
  EXPECT_THROW(min_time_3d(geom, kOmega, Vector3d::Zero(), kAlpha), ValidationError);
  MinTime3DOptions o;
  o.n_seg = 0;
  EXPECT_THROW(min_time_3d(geom, kOmega, kTarget, kAlpha, o), ValidationError);
}

TEST(AngleSweep, SingleAngleGridReturnsThatAngle) {
  const Caster3DGeometry geom;
  SweepOptions o;
  o.solver = coarse();
  o.refine_iterations = 5;
  const auto r = throwing_angle_sweep(geom, kOmega, kTarget, {2.0}, o);
  ASSERT_TRUE(r.best);
  EXPECT_EQ(r.alpha_opt, 2.0);
  EXPECT_EQ(r.points.size(), 1u);
}

TEST(AngleSweep, FailedAnglesAreMarkedAndExcluded) {
  const Caster3DGeometry geom;
  SweepOptions o;
  o.solver = coarse();
  // alpha = 0 releases straight at the target and no cable can brake along
  // that line; the horizon is cut short to keep the failing scan cheap
  o.solver.t_max = 2.5;
  const auto r = throwing_angle_sweep(geom, kOmega, kTarget, {0.0, 3.76}, o);
  ASSERT_EQ(r.points.size(), 2u);
  EXPECT_FALSE(r.points[0].ok);
  EXPECT_TRUE(r.points[1].ok);
  ASSERT_TRUE(r.best);
  EXPECT_EQ(*r.best, 1u);
}

TEST(AngleSweep, WarmAndColdSweepsAgreeOnTheOptimum) {
  const Caster3DGeometry geom;
  SweepOptions warm;
  warm.solver = coarse();
  SweepOptions cold = warm;
  cold.warm_start = false;
  const auto angles = uniform_angles(12);
  const auto a = throwing_angle_sweep(geom, kOmega, kTarget, angles, warm);
  const auto b = throwing_angle_sweep(geom, kOmega, kTarget, angles, cold);
  ASSERT_TRUE(a.best && b.best);
  EXPECT_LE(std::abs(a.alpha_opt - b.alpha_opt), 2.0 * std::numbers::pi / 12 + 1e-12);
  EXPECT_NEAR(a.t_f_opt, b.t_f_opt, 0.02 * b.t_f_opt);
}

TEST(AngleSweep, CsvHasOneRowPerAngle) {
  SweepResult r;
  r.points.push_back({0.0, std::numeric_limits<double>::infinity(), 0.5, false, "infeasible"});
  r.points.push_back({0.5, 1.25, 1e-7, true, "ok"});
  std::ostringstream os;
  write_sweep_csv(os, r);
  EXPECT_EQ(os.str(), "angle,t_f,miss,status\n0,inf,0.5,failed\n0.5,1.25,9.9999999999999995e-08,ok\n");
}

TEST(AngleSweep, UniformGridCoversCircle) {
  const auto a = uniform_angles(36);
  ASSERT_EQ(a.size(), 36u);
  EXPECT_EQ(a.front(), 0.0);
  EXPECT_NEAR(a.back(), 2.0 * std::numbers::pi * 35 / 36, 1e-15);
  EXPECT_THROW(uniform_angles(0), ValidationError);
}
