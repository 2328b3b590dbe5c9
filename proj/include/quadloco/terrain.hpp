#pragma once

// Walking-surface plane z = a0 + a1 x + a2 y from the latest foothold of each
// leg, and the body posture that follows it.

#include <cmath>
#include <numbers>

#include "quadloco/common.hpp"
#include "quadloco/so3.hpp"

namespace quadloco {

struct PlaneCoeffs {
  double a0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;

  Vec3 vec() const { return Vec3(a0, a1, a2); }
  double height(double x, double y) const { return a0 + a1 * x + a2 * y; }
  /// Upward unit normal (-a1, -a2, 1) / norm.
  Vec3 normal() const { return Vec3(-a1, -a2, 1.0).normalized(); }
};

/// Least squares a = (W^T W)^+ W^T z with rows W = [1 x y]. The pseudo-inverse
/// gives the minimum-norm solution when the footholds are collinear.
inline PlaneCoeffs fit_plane(const PerLeg<Vec2>& foot_xy, const Eigen::Vector4d& foot_z) {
  Eigen::Matrix<double, 4, 3> w;
  for (int i = 0; i < kNumLegs; ++i) w.row(i) << 1.0, foot_xy[i].x(), foot_xy[i].y();
  const Mat3 wtw = w.transpose() * w;
  const Vec3 a = wtw.completeOrthogonalDecomposition().pseudoInverse() * (w.transpose() * foot_z);
  return {a(0), a(1), a(2)};
}

inline PlaneCoeffs fit_plane(const PerLeg<Vec3>& feet) {
  PerLeg<Vec2> xy;
  Eigen::Vector4d z;
  for (int i = 0; i < kNumLegs; ++i) {
    xy[i] = feet[i].head<2>();
    z(i) = feet[i].z();
  }
  return fit_plane(xy, z);
}

struct Posture {
  Mat3 R_d = Mat3::Identity();
  // Vertical offset of the CoM above the plane so that its distance along the
  // normal equals z0.
  double com_height_d = 0.0;
};

/// Body z along the plane normal, heading kept at the commanded yaw.
inline Posture posture_from_plane(const PlaneCoeffs& a, double yaw, double z0) {
  const Vec3 n = a.normal();
  if (n.z() <= std::sin(5.0 * std::numbers::pi / 180.0)) {
    throw Error(ErrorCode::SlopeTooSteep, "plane normal is within 5 deg of horizontal");
  }
  const Vec3 heading(std::cos(yaw), std::sin(yaw), 0.0);
  const Vec3 x = (heading - heading.dot(n) * n).normalized();
  Posture out;
  out.R_d.col(0) = x;
  out.R_d.col(1) = n.cross(x);
  out.R_d.col(2) = n;
  out.com_height_d = z0 / n.z();
  return out;
}

/// World CoM height target above the plane point at (x, y).
inline double com_target_z(const PlaneCoeffs& a, double x, double y, const Posture& p) {
  return a.height(x, y) + p.com_height_d;
}

/// Optional first-order low-pass on plane coefficients (alpha = 1 disables it).
class PlaneFilter {
 public:
  explicit PlaneFilter(double alpha = 1.0) : alpha_(alpha) {}

  const PlaneCoeffs& update(const PlaneCoeffs& meas) {
    if (!init_) {
      state_ = meas;
      init_ = true;
    } else {
      state_.a0 += alpha_ * (meas.a0 - state_.a0);
      state_.a1 += alpha_ * (meas.a1 - state_.a1);
      state_.a2 += alpha_ * (meas.a2 - state_.a2);
    }
    return state_;
  }
  const PlaneCoeffs& value() const { return state_; }

 private:
  double alpha_;
  bool init_ = false;
  PlaneCoeffs state_;
};

}  // namespace quadloco
