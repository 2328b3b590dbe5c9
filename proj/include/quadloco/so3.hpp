#pragma once

// SO(3) kernel: hat/vee, exponential (truncated Taylor and Rodrigues),
// logarithm, rotation error and geodesic interpolation.
//
// Rotations are plain 3x3 matrices mapping body-frame vectors to the world
// frame. Functions used inside the trajectory optimizer are templated on the
// scalar type so they can be differentiated with Eigen::AutoDiffScalar.

#include <algorithm>
#include <cmath>

#include "quadloco/common.hpp"

namespace quadloco::so3 {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

template <typename Derived>
Matrix3<typename Derived::Scalar> hat(const Eigen::MatrixBase<Derived>& v) {
  using S = typename Derived::Scalar;
  Matrix3<S> m;
  m << S(0), -v(2), v(1),
       v(2), S(0), -v(0),
       -v(1), v(0), S(0);
  return m;
}

/// Inverse of hat(). Throws NonSkew when the input is not skew-symmetric within tol.
inline Vec3 vee(const Mat3& m, double tol = 1e-9) {
  if ((m + m.transpose()).norm() > tol) {
    throw Error(ErrorCode::NonSkew, "vee() argument is not skew-symmetric");
  }
  return Vec3(m(2, 1), m(0, 2), m(1, 0));
}

// Fourth-order truncated series sum_{k=0..4} hat(w)^k / k!. Not re-orthonormalized.
template <typename Derived>
Matrix3<typename Derived::Scalar> exp_taylor4(const Eigen::MatrixBase<Derived>& w) {
  using S = typename Derived::Scalar;
  const Matrix3<S> a = hat(w);
  const Matrix3<S> a2 = a * a;
  const Matrix3<S> a3 = a2 * a;
  const Matrix3<S> a4 = a3 * a;
  return Matrix3<S>::Identity() + a + a2 * S(0.5) + a3 * S(1.0 / 6.0) + a4 * S(1.0 / 24.0);
}

/// Rodrigues closed form.
inline Mat3 exp_exact(const Vec3& w) {
  const double theta = w.norm();
  const Mat3 a = hat(w);
  if (theta < 1e-8) return Mat3::Identity() + a + 0.5 * a * a;
  return Mat3::Identity() + (std::sin(theta) / theta) * a +
         ((1.0 - std::cos(theta)) / (theta * theta)) * a * a;
}

struct LogResult {
  Vec3 value;
  bool near_pi = false;  // rotation angle within tolerance of pi; axis sign is a branch choice
};

/// Logarithm with an explicit flag for the angle-pi branch.
inline LogResult log_map_flagged(const Mat3& r, double pi_tol = 1e-6) {
  const double tr = r.trace();
  const double c = std::clamp(0.5 * (tr - 1.0), -1.0, 1.0);
  const Vec3 a = 0.5 * Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = a.norm();
  const double theta = std::atan2(s, c);
  LogResult out;
  out.near_pi = tr <= -1.0 + pi_tol;
  if (c > -0.99) {
    double k;
    if (theta < 1e-4) {
      const double t2 = theta * theta;
      k = 1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0;
    } else {
      k = theta / std::sin(theta);
    }
    out.value = k * a;
    return out;
  }
  // Near pi: n n^T = (sym(R) - c I) / (1 - c); take the dominant column.
  const Mat3 b = (0.5 * (r + r.transpose()) - c * Mat3::Identity()) / (1.0 - c);
  Eigen::Index j = 0;
  b.diagonal().maxCoeff(&j);
  Vec3 n = b.col(j) / std::sqrt(std::max(b(j, j), 1e-300));
  n.normalize();
  if (n.dot(a) < 0.0) n = -n;
  out.value = theta * n;
  return out;
}

inline Vec3 log_map(const Mat3& r) { return log_map_flagged(r).value; }

/// e_R = log(R_ref^T R)^vee; zero iff r == r_ref.
inline Vec3 rotation_error(const Mat3& r_ref, const Mat3& r) {
  return log_map(r_ref.transpose() * r);
}

/// Geodesic interpolation r0 * exp(s * log(r0^T rg)), s in [0, 1].
inline Mat3 interp_rotation(const Mat3& r0, const Mat3& rg, double s) {
  if (s <= 0.0) return r0;
  if (s >= 1.0) return rg;
  return r0 * exp_exact(s * log_map(r0.transpose() * rg));
}

/// Frobenius norm of R^T R - I.
template <typename Derived>
double orthonormality_defect(const Eigen::MatrixBase<Derived>& r) {
  return (r.transpose() * r - Mat3::Identity()).norm();
}

/// Nearest rotation in the Frobenius sense (SVD projection).
inline Mat3 project_to_so3(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

inline double rotation_angle(const Mat3& r) { return log_map(r).norm(); }

// Z-Y-X (yaw-pitch-roll) angles, for logging and small-angle MPC states only.
inline Vec3 to_rpy(const Mat3& r) {
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return Vec3(roll, pitch, yaw);
}

inline Mat3 from_rpy(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

}  // namespace quadloco::so3
