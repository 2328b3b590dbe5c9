#pragma once

// Two-stage body state estimator.
//
// Stage 1 is a complementary orientation filter: the gyro is integrated on
// SO(3) and the accelerometer direction pulls the estimate toward gravity
// with an adaptive gain. Stage 2 is a linear Kalman filter over
//
//   x = [p_b; v_b; p_1; p_2; p_3; p_4]   (world frame, 18 states)
//
// driven by R_hat * a_b + a_g and corrected by leg-kinematic residuals
// (relative foot position, foot-fixed velocity, contact height).

#include <algorithm>
#include <cmath>

#include "quadloco/common.hpp"
#include "quadloco/so3.hpp"

namespace quadloco {

struct ImuSample {
  Vec3 gyro = Vec3::Zero();   // rad/s, body frame
  Vec3 accel = Vec3::Zero();  // m/s^2, body frame, specific force (reads +g when at rest)
};

/// kappa = kappa_ref * clamp(1 - | |a| - g | / g, 0, 1)
inline double adaptive_kappa(const Vec3& accel, double kappa_ref, double g) {
  const double scale = 1.0 - std::abs(accel.norm() - g) / g;
  return kappa_ref * std::clamp(scale, 0.0, 1.0);
}

struct OrientationFilter {
  Mat3 R_hat = Mat3::Identity();
  double kappa_ref = 0.1;  // 1/s
  double g = kGravity;
};

/// Gravity-direction correction w_corr = a/|a| x R_hat^T e_z (zero when |a| is ~0).
inline Vec3 orientation_correction(const Mat3& r_hat, const Vec3& accel) {
  const double n = accel.norm();
  if (n < 1e-6) return Vec3::Zero();
  return (accel / n).cross(r_hat.transpose() * Vec3::UnitZ());
}

inline OrientationFilter orientation_step(OrientationFilter f, const ImuSample& imu, double dt) {
  const double kappa = adaptive_kappa(imu.accel, f.kappa_ref, f.g);
  const Vec3 w = imu.gyro + kappa * orientation_correction(f.R_hat, imu.accel);
  f.R_hat = so3::project_to_so3(f.R_hat * so3::exp_exact(w * dt));
  return f;
}

inline constexpr int kKfDim = 18;
using KfVector = Eigen::Matrix<double, kKfDim, 1>;
using KfMatrix = Eigen::Matrix<double, kKfDim, kKfDim>;

struct KfState {
  KfVector mean = KfVector::Zero();
  KfMatrix cov = KfMatrix::Identity();

  Vec3 position() const { return mean.segment<3>(0); }
  Vec3 velocity() const { return mean.segment<3>(3); }
  Vec3 foot(int i) const { return mean.segment<3>(6 + 3 * i); }
};

struct LegMeasurement {
  Vec3 rel_pos = Vec3::Zero();  // foot minus body, world frame
  Vec3 rel_vel = Vec3::Zero();  // d/dt(rel_pos) from kinematics, world frame
  double contact_height = 0.0;
  bool in_stance = true;
};

/// World-frame kinematic measurement from body-frame leg kinematics.
/// rel_vel = R (J qd + w x r_body).
inline LegMeasurement make_leg_measurement(const Mat3& r_hat, const Vec3& gyro, const Vec3& rel_body,
                                           const Vec3& foot_vel_body, double contact_height,
                                           bool in_stance) {
  LegMeasurement m;
  m.rel_pos = r_hat * rel_body;
  m.rel_vel = r_hat * (foot_vel_body + gyro.cross(rel_body));
  m.contact_height = contact_height;
  m.in_stance = in_stance;
  return m;
}

struct KfNoise {
  double q_v = 1e-2;            // (m/s^2)^2 s, accelerometer white noise
  double q_p_stance = 1e-6;     // m^2 s, stance-foot drift
  double swing_inflation = 1e6;
  double r_p = 1e-4;            // m^2
  double r_v = 1e-3;            // (m/s)^2
  double r_h = 1e-4;            // m^2
};

/// Exact zero-order-hold discretization of p' = v, v' = u, p_i' = 0 over dt.
inline KfMatrix kf_transition(double dt) {
  KfMatrix a = KfMatrix::Identity();
  a.block<3, 3>(0, 3) = dt * Mat3::Identity();
  return a;
}

/// Discrete process noise. The (p, v) block is the exact integral of white
/// acceleration noise (dt^3/3, dt^2/2, dt); feet receive q_p[i] * dt.
inline KfMatrix kf_process_noise(double dt, double q_v, const Eigen::Vector4d& q_p) {
  KfMatrix q = KfMatrix::Zero();
  const Mat3 i3 = Mat3::Identity();
  q.block<3, 3>(0, 0) = q_v * dt * dt * dt / 3.0 * i3;
  q.block<3, 3>(0, 3) = q_v * dt * dt / 2.0 * i3;
  q.block<3, 3>(3, 0) = q_v * dt * dt / 2.0 * i3;
  q.block<3, 3>(3, 3) = q_v * dt * i3;
  for (int i = 0; i < kNumLegs; ++i) q.block<3, 3>(6 + 3 * i, 6 + 3 * i) = q_p(i) * dt * i3;
  return q;
}

inline KfState kf_predict(KfState s, const Mat3& r_hat, const Vec3& accel, double dt, double q_v,
                          const Eigen::Vector4d& q_p) {
  const Vec3 u = r_hat * accel + Vec3(0.0, 0.0, -kGravity);
  s.mean.segment<3>(0) += dt * s.mean.segment<3>(3) + 0.5 * dt * dt * u;
  s.mean.segment<3>(3) += dt * u;
  const KfMatrix a = kf_transition(dt);
  s.cov = a * s.cov * a.transpose() + kf_process_noise(dt, q_v, q_p);
  s.cov = (0.5 * (s.cov + s.cov.transpose())).eval();
  return s;
}

inline constexpr int kKfMeasDim = 28;
using KfMeasMatrix = Eigen::Matrix<double, kKfMeasDim, kKfDim>;

/// Stacked measurement map: per foot [p_i - p_b (3); -v_b (3); e_z^T p_i (1)].
inline KfMeasMatrix kf_measurement_matrix() {
  KfMeasMatrix h = KfMeasMatrix::Zero();
  for (int i = 0; i < kNumLegs; ++i) {
    const int r = 7 * i;
    h.block<3, 3>(r, 0) = -Mat3::Identity();
    h.block<3, 3>(r, 6 + 3 * i) = Mat3::Identity();
    h.block<3, 3>(r + 3, 3) = -Mat3::Identity();
    h(r + 6, 6 + 3 * i + 2) = 1.0;
  }
  return h;
}

inline KfState kf_update(KfState s, const Mat3& /*r_hat*/, const PerLeg<LegMeasurement>& meas,
                         double r_p, double r_v, double r_h, double swing_inflation) {
  using MeasVec = Eigen::Matrix<double, kKfMeasDim, 1>;
  using MeasMat = Eigen::Matrix<double, kKfMeasDim, kKfMeasDim>;
  static const KfMeasMatrix h = kf_measurement_matrix();
  MeasVec y;
  MeasVec rdiag;
  for (int i = 0; i < kNumLegs; ++i) {
    const int r = 7 * i;
    y.segment<3>(r) = meas[i].rel_pos;
    y.segment<3>(r + 3) = meas[i].rel_vel;
    y(r + 6) = meas[i].contact_height;
    const double k = meas[i].in_stance ? 1.0 : swing_inflation;
    rdiag.segment<3>(r).setConstant(k * r_p);
    rdiag.segment<3>(r + 3).setConstant(k * r_v);
    rdiag(r + 6) = k * r_h;
  }
  const MeasVec innovation = y - h * s.mean;
  MeasMat sm = h * s.cov * h.transpose();
  sm.diagonal() += rdiag;
  Eigen::LLT<MeasMat> llt(sm);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularInnovation, "innovation covariance is not positive definite");
  }
  // K = P H^T S^{-1}
  const Eigen::Matrix<double, kKfDim, kKfMeasDim> gain =
      llt.solve(h * s.cov).transpose();
  s.mean += gain * innovation;
  const KfMatrix ikh = KfMatrix::Identity() - gain * h;
  s.cov = ikh * s.cov * ikh.transpose() + gain * rdiag.asDiagonal() * gain.transpose();
  s.cov = (0.5 * (s.cov + s.cov.transpose())).eval();
  return s;
}

/// Combined orientation filter and KF, stepped once per control tick.
class StateEstimator {
 public:
  struct Options {
    double kappa_ref = 0.1;
    KfNoise noise;
    bool use_kinematics = true;  // false gives prediction-only dead reckoning
  };

  StateEstimator() = default;
  explicit StateEstimator(Options opts) : opts_(opts) { filter_.kappa_ref = opts.kappa_ref; }

  void reset(const Mat3& r0, const Vec3& p0, const Vec3& v0, const PerLeg<Vec3>& feet) {
    filter_.R_hat = r0;
    kf_.mean.setZero();
    kf_.mean.segment<3>(0) = p0;
    kf_.mean.segment<3>(3) = v0;
    for (int i = 0; i < kNumLegs; ++i) kf_.mean.segment<3>(6 + 3 * i) = feet[i];
    kf_.cov = 1e-6 * KfMatrix::Identity();
  }

  // rel_body / foot_vel_body: body-frame foot position and J qd per leg.
  void step(const ImuSample& imu, const PerLeg<Vec3>& rel_body, const PerLeg<Vec3>& foot_vel_body,
            const PerLeg<bool>& stance, double dt, const PerLeg<double>& contact_height = {}) {
    filter_ = orientation_step(filter_, imu, dt);
    Eigen::Vector4d qp;
    for (int i = 0; i < kNumLegs; ++i) {
      qp(i) = opts_.noise.q_p_stance * (stance[i] ? 1.0 : opts_.noise.swing_inflation);
    }
    kf_ = kf_predict(kf_, filter_.R_hat, imu.accel, dt, opts_.noise.q_v, qp);
    if (!opts_.use_kinematics) return;
    PerLeg<LegMeasurement> meas;
    for (int i = 0; i < kNumLegs; ++i) {
      meas[i] = make_leg_measurement(filter_.R_hat, imu.gyro, rel_body[i], foot_vel_body[i],
                                     contact_height[i], stance[i]);
    }
    kf_ = kf_update(kf_, filter_.R_hat, meas, opts_.noise.r_p, opts_.noise.r_v, opts_.noise.r_h,
                    opts_.noise.swing_inflation);
  }

  const Mat3& orientation() const { return filter_.R_hat; }
  const KfState& kf() const { return kf_; }
  Vec3 position() const { return kf_.position(); }
  Vec3 velocity() const { return kf_.velocity(); }

 private:
  Options opts_;
  OrientationFilter filter_;
  KfState kf_;
};

}  // namespace quadloco
