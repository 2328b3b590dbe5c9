#pragma once

// 3-DOF leg model [ab/ad, hip, knee], swing-leg Cartesian PD with dynamic
// feedforward, jump tracking law and stance torque mapping.
//
// Kinematics in the body frame, with the ab/ad axis along body x through the
// hip and zero ab/ad link length. In the leg plane
//
//   x = -l1 sin q1 - l2 sin(q1 + q2),  z = -l1 cos q1 - l2 cos(q1 + q2)
//
// and the plane is rolled by q0: p = hip + (x, -sin q0 z, cos q0 z).
// q = 0 is the straight leg hanging below the hip.

#include <algorithm>
#include <cmath>
#include <vector>

#include "quadloco/common.hpp"

namespace quadloco {

struct LegModel {
  double l1 = 0.34;
  double l2 = 0.34;
  double m1 = 0.3375;  // point mass at the thigh midpoint
  double m2 = 0.3375;  // point mass at the shank midpoint
  PerLeg<Vec3> hips = default_hip_offsets();
  double damping = 1e-3;  // damped inverse for Lambda near singularities
};

struct JointState {
  Vec3 q = Vec3::Zero();
  Vec3 qd = Vec3::Zero();
};

namespace detail {

// Point at planar distance (a along the thigh, b along the shank), relative to the hip.
struct PointKinematics {
  Vec3 p;
  Mat3 J;
  Vec3 Jdqd;  // Jdot * qd
};

inline PointKinematics point_kinematics(const Vec3& q, const Vec3& qd, double a, double b) {
  const double s0 = std::sin(q(0)), c0 = std::cos(q(0));
  const double s1 = std::sin(q(1)), c1 = std::cos(q(1));
  const double s12 = std::sin(q(1) + q(2)), c12 = std::cos(q(1) + q(2));
  const double x = -a * s1 - b * s12;
  const double z = -a * c1 - b * c12;
  const double dx1 = z, dx2 = -b * c12;
  const double dz1 = -x, dz2 = b * s12;

  PointKinematics k;
  k.p = Vec3(x, -s0 * z, c0 * z);
  k.J << 0.0, dx1, dx2,
         -c0 * z, -s0 * dz1, -s0 * dz2,
         -s0 * z, c0 * dz1, c0 * dz2;

  const double w0 = qd(0), w1 = qd(1), w12 = qd(1) + qd(2);
  const double zd = a * s1 * w1 + b * s12 * w12;
  const double xdd = a * s1 * w1 * w1 + b * s12 * w12 * w12;
  const double zdd = a * c1 * w1 * w1 + b * c12 * w12 * w12;
  k.Jdqd = Vec3(xdd, s0 * w0 * w0 * z - 2.0 * c0 * w0 * zd - s0 * zdd,
                -c0 * w0 * w0 * z - 2.0 * s0 * w0 * zd + c0 * zdd);
  return k;
}

}  // namespace detail

/// Foot position in the body frame.
inline Vec3 leg_fk(const LegModel& m, const Vec3& q, int leg) {
  return m.hips[leg] + detail::point_kinematics(q, Vec3::Zero(), m.l1, m.l2).p;
}

inline Mat3 leg_jacobian(const LegModel& m, const Vec3& q) {
  return detail::point_kinematics(q, Vec3::Zero(), m.l1, m.l2).J;
}

/// Jdot * qd for the foot.
inline Vec3 leg_jdot_qdot(const LegModel& m, const Vec3& q, const Vec3& qd) {
  return detail::point_kinematics(q, qd, m.l1, m.l2).Jdqd;
}

/// Inverse kinematics for a body-frame foot target below the hip, knee branch q2 <= 0.
inline Vec3 leg_ik(const LegModel& m, const Vec3& foot_body, int leg) {
  const Vec3 d = foot_body - m.hips[leg];
  const double q0 = std::atan2(d.y(), -d.z());
  const double zp = -std::hypot(d.y(), d.z());
  const double x = d.x();
  const double r2 = x * x + zp * zp;
  const double reach = m.l1 + m.l2;
  if (r2 > reach * reach * (1.0 + 1e-12) || r2 < std::pow(m.l1 - m.l2, 2)) {
    throw Error(ErrorCode::Unreachable, "foot target outside the leg workspace");
  }
  const double c2 = std::clamp((r2 - m.l1 * m.l1 - m.l2 * m.l2) / (2.0 * m.l1 * m.l2), -1.0, 1.0);
  const double q2 = -std::acos(c2);
  const double alpha = std::atan2(-x, -zp);
  const double beta = std::atan2(m.l2 * std::sin(q2), m.l1 + m.l2 * std::cos(q2));
  return Vec3(q0, alpha - beta, q2);
}

struct LegDynamics {
  Mat3 M;       // joint-space inertia
  Vec3 Cqd;     // Coriolis and centrifugal torque
  Vec3 G;       // gravity torque
  Mat3 Lambda;  // operational-space inertia at the foot
  Mat3 J;
  Vec3 Jdqd;
};

/// Point-mass-per-link dynamics. gravity_body is gravity expressed in the body frame.
inline LegDynamics leg_dynamics_terms(const LegModel& m, const Vec3& q, const Vec3& qd,
                                      const Vec3& gravity_body = Vec3(0.0, 0.0, -kGravity)) {
  const auto k1 = detail::point_kinematics(q, qd, 0.5 * m.l1, 0.0);
  const auto k2 = detail::point_kinematics(q, qd, m.l1, 0.5 * m.l2);
  const auto kf = detail::point_kinematics(q, qd, m.l1, m.l2);
  LegDynamics d;
  d.M = m.m1 * k1.J.transpose() * k1.J + m.m2 * k2.J.transpose() * k2.J;
  d.Cqd = m.m1 * k1.J.transpose() * k1.Jdqd + m.m2 * k2.J.transpose() * k2.Jdqd;
  d.G = -(m.m1 * k1.J.transpose() + m.m2 * k2.J.transpose()) * gravity_body;
  d.J = kf.J;
  d.Jdqd = kf.Jdqd;
  const Mat3 a = kf.J * d.M.ldlt().solve(kf.J.transpose());
  Eigen::JacobiSVD<Mat3> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  if (s(2) > 1e-6 * s(0)) {
    d.Lambda = a.inverse();
  } else {
    // Damped pseudo-inverse.
    const double l2 = m.damping * m.damping;
    Vec3 inv;
    for (int i = 0; i < 3; ++i) inv(i) = s(i) / (s(i) * s(i) + l2);
    d.Lambda = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  }
  d.Lambda = 0.5 * (d.Lambda + d.Lambda.transpose()).eval();
  return d;
}

/// Leg potential energy (for checking G).
inline double leg_potential(const LegModel& m, const Vec3& q, const Vec3& gravity_body) {
  const auto k1 = detail::point_kinematics(q, Vec3::Zero(), 0.5 * m.l1, 0.0);
  const auto k2 = detail::point_kinematics(q, Vec3::Zero(), m.l1, 0.5 * m.l2);
  return -(m.m1 * k1.p + m.m2 * k2.p).dot(gravity_body);
}

/// K_p,j = omega_des * Lambda_jj.
inline Mat3 scale_gains(double omega_des, const Mat3& lambda) {
  return (omega_des * lambda.diagonal()).asDiagonal();
}

struct SwingGains {
  // Multiplies the apparent mass; sqrt(omega_des) is the resulting natural
  // frequency in rad/s.
  double omega_des = 2500.0;
  double damping_ratio = 1.0;
};

struct CartesianTarget {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
};

/// tau = J^T [K_p e_p + K_d e_v] + J^T Lambda (a_ref - Jdot qd) + C qd + G
inline Vec3 swing_torque(const LegModel& m, int leg, const JointState& js, const CartesianTarget& ref,
                         const Mat3& kp, const Mat3& kd, const Vec3& gravity_body = Vec3(0, 0, -kGravity)) {
  const LegDynamics d = leg_dynamics_terms(m, js.q, js.qd, gravity_body);
  const Vec3 p = leg_fk(m, js.q, leg);
  const Vec3 v = d.J * js.qd;
  const Vec3 ff = d.J.transpose() * d.Lambda * (ref.a - d.Jdqd) + d.Cqd + d.G;
  return d.J.transpose() * (kp * (ref.p - p) + kd * (ref.v - v)) + ff;
}

/// Swing torque with gains scaled by the apparent mass.
inline Vec3 swing_torque(const LegModel& m, int leg, const JointState& js, const CartesianTarget& ref,
                         const SwingGains& g, const Vec3& gravity_body = Vec3(0, 0, -kGravity)) {
  const LegDynamics d = leg_dynamics_terms(m, js.q, js.qd, gravity_body);
  const Mat3 kp = scale_gains(g.omega_des, d.Lambda);
  const Mat3 kd = (2.0 * g.damping_ratio * std::sqrt(g.omega_des) * d.Lambda.diagonal()).asDiagonal();
  return swing_torque(m, leg, js, ref, kp, kd, gravity_body);
}

/// Stance mapping: torque producing foot force f (body frame) on the ground is -J^T f.
inline Vec3 stance_torque(const Mat3& j, const Vec3& f_body) { return -j.transpose() * f_body; }

/// Inverse of stance_torque: body-frame ground reaction force from joint torque.
inline Vec3 force_from_torque(const Mat3& j, const Vec3& tau) { return -j.transpose().lu().solve(tau); }

struct JumpTrackGains {
  Mat3 kp_cart = Vec3(500, 500, 500).asDiagonal().toDenseMatrix();
  Mat3 kd_cart = Vec3(10, 10, 10).asDiagonal().toDenseMatrix();
  Mat3 kp_joint = Vec3(80, 80, 80).asDiagonal().toDenseMatrix();
  Mat3 kd_joint = Vec3(2, 2, 2).asDiagonal().toDenseMatrix();
};

struct LegReference {
  Vec3 q = Vec3::Zero();
  Vec3 qd = Vec3::Zero();
  Vec3 p = Vec3::Zero();  // body-frame foot position
  Vec3 v = Vec3::Zero();
  Vec3 tau = Vec3::Zero();
};

/// tau = J^T [K_p (p_d - p) + K_d (v_d - v)] + tau_d + K_pj (q_d - q) + K_dj (qd_d - qd)
inline Vec3 jump_track_torque(const LegModel& m, int leg, const JointState& js, const LegReference& ref,
                              const JumpTrackGains& g) {
  const Mat3 j = leg_jacobian(m, js.q);
  const Vec3 p = leg_fk(m, js.q, leg);
  const Vec3 v = j * js.qd;
  return j.transpose() * (g.kp_cart * (ref.p - p) + g.kd_cart * (ref.v - v)) + ref.tau +
         g.kp_joint * (ref.q - js.q) + g.kd_joint * (ref.qd - js.qd);
}

inline LegReference lerp(const LegReference& a, const LegReference& b, double s) {
  LegReference r;
  r.q = a.q + s * (b.q - a.q);
  r.qd = a.qd + s * (b.qd - a.qd);
  r.p = a.p + s * (b.p - a.p);
  r.v = a.v + s * (b.v - a.v);
  r.tau = a.tau + s * (b.tau - a.tau);
  return r;
}

/// Piecewise-linear reference over knot times (strictly increasing), clamped at the ends.
template <class T>
T sample_linear(const std::vector<double>& times, const std::vector<T>& knots, double t) {
  if (t <= times.front()) return knots.front();
  if (t >= times.back()) return knots.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const auto k = static_cast<std::size_t>(it - times.begin()) - 1;
  const double s = (t - times[k]) / (times[k + 1] - times[k]);
  return lerp(knots[k], knots[k + 1], s);
}

/// Swing foot path: minimum-jerk blend in xy and z, plus a 64 s^3 (1-s)^3
/// bump reaching `apex` above the straight line at mid-swing.
struct SwingTrajectory {
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3::Zero();
  double duration = 0.165;
  double apex = 0.08;

  CartesianTarget eval(double t) const {
    const double T = duration;
    const double s = std::clamp(t / T, 0.0, 1.0);
    const double b = 10 * s * s * s - 15 * s * s * s * s + 6 * s * s * s * s * s;
    const double bd = (30 * s * s - 60 * s * s * s + 30 * s * s * s * s) / T;
    const double bdd = (60 * s - 180 * s * s + 120 * s * s * s) / (T * T);
    const double u = s * (1.0 - s);
    const double h = 64.0 * u * u * u;
    const double hd = 64.0 * 3.0 * u * u * (1.0 - 2.0 * s) / T;
    const double hdd = 64.0 * (6.0 * u * (1.0 - 2.0 * s) * (1.0 - 2.0 * s) - 6.0 * u * u) / (T * T);
    const Vec3 delta = end - start;
    CartesianTarget c;
    c.p = start + b * delta + Vec3(0, 0, apex * h);
    c.v = bd * delta + Vec3(0, 0, apex * hd);
    c.a = bdd * delta + Vec3(0, 0, apex * hdd);
    return c;
  }
};

}  // namespace quadloco
