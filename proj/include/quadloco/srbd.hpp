#pragma once

// Single-rigid-body dynamics with point-foot forces.
//
//   p'' = sum f / m + g
//   I_b Omega' + Omega x I_b Omega = R^T sum (p_f - p) x f
//   R' = R hat(Omega)
//
// Omega is the body-frame angular velocity.

#include "quadloco/common.hpp"
#include "quadloco/so3.hpp"

namespace quadloco {

struct SrbdState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Vec3 Omega = Vec3::Zero();  // body frame

  BodyState body() const { return {p, R, v, R * Omega}; }
  static SrbdState from(const BodyState& b) { return {b.p, b.v, b.R, b.R.transpose() * b.omega}; }
};

struct SrbdAccel {
  Vec3 pdd;
  Vec3 Omegad;
};

/// Forces are world-frame GRFs; feet are world positions.
inline SrbdAccel srbd_accel(const SrbdState& s, const Vec12& f, const PerLeg<Vec3>& feet, const BodyModel& m) {
  Vec3 force = Vec3::Zero(), torque = Vec3::Zero();
  for (int i = 0; i < kNumLegs; ++i) {
    const Vec3 fi = f.segment<3>(3 * i);
    force += fi;
    torque += (feet[i] - s.p).cross(fi);
  }
  SrbdAccel a;
  a.pdd = force / m.mass + m.gravity;
  const Vec3 tb = s.R.transpose() * torque;
  a.Omegad = m.inertia.ldlt().solve(tb - s.Omega.cross(m.inertia * s.Omega));
  return a;
}

/// Classical RK4 on (p, v, Omega) with R advanced through exp_exact at each
/// stage; forces and feet held constant over the step.
inline SrbdState srbd_rk4(const SrbdState& s, const Vec12& f, const PerLeg<Vec3>& feet, const BodyModel& m,
                          double dt) {
  struct D {
    Vec3 v, a, w, wd;
  };
  auto deriv = [&](const SrbdState& x) {
    const SrbdAccel acc = srbd_accel(x, f, feet, m);
    return D{x.v, acc.pdd, x.Omega, acc.Omegad};
  };
  auto advance = [&](const D& d, double h) {
    SrbdState x = s;
    x.p = s.p + h * d.v;
    x.v = s.v + h * d.a;
    x.R = s.R * so3::exp_exact(Vec3(h * d.w));
    x.Omega = s.Omega + h * d.wd;
    return x;
  };
  const D k1 = deriv(s);
  const D k2 = deriv(advance(k1, 0.5 * dt));
  const D k3 = deriv(advance(k2, 0.5 * dt));
  const D k4 = deriv(advance(k3, dt));
  SrbdState out = s;
  out.p = s.p + dt / 6.0 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v);
  out.v = s.v + dt / 6.0 * (k1.a + 2 * k2.a + 2 * k3.a + k4.a);
  out.R = so3::project_to_so3(s.R * so3::exp_exact(Vec3(dt / 6.0 * (k1.w + 2 * k2.w + 2 * k3.w + k4.w))));
  out.Omega = s.Omega + dt / 6.0 * (k1.wd + 2 * k2.wd + 2 * k3.wd + k4.wd);
  return out;
}

inline double srbd_energy(const SrbdState& s, const BodyModel& m) {
  return 0.5 * m.mass * s.v.squaredNorm() + 0.5 * s.Omega.dot(m.inertia * s.Omega) - m.mass * m.gravity.dot(s.p);
}

/// World-frame angular momentum about the CoM.
inline Vec3 srbd_angular_momentum(const SrbdState& s, const BodyModel& m) {
  return s.R * (m.inertia * s.Omega);
}

}  // namespace quadloco
