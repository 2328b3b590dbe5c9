#pragma once

// Rigid-body quadruped simulator with kinematic point feet. Stance feet are
// pinned where they touched down; swing feet follow their commanded targets.
// The contact force reported for a stance foot is the commanded force.

#include <cstdint>
#include <random>

#include "quadloco/common.hpp"
#include "quadloco/estimation.hpp"
#include "quadloco/srbd.hpp"
#include "quadloco/swing.hpp"
#include "quadloco/terrain.hpp"

namespace quadloco {

struct SensorNoise {
  double gyro = 0.0;      // rad/s, per-sample std dev
  double accel = 0.0;     // m/s^2
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
  double encoder = 0.0;   // rad
  double foot_slip = 0.0; // m / sqrt(s), stance-foot random walk
};

struct SimWorld {
  SrbdState state;
  PerLeg<Vec3> feet;             // world
  PerLeg<bool> stance{true, true, true, true};
  PlaneCoeffs ground;
  double time = 0.0;
  double dt = 1e-3;
  BodyModel model;
  LegModel legs;
  SensorNoise noise;
  std::mt19937_64 rng{0};
  Vec3 last_accel = Vec3::Zero();  // p'' over the last step (for the IMU)
  Vec12 last_forces = Vec12::Zero();

  void seed(std::uint64_t s) { rng.seed(s); }
};

/// Standing world: body at height z0 above flat ground, feet under the hips.
inline SimWorld make_stand_world(double z0 = 0.5, std::uint64_t seed = 0) {
  SimWorld w;
  w.state.p = Vec3(0, 0, z0);
  for (int i = 0; i < kNumLegs; ++i) w.feet[i] = Vec3(w.legs.hips[i].x(), w.legs.hips[i].y(), 0.0);
  w.seed(seed);
  return w;
}

/// Advance one step. Forces are world-frame GRFs and must be zero for swing
/// feet. swing_targets gives the world position of each swing foot at the end
/// of the step; stance entries are ignored.
inline void sim_step(SimWorld& w, const Vec12& forces, const PerLeg<Vec3>& swing_targets,
                     const PerLeg<bool>& next_stance) {
  Vec12 f = forces;
  for (int i = 0; i < kNumLegs; ++i) {
    if (!w.stance[i]) f.segment<3>(3 * i).setZero();
  }
  w.last_forces = f;
  w.last_accel = srbd_accel(w.state, f, w.feet, w.model).pdd;
  w.state = srbd_rk4(w.state, f, w.feet, w.model, w.dt);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int i = 0; i < kNumLegs; ++i) {
    if (!w.stance[i]) {
      w.feet[i] = swing_targets[i];
    } else if (w.noise.foot_slip > 0.0) {
      const double s = w.noise.foot_slip * std::sqrt(w.dt);
      w.feet[i] += Vec3(s * n01(w.rng), s * n01(w.rng), 0.0);
    }
    // Touchdown snaps the foot onto the ground plane.
    if (next_stance[i] && !w.stance[i]) w.feet[i].z() = w.ground.height(w.feet[i].x(), w.feet[i].y());
  }
  w.stance = next_stance;
  w.time += w.dt;
}

/// gyro = Omega + noise, accel = R^T (p'' + (0, 0, g)) + noise.
inline ImuSample synth_imu(SimWorld& w, const Vec3& true_accel) {
  std::normal_distribution<double> n01(0.0, 1.0);
  ImuSample s;
  s.gyro = w.state.Omega + w.noise.gyro_bias;
  s.accel = w.state.R.transpose() * (true_accel - w.model.gravity) + w.noise.accel_bias;
  for (int k = 0; k < 3; ++k) {
    s.gyro(k) += w.noise.gyro * n01(w.rng);
    s.accel(k) += w.noise.accel * n01(w.rng);
  }
  return s;
}

inline ImuSample synth_imu(SimWorld& w) { return synth_imu(w, w.last_accel); }

/// Body-frame foot position and velocity (R^T (p_f - p) and its rate).
inline Vec3 foot_in_body(const SimWorld& w, int leg) {
  return w.state.R.transpose() * (w.feet[leg] - w.state.p);
}

/// Joint states from the kinematic feet through leg IK. Stance feet are
/// static in the world; swing-foot velocity is taken as zero in the world.
inline PerLeg<JointState> synth_encoders(SimWorld& w) {
  std::normal_distribution<double> n01(0.0, 1.0);
  PerLeg<JointState> out;
  const Vec3 v_body = w.state.R.transpose() * w.state.v;
  for (int i = 0; i < kNumLegs; ++i) {
    const Vec3 r = foot_in_body(w, i);
    out[i].q = leg_ik(w.legs, r, i);
    const Vec3 rdot = -w.state.Omega.cross(r) - v_body;
    const Mat3 j = leg_jacobian(w.legs, out[i].q);
    out[i].qd = j.fullPivLu().solve(rdot);
    if (w.noise.encoder > 0.0) {
      for (int k = 0; k < 3; ++k) out[i].q(k) += w.noise.encoder * n01(w.rng);
    }
  }
  return out;
}

/// Fixed-base single leg under its own dynamics, integrated with RK4 at a
/// finer substep while the torque is held.
struct LegSim {
  LegModel model;
  int leg = FR;
  JointState js;
  Vec3 gravity_body = Vec3(0, 0, -kGravity);

  Vec3 qdd(const Vec3& q, const Vec3& qd, const Vec3& tau) const {
    const LegDynamics d = leg_dynamics_terms(model, q, qd, gravity_body);
    return d.M.ldlt().solve(tau - d.Cqd - d.G);
  }

  void step(const Vec3& tau, double dt, int substeps = 4) {
    const double h = dt / substeps;
    for (int s = 0; s < substeps; ++s) {
      const Vec3 q = js.q, v = js.qd;
      const Vec3 a1 = qdd(q, v, tau);
      const Vec3 a2 = qdd(q + 0.5 * h * v, v + 0.5 * h * a1, tau);
      const Vec3 a3 = qdd(q + 0.5 * h * (v + 0.5 * h * a1), v + 0.5 * h * a2, tau);
      const Vec3 a4 = qdd(q + h * (v + 0.5 * h * a2), v + h * a3, tau);
      js.q = q + h * v + h * h / 6.0 * (a1 + a2 + a3);
      js.qd = v + h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4);
    }
  }
};

}  // namespace quadloco
