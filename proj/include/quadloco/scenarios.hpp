#pragma once

// Closed-loop locomotion scenarios on the simulator: stand, trot and slope
// walking under the balance QP or the convex MPC, with the state estimator
// optionally in the loop.

#include <array>
#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include "quadloco/balance.hpp"
#include "quadloco/estimation.hpp"
#include "quadloco/gait.hpp"
#include "quadloco/mpc.hpp"
#include "quadloco/sim.hpp"
#include "quadloco/swing.hpp"
#include "quadloco/terrain.hpp"

namespace quadloco {

enum class ControllerKind { Balance, Mpc };

struct LocomotionOptions {
  double duration = 5.0;  // s
  double dt = 1e-3;
  double z0 = 0.5;
  std::uint64_t seed = 1;
  std::string gait = "trot";
  double gait_period = 0.33;
  Vec2 v_cmd = Vec2::Zero();  // m/s, world
  double yaw_rate = 0.0;      // rad/s
  double ramp_time = 0.5;     // s, linear ramp of the velocity command
  double swing_apex = 0.08;   // m
  ControllerKind controller = ControllerKind::Balance;
  bool use_estimator = false;
  bool estimator_kinematics = true;  // false: prediction-only
  bool estimator_feedback = true;    // controllers act on the estimate (else on truth)
  bool adjust_posture = false;       // align the body with the fitted ground plane
  PlaneCoeffs ground;
  Vec3 initial_offset = Vec3::Zero();  // added to the initial body position
  SensorNoise noise;
  BodyModel model;
  LegModel legs;
  FrictionSpec friction;
  BalanceGains gains;
  int mpc_horizon = 10;
  double mpc_dt = 0.033;
  int mpc_replan_every = 33;  // control ticks
  MpcWeights mpc_weights;
  double kappa_ref = 0.1;
  KfNoise kf_noise;
};

struct LogRow {
  double t = 0.0;
  Vec3 p, v, rpy, omega;  // truth (omega in world frame)
  Vec3 p_hat, v_hat, rpy_hat;
  Vec3 p_d, v_d;
  Vec12 f;
  PerLeg<bool> stance;
  Vec3 gyro, accel;
  PerLeg<Vec3> q, qd;
};

using Metrics = std::vector<std::pair<std::string, double>>;

struct ScenarioResult {
  std::vector<LogRow> log;
  Metrics metrics;

  double metric(const std::string& key) const {
    for (const auto& [k, v] : metrics) {
      if (k == key) return v;
    }
    throw Error(ErrorCode::Config, "no metric '" + key + "'");
  }
};

namespace detail {

struct SwingPlan {
  Vec3 start = Vec3::Zero();
  double t_liftoff = 0.0;
};

inline double rms(double sum_sq, std::size_t n) { return n ? std::sqrt(sum_sq / static_cast<double>(n)) : 0.0; }

}  // namespace detail

/// Foot landing point for a leg whose swing ends after t_remaining.
inline Vec3 plan_foothold(const Vec3& p, const Mat3& R_yaw, const Vec3& hip, const Vec2& v, const Vec2& v_d,
                          double t_remaining, double t_stance, double z0, const PlaneCoeffs& ground) {
  const Vec3 hip_w = p + R_yaw * Vec3(hip.x(), hip.y(), 0.0);
  const Vec2 hip_td = hip_w.head<2>() + v_d * t_remaining;
  const Vec2 xy = footstep(hip_td, t_stance, v_d, v, z0);
  return Vec3(xy.x(), xy.y(), ground.height(xy.x(), xy.y()));
}

inline ScenarioResult run_locomotion(const LocomotionOptions& o) {
  const auto wall0 = std::chrono::steady_clock::now();
  GaitSchedule gait = gait_preset(o.gait, o.gait_period);
  validate(gait);
  if (!(o.dt > 0.0) || !(o.duration > 0.0)) throw Error(ErrorCode::Config, "dt and duration must be positive");

  SimWorld w;
  w.dt = o.dt;
  w.model = o.model;
  w.legs = o.legs;
  w.noise = o.noise;
  w.ground = o.ground;
  w.seed(o.seed);

  // Initial pose: standing on the ground plane.
  double yaw_d = 0.0;
  Posture posture;
  posture.com_height_d = o.z0;
  if (o.adjust_posture) posture = posture_from_plane(o.ground, yaw_d, o.z0);
  w.state.R = posture.R_d;
  w.state.p = Vec3(0, 0, com_target_z(o.ground, 0, 0, posture));
  for (int i = 0; i < kNumLegs; ++i) {
    Vec3 h = w.state.p + w.state.R * o.legs.hips[i];
    w.feet[i] = Vec3(h.x(), h.y(), o.ground.height(h.x(), h.y()));
  }
  w.state.p += o.initial_offset;
  for (int i = 0; i < kNumLegs; ++i) w.stance[i] = subphase(0.0, gait, i).contact;
  // Feet that start in swing lift off from their standing positions.

  BalanceController balance(o.model, o.gains, o.friction);
  {
    Vec12 f0 = Vec12::Zero();
    int ns = 0;
    for (int i = 0; i < kNumLegs; ++i) ns += w.stance[i] ? 1 : 0;
    for (int i = 0; i < kNumLegs; ++i) {
      if (w.stance[i]) f0(3 * i + 2) = o.model.mass * kGravity / ns;
    }
    balance.reset(f0);
  }

  StateEstimator::Options eo;
  eo.kappa_ref = o.kappa_ref;
  eo.noise = o.kf_noise;
  eo.use_kinematics = o.estimator_kinematics;
  StateEstimator est(eo);
  est.reset(w.state.R, w.state.p, w.state.v, w.feet);

  PlaneFilter plane_filter;
  PerLeg<Vec3> last_contact = w.feet;
  PerLeg<detail::SwingPlan> swing;
  for (int i = 0; i < kNumLegs; ++i) swing[i].start = w.feet[i];

  Vec2 p_cmd = w.state.p.head<2>();
  double yaw_cmd = 0.0;
  Vec12 f_mpc = balance.previous();
  int mpc_failures = 0;

  ScenarioResult res;
  const int steps = static_cast<int>(std::llround(o.duration / o.dt));
  res.log.reserve(steps + 1);
  double sq_h = 0, sq_v = 0, sq_p_est = 0, sq_v_est = 0, sq_vhat = 0, sq_tilt = 0;
  double max_h_err = 0;
  std::size_t n = 0;

  for (int k = 0; k <= steps; ++k) {
    const double t = k * o.dt;
    const double ramp = o.ramp_time > 0.0 ? std::min(1.0, t / o.ramp_time) : 1.0;
    const Vec2 v_cmd = ramp * o.v_cmd;

    // Sensors.
    const ImuSample imu = synth_imu(w);
    const PerLeg<JointState> enc = synth_encoders(w);
    PerLeg<Vec3> rel_body, vel_body;
    for (int i = 0; i < kNumLegs; ++i) {
      rel_body[i] = leg_fk(o.legs, enc[i].q, i);
      vel_body[i] = leg_jacobian(o.legs, enc[i].q) * enc[i].qd;
    }

    const BodyState truth = w.state.body();
    BodyState e = truth;
    PerLeg<Vec3> feet = w.feet;
    if (o.use_estimator) {
      PerLeg<double> ch{};
      for (int i = 0; i < kNumLegs; ++i) ch[i] = o.ground.height(last_contact[i].x(), last_contact[i].y());
      est.step(imu, rel_body, vel_body, w.stance, o.dt, ch);
      e.R = est.orientation();
      e.p = est.position();
      e.v = est.velocity();
      e.omega = e.R * imu.gyro;
      if (o.estimator_feedback) {
        for (int i = 0; i < kNumLegs; ++i) feet[i] = e.p + e.R * rel_body[i];
      }
    }
    const BodyState s = o.use_estimator && o.estimator_feedback ? e : truth;

    // Reference.
    PlaneCoeffs plane = o.ground;
    if (o.adjust_posture) {
      plane = plane_filter.update(fit_plane(last_contact));
      posture = posture_from_plane(plane, yaw_cmd, o.z0);
    } else {
      posture.R_d = yaw_rotation(yaw_cmd);
    }
    BodyTarget d;
    d.p = Vec3(p_cmd.x(), p_cmd.y(), 0.0);
    d.p.z() = o.adjust_posture ? com_target_z(plane, s.p.x(), s.p.y(), posture) : o.z0;
    d.R = posture.R_d;
    d.v = Vec3(v_cmd.x(), v_cmd.y(), 0.0);
    if (o.adjust_posture) d.v.z() = plane.a1 * v_cmd.x() + plane.a2 * v_cmd.y();
    d.omega = Vec3(0, 0, o.yaw_rate);
    d.a = Vec3::Zero();
    if (t < o.ramp_time) d.a.head<2>() = o.v_cmd / o.ramp_time;

    // Forces.
    Vec12 f;
    if (o.controller == ControllerKind::Balance) {
      f = balance.step(s, d, feet, w.stance).F;
    } else {
      if (k % o.mpc_replan_every == 0) {
        MpcConfig c;
        c.horizon = o.mpc_horizon;
        c.dt = o.mpc_dt;
        c.op_yaw = so3::to_rpy(s.R).z();
        c.model = o.model;
        c.set_uniform_weights(o.mpc_weights);
        Vec12d x0 = mpc_state(s);
        c.x_ref = mpc_reference(x0, Vec3(v_cmd.x(), v_cmd.y(), 0.0), o.yaw_rate, d.p.z(), c.horizon, c.dt);
        // Reference xy follows the integrated command rather than the measured state.
        for (int i = 0; i < c.horizon; ++i) {
          c.x_ref[i].head<2>() = p_cmd + v_cmd * ((i + 1) * c.dt);
          c.x_ref[i].segment<3>(mpc_index::TH) = so3::to_rpy(d.R);
          c.x_ref[i](mpc_index::TH + 2) = yaw_cmd + o.yaw_rate * (i + 1) * c.dt;
          c.x_ref[i](mpc_index::V + 2) = d.v.z();
        }
        const Mat3 r_yaw = yaw_rotation(c.op_yaw);
        for (int i = 0; i < c.horizon; ++i) {
          const double ti = t + i * c.dt;
          // Lever arms from the predicted body position at the middle of the step.
          const Vec3 p_i = s.p + (i + 0.5) * c.dt * Vec3(v_cmd.x(), v_cmd.y(), 0.0);
          PerLeg<bool> con;
          PerLeg<Vec3> rel;
          for (int j = 0; j < kNumLegs; ++j) {
            const Subphase sp = subphase(ti + 1e-9, gait, j);
            con[j] = sp.contact;
            Vec3 foot = feet[j];
            const double t_start = ti - sp.phi * gait.stance_time();
            const bool same_stance = w.stance[j] && sp.contact && t_start <= t + 1e-9;
            if (sp.contact && !same_stance && !gait.always_stance) {
              const double lead = std::max(0.0, t_start - t);
              foot = plan_foothold(s.p, r_yaw, o.legs.hips[j], v_cmd, v_cmd, lead, gait.stance_time(), o.z0,
                                   o.ground);
            }
            rel[j] = foot - p_i;
          }
          c.contact.push_back(con);
          c.feet_rel.push_back(rel);
        }
        const MpcResult r = solve_mpc(c, x0, o.friction);
        if (r.ok()) {
          f_mpc = r.U[0];
        } else {
          ++mpc_failures;
          f_mpc = balance.step(s, d, feet, w.stance).F;
        }
      }
      f = f_mpc;
      for (int i = 0; i < kNumLegs; ++i) {
        if (!w.stance[i]) f.segment<3>(3 * i).setZero();
      }
    }

    // Log.
    LogRow row;
    row.t = t;
    row.p = truth.p;
    row.v = truth.v;
    row.rpy = so3::to_rpy(truth.R);
    row.omega = truth.omega;
    row.p_hat = e.p;
    row.v_hat = e.v;
    row.rpy_hat = so3::to_rpy(e.R);
    row.p_d = d.p;
    row.v_d = d.v;
    row.f = f;
    row.stance = w.stance;
    row.gyro = imu.gyro;
    row.accel = imu.accel;
    for (int i = 0; i < kNumLegs; ++i) {
      row.q[i] = enc[i].q;
      row.qd[i] = enc[i].qd;
    }
    res.log.push_back(row);

    const double h_err = truth.p.z() - d.p.z();
    sq_h += h_err * h_err;
    max_h_err = std::max(max_h_err, std::abs(h_err));
    sq_v += (truth.v.head<2>() - v_cmd).squaredNorm();
    sq_p_est += (e.p - truth.p).squaredNorm();
    sq_v_est += (e.v - truth.v).squaredNorm();
    sq_vhat += e.v.squaredNorm();
    sq_tilt += std::pow(so3::rotation_angle(d.R.transpose() * truth.R), 2);
    ++n;
    if (k == steps) break;

    // Swing feet and contact schedule for the next tick.
    const double t1 = t + o.dt;
    PerLeg<bool> next;
    PerLeg<Vec3> targets = w.feet;
    const Mat3 r_yaw = yaw_rotation(so3::to_rpy(s.R).z());
    for (int i = 0; i < kNumLegs; ++i) {
      next[i] = subphase(t1 + 1e-9, gait, i).contact;
      if (w.stance[i] && !next[i]) {
        swing[i].start = w.feet[i];
        swing[i].t_liftoff = t;
      }
      if (!next[i] || !w.stance[i]) {
        const double t_rem = std::max(0.0, swing[i].t_liftoff + gait.swing_time() - t1);
        const Vec3 end = plan_foothold(s.p, r_yaw, o.legs.hips[i], s.v.head<2>(), v_cmd, t_rem,
                                       gait.stance_time(), o.z0, o.ground);
        SwingTrajectory traj;
        traj.start = swing[i].start;
        traj.end = end;
        traj.duration = gait.swing_time();
        traj.apex = o.swing_apex;
        targets[i] = traj.eval(std::min(t1 - swing[i].t_liftoff, traj.duration)).p;
      }
    }
    sim_step(w, f, targets, next);
    for (int i = 0; i < kNumLegs; ++i) {
      if (w.stance[i]) last_contact[i] = w.feet[i];
    }
    p_cmd += v_cmd * o.dt;
    yaw_cmd += o.yaw_rate * o.dt;
  }

  const auto wall1 = std::chrono::steady_clock::now();
  res.metrics = {
      {"height_rms_m", detail::rms(sq_h, n)},
      {"height_max_abs_m", max_h_err},
      {"final_height_error_m", std::abs(res.log.back().p.z() - res.log.back().p_d.z())},
      {"velocity_rms_mps", detail::rms(sq_v, n)},
      {"orientation_rms_rad", detail::rms(sq_tilt, n)},
      {"est_position_rms_m", detail::rms(sq_p_est, n)},
      {"est_velocity_error_rms_mps", detail::rms(sq_v_est, n)},
      {"est_velocity_norm_rms_mps", detail::rms(sq_vhat, n)},
      {"mpc_failures", static_cast<double>(mpc_failures)},
      {"runtime_s", std::chrono::duration<double>(wall1 - wall0).count()},
  };
  return res;
}

/// Offline estimation over a recorded log: IMU, joint encoders and contact
/// flags drive the estimator; truth columns are used only for the initial
/// pose and the error metrics. Contact heights come from o.ground.
inline ScenarioResult replay_estimation(const std::vector<LogRow>& log, const LocomotionOptions& o) {
  if (log.size() < 2) throw Error(ErrorCode::Config, "replay needs at least two log rows");
  const auto wall0 = std::chrono::steady_clock::now();
  StateEstimator::Options eo;
  eo.kappa_ref = o.kappa_ref;
  eo.noise = o.kf_noise;
  eo.use_kinematics = o.estimator_kinematics;
  StateEstimator est(eo);
  const Mat3 r0 = so3::from_rpy(log.front().rpy);
  PerLeg<Vec3> feet;
  for (int i = 0; i < kNumLegs; ++i) feet[i] = log.front().p + r0 * leg_fk(o.legs, log.front().q[i], i);
  est.reset(r0, log.front().p, log.front().v, feet);

  ScenarioResult res;
  res.log.reserve(log.size());
  double sq_p = 0, sq_v = 0, sq_vhat = 0, sq_r = 0;
  for (std::size_t k = 0; k < log.size(); ++k) {
    LogRow row = log[k];
    const double dt = k + 1 < log.size() ? log[k + 1].t - log[k].t : log[k].t - log[k - 1].t;
    if (!(dt > 0.0)) throw Error(ErrorCode::Config, "log times must increase (row " + std::to_string(k) + ")");
    PerLeg<Vec3> rel, vel;
    PerLeg<double> ch{};
    for (int i = 0; i < kNumLegs; ++i) {
      rel[i] = leg_fk(o.legs, row.q[i], i);
      vel[i] = leg_jacobian(o.legs, row.q[i]) * row.qd[i];
      const Vec3 foot = est.position() + est.orientation() * rel[i];
      ch[i] = o.ground.height(foot.x(), foot.y());
    }
    est.step(ImuSample{row.gyro, row.accel}, rel, vel, row.stance, dt, ch);
    row.p_hat = est.position();
    row.v_hat = est.velocity();
    row.rpy_hat = so3::to_rpy(est.orientation());
    sq_p += (row.p_hat - row.p).squaredNorm();
    sq_v += (row.v_hat - row.v).squaredNorm();
    sq_vhat += row.v_hat.squaredNorm();
    sq_r += std::pow(so3::rotation_angle(so3::from_rpy(row.rpy).transpose() * est.orientation()), 2);
    res.log.push_back(row);
  }
  const std::size_t n = log.size();
  const auto wall1 = std::chrono::steady_clock::now();
  res.metrics = {
      {"est_position_rms_m", detail::rms(sq_p, n)},
      {"est_velocity_error_rms_mps", detail::rms(sq_v, n)},
      {"est_velocity_norm_rms_mps", detail::rms(sq_vhat, n)},
      {"est_orientation_rms_rad", detail::rms(sq_r, n)},
      {"final_position_error_m", (res.log.back().p_hat - res.log.back().p).norm()},
      {"runtime_s", std::chrono::duration<double>(wall1 - wall0).count()},
  };
  return res;
}

/// Stand in place on flat ground with the estimator in the loop.
inline LocomotionOptions stand_defaults() {
  LocomotionOptions o;
  o.gait = "stand";
  o.duration = 5.0;
  o.use_estimator = true;
  o.noise.gyro = 1e-3;
  o.noise.accel = 0.05;
  return o;
}

/// 1 m/s forward trot.
inline LocomotionOptions trot_defaults(ControllerKind c = ControllerKind::Balance) {
  LocomotionOptions o;
  o.gait = "trot";
  o.duration = 5.0;
  o.v_cmd = Vec2(1.0, 0.0);
  o.controller = c;
  return o;
}

/// Uphill trot on a 10 degree ramp with posture adjustment.
inline LocomotionOptions slope_defaults() {
  LocomotionOptions o = trot_defaults();
  o.v_cmd = Vec2(0.5, 0.0);
  o.ground = PlaneCoeffs{0.0, std::tan(10.0 * std::numbers::pi / 180.0), 0.0};
  o.adjust_posture = true;
  return o;
}

}  // namespace quadloco
