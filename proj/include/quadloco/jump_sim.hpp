#pragma once

// Jump execution on the simulator: a contact-timing solution is exported at
// the control rate, stance legs track it with the jump tracking torque
// (mapped to ground forces through the leg Jacobian), airborne legs hold the
// pre-landing configuration, and the landing balance QP takes over once a
// foot reports enough normal force after T_posing.

#include <chrono>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "quadloco/balance.hpp"
#include "quadloco/scenarios.hpp"
#include "quadloco/sim.hpp"
#include "quadloco/swing.hpp"
#include "quadloco/trajopt.hpp"

namespace quadloco {

struct JumpSimOptions {
  trajopt::JumpSpec spec = trajopt::vertical_hop_spec();
  trajopt::SolveOptions solve;
  double dt = 1e-3;
  double settle_time = 1.5;         // s simulated after the reference ends
  double posing_lead = 0.1;         // s, T_posing = total time - posing_lead
  double contact_threshold = 20.0;  // N
  double liftoff_clearance = 5e-3;  // m a lifted foot must clear before it can touch down again
  std::uint64_t seed = 1;
  SensorNoise noise;
  LegModel legs;
  JumpTrackGains track;
  BalanceGains landing_gains;
};

struct JumpScenarioResult {
  ScenarioResult run;
  trajopt::TimingSolution solution;
};

namespace detail {

// Joint-space reference of one leg from a body reference sample.
inline LegReference leg_reference(const LegModel& legs, int leg, const trajopt::ReferenceSample& r, const Vec3& foot,
                                  const Vec3& landing_body) {
  LegReference out;
  if (r.stance[leg]) {
    out.p = r.R.transpose() * (foot - r.p);
    out.v = -r.Omega.cross(out.p) - r.R.transpose() * r.v;
    out.q = leg_ik(legs, out.p, leg);
    const Mat3 j = leg_jacobian(legs, out.q);
    out.qd = j.fullPivLu().solve(out.v);
    out.tau = stance_torque(j, r.R.transpose() * r.f.segment<3>(3 * leg));
  } else {
    out.p = landing_body;
    out.q = leg_ik(legs, out.p, leg);
  }
  return out;
}

inline Vec3 clamp_to_pyramid(Vec3 f, const FrictionSpec& fr) {
  f.z() = std::clamp(f.z(), 0.0, fr.f_max);
  f.x() = std::clamp(f.x(), -fr.mu * f.z(), fr.mu * f.z());
  f.y() = std::clamp(f.y(), -fr.mu * f.z(), fr.mu * f.z());
  return f;
}

}  // namespace detail

inline ScenarioResult run_jump_tracking(const JumpSimOptions& o, const trajopt::Problem& pb,
                                        const trajopt::TimingSolution& sol) {
  const auto wall0 = std::chrono::steady_clock::now();
  const trajopt::JumpSpec& spec = pb.spec;
  const auto ref = trajopt::export_reference(pb, sol, o.dt);
  const double t_total = sol.total_time();
  const double t_posing = t_total - o.posing_lead;

  SimWorld w;
  w.dt = o.dt;
  w.model = spec.model;
  w.legs = o.legs;
  w.noise = o.noise;
  w.seed(o.seed);
  w.state.p = spec.p0;
  w.state.R = spec.R0;
  w.feet = spec.feet0;
  w.stance = {true, true, true, true};
  const FrictionSpec& fr = spec.friction;

  PerLeg<Vec3> landing_body;
  for (int i = 0; i < kNumLegs; ++i) landing_body[i] = spec.Rg.transpose() * (spec.feet_g[i] - spec.pg);

  PerLeg<LegSim> air;
  PerLeg<bool> armed{false, false, false, false};
  for (int i = 0; i < kNumLegs; ++i) {
    air[i].model = o.legs;
    air[i].leg = i;
  }

  BalanceController landing(spec.model, o.landing_gains, fr);
  bool landed = false;
  double t_switch = -1.0, t_takeoff = -1.0, apex = spec.p0.z();
  double sq_track = 0.0, max_track = 0.0;
  std::size_t n_track = 0;

  ScenarioResult res;
  const int steps = static_cast<int>(std::llround((t_total + o.settle_time) / o.dt));
  res.log.reserve(steps + 1);

  for (int k = 0; k <= steps; ++k) {
    const double t = k * o.dt;
    const trajopt::ReferenceSample& r = ref[std::min<std::size_t>(k, ref.size() - 1)];
    const bool in_reference = k + 1 < static_cast<int>(ref.size());
    const ImuSample imu = synth_imu(w);
    PerLeg<JointState> enc = synth_encoders(w);
    for (int i = 0; i < kNumLegs; ++i) {
      if (!w.stance[i]) enc[i] = air[i].js;
    }

    // Stance legs during the jump: reference stance, or early touchdown.
    Vec12 f = Vec12::Zero();
    PerLeg<Vec3> tau;
    Eigen::Vector4d contact = Eigen::Vector4d::Zero();
    for (int i = 0; i < kNumLegs; ++i) {
      const LegReference lr = detail::leg_reference(o.legs, i, r, spec.feet0[i], landing_body[i]);
      tau[i] = jump_track_torque(o.legs, i, enc[i], lr, o.track);
      if (w.stance[i]) {
        const Vec3 f_body = force_from_torque(leg_jacobian(o.legs, enc[i].q), tau[i]);
        const Vec3 fw = detail::clamp_to_pyramid(w.state.R * f_body, fr);
        contact(i) = fw.z();
        f.segment<3>(3 * i) = fw;
      }
    }
    if (!landed && landing_switch(contact, t, t_posing, o.contact_threshold)) {
      landed = true;
      t_switch = t;
      landing.reset(f);
    }
    BodyTarget d;
    d.p = spec.pg;
    d.R = spec.Rg;
    if (landed) {
      f = landing.step(w.state.body(), d, w.feet, w.stance).F;
    } else {
      d.p = r.p;
      d.R = r.R;
      d.v = r.v;
      const Vec3 e = r.p - w.state.p;
      sq_track += e.squaredNorm();
      max_track = std::max(max_track, e.norm());
      ++n_track;
    }

    LogRow row;
    row.t = t;
    row.p = row.p_hat = w.state.p;
    row.v = row.v_hat = w.state.v;
    row.rpy = row.rpy_hat = so3::to_rpy(w.state.R);
    row.omega = w.state.R * w.state.Omega;
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
    apex = std::max(apex, w.state.p.z());
    if (k == steps) break;

    // Liftoff where the reference leaves contact.
    const trajopt::ReferenceSample& r1 = ref[std::min<std::size_t>(k + 1, ref.size() - 1)];
    PerLeg<bool> next = w.stance;
    for (int i = 0; i < kNumLegs; ++i) {
      if (!landed && in_reference && w.stance[i] && !r1.stance[i]) {
        next[i] = false;
        air[i].js = enc[i];
        armed[i] = false;
        if (t_takeoff < 0.0) t_takeoff = t + o.dt;
      }
    }
    const Vec3 gravity_body = w.state.R.transpose() * (w.model.gravity - w.last_accel);
    for (int i = 0; i < kNumLegs; ++i) {
      if (w.stance[i]) continue;
      air[i].gravity_body = gravity_body;
      // Airborne legs keep the pre-landing pose, also after the switch.
      const LegReference hold = detail::leg_reference(o.legs, i, r, spec.feet0[i], landing_body[i]);
      air[i].step(landed ? jump_track_torque(o.legs, i, air[i].js, hold, o.track) : tau[i], o.dt);
    }
    sim_step(w, f, w.feet, w.stance);
    for (int i = 0; i < kNumLegs; ++i) {
      if (w.stance[i] && !next[i]) w.stance[i] = false;
      if (w.stance[i]) continue;
      w.feet[i] = w.state.p + w.state.R * leg_fk(o.legs, air[i].js.q, i);
      const double ground = w.ground.height(w.feet[i].x(), w.feet[i].y());
      if (w.feet[i].z() > ground + o.liftoff_clearance) armed[i] = true;
      if (armed[i] && w.feet[i].z() <= ground) {
        w.feet[i].z() = ground;
        w.stance[i] = true;
      }
    }
  }

  const auto wall1 = std::chrono::steady_clock::now();
  const LogRow& last = res.log.back();
  const Mat3 r_end = so3::from_rpy(last.rpy);
  res.metrics = {
      {"final_orientation_error_deg", so3::rotation_angle(spec.Rg.transpose() * r_end) * 180.0 / std::numbers::pi},
      {"final_height_error_m", std::abs(last.p.z() - spec.pg.z())},
      {"final_position_error_m", (last.p - spec.pg).norm()},
      {"takeoff_time_s", t_takeoff},
      {"landing_switch_time_s", t_switch},
      {"posing_time_s", t_posing},
      {"apex_height_m", apex},
      {"tracking_rms_m", detail::rms(sq_track, n_track)},
      {"tracking_max_m", max_track},
      {"runtime_s", std::chrono::duration<double>(wall1 - wall0).count()},
  };
  return res;
}

/// Solve the contact timings for o.spec and fly the result.
inline JumpScenarioResult run_jump(const JumpSimOptions& o) {
  const trajopt::Problem pb = trajopt::build_problem(o.spec);
  JumpScenarioResult out;
  out.solution = trajopt::solve_timing(pb, o.solve);
  out.run = run_jump_tracking(o, pb, out.solution);
  out.run.metrics.push_back({"trajopt_solve_time_s", out.solution.solve_time_s});
  return out;
}

}  // namespace quadloco
