// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>

#include "quadloco/balance.hpp"
#include "quadloco/estimation.hpp"
#include "quadloco/gait.hpp"
#include "quadloco/jump_sim.hpp"
#include "quadloco/qp.hpp"
#include "quadloco/scenarios.hpp"
#include "quadloco/so3.hpp"
#include "quadloco/terrain.hpp"
#include "quadloco/trajopt.hpp"
#include "support/qp_oracle.hpp"
#include "support/random_qp.hpp"
#include "support/trajopt_checker.hpp"

using namespace quadloco;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const char* fmt, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), fmt, args...);
    if (!detail.empty()) detail += "; ";
    detail += buf;
    if (!ok) {
      detail += " [x]";
      pass = false;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double tilt_error(const Mat3& r_hat) {
  const Vec3 a = r_hat.transpose() * Vec3::UnitZ();
  return std::atan2(a.cross(Vec3::UnitZ()).norm(), a.z());
}

std::map<std::string, double> as_map(const Metrics& m) { return {m.begin(), m.end()}; }

// 1. Orientation filter de-drift
Outcome orientation_filter() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const double dt = 1e-3;
  ImuSample imu;
  imu.accel = Vec3(0, 0, kGravity);

  OrientationFilter f;
  f.R_hat = so3::from_rpy(Vec3(0, 10 * kDeg, 0));
  const double e0 = tilt_error(f.R_hat);
  double t_cross = -1.0;
  for (int k = 1; k <= 30000 && t_cross < 0; ++k) {
    f = orientation_step(f, imu, dt);
    if (tilt_error(f.R_hat) <= e0 / std::numbers::e) t_cross = k * dt;
  }
  out.require(std::abs(t_cross - 10.0) <= 2.0, "time constant %.3f s (10 +/- 2)", t_cross);

  // Same biased gyro, with and without the accelerometer correction.
  imu.gyro = Vec3(0, 0.01, 0);
  OrientationFilter corrected;
  Mat3 gyro_only = Mat3::Identity();
  double late_corrected = 0.0;
  for (int k = 1; k <= 60000; ++k) {
    corrected = orientation_step(corrected, imu, dt);
    gyro_only = so3::project_to_so3(gyro_only * so3::exp_exact(imu.gyro * dt));
    if (k == 50000) late_corrected = tilt_error(corrected.R_hat);
  }
  const double e_filter = tilt_error(corrected.R_hat), e_gyro = tilt_error(gyro_only);
  out.require(e_gyro >= 10.0 * e_filter, "60 s drift gyro-only %.4f rad vs filter %.4f rad, ratio %.2f (>= 10)", e_gyro,
              e_filter, e_gyro / e_filter);
  out.require(true, "filter drift over the last 10 s %.1e rad", std::abs(e_filter - late_corrected));
  const double rt = seconds_since(t0);
  out.require(rt < 1.0, "runtime %.2f s", rt);
  return out;
}

// 2. Kalman filter de-drift in the standing scenario
Outcome kf_stand() {
  Outcome out;
  LocomotionOptions o = stand_defaults();
  o.duration = 10.0;
  o.noise.accel = 0.05;
  const auto t0 = std::chrono::steady_clock::now();
  auto kf = as_map(run_locomotion(o).metrics);
  const double rt = seconds_since(t0);
  o.estimator_kinematics = false;
  o.estimator_feedback = false;
  auto pred = as_map(run_locomotion(o).metrics);

  const double v = kf["est_velocity_norm_rms_mps"], p = kf["est_position_rms_m"];
  out.require(v <= 0.03, "|v_hat| rms %.4f m/s", v);
  out.require(p <= 0.01, "position rms %.4f m", p);
  const double vp = pred["est_velocity_norm_rms_mps"], pp = pred["est_position_rms_m"];
  out.require(vp > 5.0 * v && pp > 5.0 * p, "prediction-only %.3f m/s, %.3f m", vp, pp);
  out.require(rt < 5.0, "runtime %.2f s", rt);
  return out;
}

// 3. Ground plane fit
Outcome plane_fit() {
  Outcome out;
  const auto hips = default_hip_offsets();
  PerLeg<Vec2> xy;
  Eigen::Vector4d z;
  for (int i = 0; i < kNumLegs; ++i) {
    xy[i] = hips[i].head<2>();
    z(i) = 0.2 * xy[i].x();
  }
  const double exact = (fit_plane(xy, z).vec() - Vec3(0, 0.2, 0)).norm();
  out.require(exact <= 1e-12, "z = 0.2x error %.1e", exact);

  // Noisy feet: slope errors against sigma^2 (W^T W)^-1.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 5e-3);
  const int trials = 2000;
  int inside = 0;
  double worst = 0.0;
  for (int k = 0; k < trials; ++k) {
    const Vec3 a(0.1 * u(rng), 0.3 * u(rng), 0.3 * u(rng));
    Eigen::Matrix<double, 4, 3> w;
    for (int i = 0; i < kNumLegs; ++i) {
      xy[i] = hips[i].head<2>() + 0.05 * Vec2(u(rng), u(rng));
      w.row(i) << 1.0, xy[i].x(), xy[i].y();
      z(i) = a(0) + a(1) * xy[i].x() + a(2) * xy[i].y() + noise(rng);
    }
    const Mat3 cov = 25e-6 * (w.transpose() * w).inverse();
    const Vec3 e = fit_plane(xy, z).vec() - a;
    const double s1 = std::abs(e(1)) / std::sqrt(cov(1, 1)), s2 = std::abs(e(2)) / std::sqrt(cov(2, 2));
    worst = std::max({worst, s1, s2});
    inside += (s1 <= 3.0) + (s2 <= 3.0);
  }
  const double frac = static_cast<double>(inside) / (2 * trials);
  out.require(frac >= 0.99, "%.4f of slopes within 3 sigma over %d planes (normal: 0.9973), worst %.2f sigma", frac,
              trials, worst);
  return out;
}

// 4. Balance QP
Outcome balance() {
  Outcome out;
  const BodyModel model;
  BalanceGains g;
  g.beta = 0.0;
  const FrictionSpec fr;
  PerLeg<Vec3> feet;
  const auto hips = default_hip_offsets();
  for (int i = 0; i < kNumLegs; ++i) feet[i] = hips[i] - Vec3(0, 0, 0.5);
  const PerLeg<bool> all{true, true, true, true};
  const ForceModel fm = build_force_model(Vec3::Zero(), feet, model, {Vec3::Zero(), Vec3::Zero()});
  const BalanceResult hover = balance_qp(fm.A, fm.b, Vec12::Zero(), g, fr, all);
  double worst_fz = 0.0;
  for (int i = 0; i < kNumLegs; ++i) worst_fz = std::max(worst_fz, std::abs(hover.F(3 * i + 2) - model.mass * kGravity / 4));
  out.require(worst_fz <= 0.5, "hover |F_z - mg/4| %.2e N (mg/4 = %.2f N)", worst_fz, model.mass * kGravity / 4);

  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution coin(0.7);
  int violations = 0;
  for (int k = 0; k < 200; ++k) {
    PerLeg<bool> st;
    int n = 0;
    for (auto& b : st) n += (b = coin(rng));
    if (!n) st[k % 4] = true;
    const WrenchCommand cmd{Vec3(8 * u(rng), 8 * u(rng), 8 * u(rng)), Vec3(20 * u(rng), 20 * u(rng), 20 * u(rng))};
    const ForceModel m = build_force_model(Vec3(0.02 * u(rng), 0.02 * u(rng), 0.0), feet, model, cmd);
    const BalanceResult r = balance_qp(m.A, m.b, Vec12::Zero(), BalanceGains{}, fr, st);
    for (int i = 0; i < kNumLegs; ++i) {
      const Vec3 f = r.F.segment<3>(3 * i);
      if (!st[i]) {
        violations += !f.isZero(0);
        continue;
      }
      const double tol = 1e-7;
      violations += std::abs(f.x()) > fr.mu * f.z() + tol || std::abs(f.y()) > fr.mu * f.z() + tol ||
                    f.z() < fr.f_min - tol || f.z() > fr.f_max + tol;
    }
  }
  out.require(violations == 0, "%d pyramid or swing violations in 200 random commands", violations);

  double worst = 0.0;
  std::mt19937 qrng(7);
  int missing = 0;
  for (int k = 0; k < 200; ++k) {
    const QpProblem qp = quadloco::testing::random_force_qp(qrng);
    const QpResult r = solve_qp(qp);
    const auto oracle = quadloco::testing::brute_force_qp(qp);
    if (!r.ok() || !oracle) {
      ++missing;
      continue;
    }
    worst = std::max(worst, (r.x - oracle->x).cwiseAbs().maxCoeff());
  }
  out.require(missing == 0 && worst <= 1e-6, "brute-force active-set max diff %.1e over 200 problems", worst);
  return out;
}

// 5. Virtual support polygon
Outcome support_polygon() {
  Outcome out;
  const GaitSchedule g = gait_preset("trot");
  const PhaseGainParams p;
  const auto hips = default_hip_offsets();
  PerLeg<Vec2> feet;
  Vec2 centroid = Vec2::Zero();
  for (int i = 0; i < kNumLegs; ++i) {
    feet[i] = hips[i].head<2>() + Vec2(0.4, -0.1);
    centroid += feet[i] / kNumLegs;
  }
  const int steps = static_cast<int>(std::llround(g.period / 1e-3));
  double worst_c = 0.0, worst_step = 0.0, phi_lo = 1.0, phi_hi = 0.0;
  Vec2 prev = support_polygon_com(0.0, g, feet, p);
  for (int k = 0; k <= steps; ++k) {
    PerLeg<double> w;
    const Vec2 c = support_polygon_com(k * 1e-3, g, feet, p, &w);
    worst_c = std::max(worst_c, (c - centroid).norm());
    worst_step = std::max(worst_step, (c - prev).norm());
    for (double x : w) phi_lo = std::min(phi_lo, x), phi_hi = std::max(phi_hi, x);
    prev = c;
  }
  out.require(worst_c <= 0.01, "max distance to foot centroid %.1e m", worst_c);
  out.require(phi_lo >= 0.0 && phi_hi <= 1.0, "phase gains in [%.3f, %.3f]", phi_lo, phi_hi);
  out.require(worst_step <= 1e-3, "max step %.1e m at 1 kHz", worst_step);
  return out;
}

// 6. Closed-loop trot
Outcome trot() {
  Outcome out;
  for (ControllerKind c : {ControllerKind::Balance, ControllerKind::Mpc}) {
    const char* name = c == ControllerKind::Balance ? "balance" : "mpc";
    const auto t0 = std::chrono::steady_clock::now();
    auto m = as_map(run_locomotion(trot_defaults(c)).metrics);
    const double rt = seconds_since(t0);
    out.require(m["height_rms_m"] <= 0.02, "%s height rms %.4f m", name, m["height_rms_m"]);
    out.require(m["velocity_rms_mps"] <= 0.15, "%s velocity rms %.3f m/s", name, m["velocity_rms_mps"]);
    out.require(rt < 30.0, "%s runtime %.1f s", name, rt);
  }
  return out;
}

// 7. Vertical hop timing physics
struct HopRun {
  trajopt::JumpSpec spec = trajopt::vertical_hop_spec(0.1, 30);
  trajopt::Problem pb;
  trajopt::TimingSolution sol;
  double runtime = 0.0;
};

const HopRun& hop() {
  static const HopRun h = [] {
    HopRun x;
    const auto t0 = std::chrono::steady_clock::now();
    x.pb = trajopt::build_problem(x.spec);
    x.sol = trajopt::solve_timing(x.pb);
    x.runtime = seconds_since(t0);
    return x;
  }();
  return h;
}

Outcome hop_physics() {
  Outcome out;
  const HopRun& h = hop();
  const int k0 = h.spec.phases[0].knots;
  Eigen::MatrixXd a(h.pb.counts.knots - k0, 3);
  Eigen::VectorXd z(a.rows());
  for (int k = k0; k < h.pb.counts.knots; ++k) {
    const double t = h.sol.knot_times[k] - h.sol.knot_times[k0];
    a.row(k - k0) << 1.0, t, t * t;
    z(k - k0) = h.sol.knots[k].p.z();
  }
  const Vec3 c = a.colPivHouseholderQr().solve(z);
  const double resid = (a * c - z).cwiseAbs().maxCoeff();
  const double t_f = h.sol.T[1], v_pred = kGravity * t_f / 2.0;
  out.require(std::abs(c(1) - v_pred) <= 0.02 * v_pred, "takeoff v_z %.4f vs g T_f / 2 = %.4f m/s", c(1), v_pred);
  out.require(resid <= 1e-3, "flight parabola residual %.1e m", resid);
  const double viol = checks::check_solution(h.spec, h.sol).max();
  out.require(viol <= 1e-4, "independent checker max violation %.1e", viol);
  const double total = h.sol.total_time();
  out.require(total >= h.spec.T_min - 1e-4 && total <= h.spec.T_max + 1e-4, "sum T %.4f s in [%.2f, %.2f]", total,
              h.spec.T_min, h.spec.T_max);
  out.require(h.runtime < 60.0, "T = (%.4f, %.4f) s, runtime %.1f s", h.sol.T[0], h.sol.T[1], h.runtime);
  return out;
}

// 8. 90 degree spinning jump
Outcome spin() {
  Outcome out;
  const trajopt::JumpSpec s = trajopt::spin_jump_spec();
  const trajopt::Problem pb = trajopt::build_problem(s);
  const trajopt::TimingSolution sol = trajopt::solve_timing(pb);
  const double viol = checks::check_solution(s, sol).max();
  out.require(viol <= 1e-4, "max violation %.1e", viol);
  out.require(sol.total_time() >= 0.5 - 1e-4 && sol.total_time() <= 1.5 + 1e-4, "sum T %.4f s in [0.5, 1.5]",
              sol.total_time());
  const double err = so3::rotation_angle(s.Rg.transpose() * so3::project_to_so3(sol.knots.back().R));
  out.require(err <= 1e-3, "final rotation error %.1e rad", err);
  out.require(true, "T = (%.1f, %.1f) x10 ms (published hardware run: 56, 31)", 100 * sol.T[0], 100 * sol.T[1]);
  return out;
}

// 9. SO(3) kernel
Outcome so3_kernel() {
  Outcome out;
  double worst_ratio = 0.0;
  const Vec3 axes[] = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 1, 1).normalized(),
                       Vec3(-1, 2, 0.5).normalized()};
  for (int i = 1; i <= 100; ++i) {
    const double th = 0.01 * i;
    for (const Vec3& ax : axes) {
      const double e = (so3::exp_taylor4(Vec3(ax * th)) - so3::exp_exact(Vec3(ax * th))).norm();
      worst_ratio = std::max(worst_ratio, e / (std::pow(th, 5) / 60.0));
    }
  }
  out.require(worst_ratio <= 1.0, "max error / (theta^5 / 60) = %.3f", worst_ratio);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0), ang(0.0, std::numbers::pi - 0.01);
  double worst = 0.0;
  for (int k = 0; k < 5000; ++k) {
    Vec3 ax(u(rng), u(rng), u(rng));
    if (ax.norm() < 1e-3) continue;
    const Vec3 v = ax.normalized() * ang(rng);
    worst = std::max(worst, (so3::log_map(so3::exp_exact(v)) - v).norm());
  }
  const Vec3 edge = Vec3(1, -2, 1).normalized() * (std::numbers::pi - 0.01);
  worst = std::max(worst, (so3::log_map(so3::exp_exact(edge)) - edge).norm());
  out.require(worst <= 1e-9, "log(exp(v)) round trip %.1e", worst);
  return out;
}

// 10. Jump tracking in simulation
Outcome jump_tracking() {
  Outcome out;
  const HopRun& h = hop();
  JumpSimOptions o;
  o.spec = h.spec;
  const auto t0 = std::chrono::steady_clock::now();
  auto m = as_map(run_jump_tracking(o, h.pb, h.sol).metrics);
  const double rt = seconds_since(t0);
  out.require(m["final_orientation_error_deg"] <= 5.0, "orientation error %.3f deg", m["final_orientation_error_deg"]);
  out.require(m["final_height_error_m"] <= 0.03, "height error %.4f m", m["final_height_error_m"]);
  out.require(m["landing_switch_time_s"] >= m["posing_time_s"], "landing switch at %.3f s (T_posing %.3f s)",
              m["landing_switch_time_s"], m["posing_time_s"]);
  out.require(rt < 30.0, "runtime %.1f s", rt);
  return out;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"orientation filter de-drift", orientation_filter},
      {"KF de-drift while standing", kf_stand},
      {"ground plane fit", plane_fit},
      {"balance QP", balance},
      {"virtual support polygon", support_polygon},
      {"closed-loop 1 m/s trot", trot},
      {"vertical hop timing physics", hop_physics},
      {"90 deg spinning jump", spin},
      {"SO(3) kernel", so3_kernel},
      {"jump tracking", jump_tracking},
  };
  int failed = 0, i = 0;
  for (const auto& [name, fn] : criteria) {
    ++i;
    Outcome r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    failed += !r.pass;
    std::printf("%s %2d %s: %s\n", r.pass ? "PASS" : "FAIL", i, name, r.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", 10 - failed, 10);
  return failed ? 1 : 0;
}
