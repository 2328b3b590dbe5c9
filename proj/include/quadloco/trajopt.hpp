#pragma once

// Contact-timing optimization over single-rigid-body dynamics with rotation
// matrix states.
//
// Transcription. Phase i has N_i forward-Euler intervals of length
// h_i = T_i / N_i. Knots are numbered k = 0..K with K = sum N_i; interval k
// joins knot k to knot k + 1 and carries the foot forces f_k of the legs in
// stance during its phase.
//
// Decision vector, in order:
//   knot k:     p (3), pdot (3), Omega (3), R (9, column major)   18 (K + 1)
//   interval k: f for each stance leg of its phase                3 sum_k n_stance(k)
//   phase i:    T_i                                               n_phases
//
// Equality constraints:
//   per interval: position (3), translational (3), rotational (3) and
//                 rotation-manifold (9) defects                   18 K
//   boundary:     p_0, pdot_0, Omega_0, R_0, Omega_1 = Omega_0, p_K, R_K
//                                                                 33
// Inequality constraints:
//   per stance interval leg: friction pyramid (4), f_z bounds (2)
//   per contact knot: CoM box (6), per contact knot and stance leg: foot sphere (1)
//   landing knot (last phase in flight): foot sphere per leg (1)
//   total duration: sum T_i in [T_min, T_max] (2)
// Per-phase duration bounds are enforced by projection.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <unsupported/Eigen/AutoDiff>

#include "quadloco/common.hpp"
#include "quadloco/so3.hpp"
#include "quadloco/srbd.hpp"

namespace quadloco::trajopt {

struct PhaseSpec {
  PerLeg<bool> stance{true, true, true, true};
  int knots = 30;  // N_i, number of intervals
  double t_min = 0.05;
  double t_max = std::numeric_limits<double>::infinity();
};

struct CostWeights {
  double eps_omega = 1.0;
  double eps_f = 1e-4;
  double eps_R = 10.0;
};

struct JumpSpec {
  std::string name = "jump";
  std::vector<PhaseSpec> phases;
  Mat3 R0 = Mat3::Identity();
  Vec3 p0 = Vec3(0, 0, 0.5);
  PerLeg<Vec3> feet0;  // world
  Mat3 Rg = Mat3::Identity();
  Vec3 pg = Vec3(0, 0, 0.5);
  PerLeg<Vec3> feet_g;  // world
  double T_min = 0.5;
  double T_max = 1.5;
  PerLeg<Vec3> sphere_center;  // body frame
  double sphere_radius = 0.15;
  FrictionSpec friction;
  Vec3 box_min = Vec3(-0.1, -0.1, 0.3);  // CoM box during contact, world
  Vec3 box_max = Vec3(0.1, 0.1, 0.5);
  CostWeights weights;
  BodyModel model;
};

inline void validate(const JumpSpec& s) {
  if (s.phases.empty()) throw Error(ErrorCode::SpecError, "jump spec has no phases");
  if (!(s.T_min < s.T_max)) throw Error(ErrorCode::SpecError, "T_min must be below T_max");
  if (!(s.sphere_radius > 0.0)) throw Error(ErrorCode::SpecError, "foot sphere radius must be positive");
  bool any_contact = false;
  for (const auto& ph : s.phases) {
    if (ph.knots < 2) throw Error(ErrorCode::SpecError, "each phase needs N_i >= 2");
    if (!(ph.t_min > 0.0 && ph.t_min <= ph.t_max)) throw Error(ErrorCode::SpecError, "bad phase duration bounds");
    for (bool c : ph.stance) any_contact = any_contact || c;
  }
  if (!any_contact) throw Error(ErrorCode::SpecError, "contact sequence has no stance leg");
  if (!s.phases.front().stance[FR] && !s.phases.front().stance[FL] && !s.phases.front().stance[BR] &&
      !s.phases.front().stance[BL]) {
    throw Error(ErrorCode::SpecError, "first phase must be a contact phase");
  }
  double tmin = 0.0;
  for (const auto& ph : s.phases) tmin += ph.t_min;
  if (tmin > s.T_max) throw Error(ErrorCode::SpecError, "phase minimum durations exceed T_max");
  for (int i = 0; i < 3; ++i) {
    if (s.box_min(i) > s.box_max(i)) throw Error(ErrorCode::SpecError, "CoM box is empty");
  }
}

// ---------------------------------------------------------------------------
// Discrete dynamics and cost terms

namespace detail {

template <class T>
using V3 = Eigen::Matrix<T, 3, 1>;
template <class T>
using M3 = Eigen::Matrix<T, 3, 3>;
template <class T>
using VX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Translational and rotational forward-Euler defects.
template <class T>
Eigen::Matrix<T, 6, 1> srbd_defect(const V3<T>& p, const V3<T>& v, const V3<T>& w, const M3<T>& R,
                                    const V3<T>& v1, const V3<T>& w1, const std::vector<V3<T>>& f,
                                    const std::vector<Vec3>& feet, const T& h, const BodyModel& m) {
  V3<T> force = V3<T>::Zero(), torque = V3<T>::Zero();
  for (std::size_t i = 0; i < f.size(); ++i) {
    force += f[i];
    const V3<T> lever = p - feet[i].template cast<T>();
    torque += f[i].cross(lever);
  }
  const Mat3 inv_i = m.inertia.inverse();
  const V3<T> vd = force / T(m.mass) + m.gravity.template cast<T>();
  const M3<T> I = m.inertia.template cast<T>();
  const V3<T> wd = inv_i.template cast<T>() * (R.transpose() * torque - w.cross(I * w));
  Eigen::Matrix<T, 6, 1> d;
  d.template head<3>() = v + h * vd - v1;
  d.template tail<3>() = w + h * wd - w1;
  return d;
}

/// e_R = 1/2 vee(R_ref^T R - R^T R_ref)
template <class T>
V3<T> rotation_error_vee(const M3<T>& R, const Mat3& R_ref) {
  const M3<T> a = R_ref.transpose().template cast<T>() * R;
  const M3<T> s = (a - a.transpose()) * T(0.5);
  return V3<T>(s(2, 1), s(0, 2), s(1, 0));
}

}  // namespace detail

/// Stacked [translational; rotational] forward-Euler defect
///   pdot_k + h (sum f / m + g) - pdot_{k+1}
///   Omega_k + h I^-1 (R_k^T sum f x (p_k - p_f) - Omega_k x I Omega_k) - Omega_{k+1}
inline Eigen::Matrix<double, 6, 1> srbd_residual(const SrbdState& xk, const SrbdState& xk1, const Vec12& f, const PerLeg<Vec3>& feet,
                          double h, const BodyModel& m) {
  std::vector<Vec3> fs, ps;
  for (int i = 0; i < kNumLegs; ++i) {
    fs.push_back(f.segment<3>(3 * i));
    ps.push_back(feet[i]);
  }
  return detail::srbd_defect<double>(xk.p, xk.v, xk.Omega, xk.R, xk1.v, xk1.Omega, fs, ps, h, m);
}

/// p_k + h pdot_k - p_{k+1}
inline Vec3 position_defect(const SrbdState& xk, const SrbdState& xk1, double h) {
  return xk.p + h * xk.v - xk1.p;
}

/// R_{k+1} - R_k exp_taylor4(Omega_k h)
inline Mat3 rotation_defect(const Mat3& Rk, const Mat3& Rk1, const Vec3& Omega_k, double h) {
  return Rk1 - Rk * so3::exp_taylor4(Vec3(Omega_k * h));
}

inline Vec3 rotation_error_vee(const Mat3& R, const Mat3& R_ref) { return detail::rotation_error_vee<double>(R, R_ref); }

/// sum_k eps_Omega |Omega_k|^2 + eps_R |e_R,k|^2 over knots plus eps_f |f_k|^2 over intervals.
inline double cost(const std::vector<SrbdState>& knots, const std::vector<Vec12>& forces,
                   const std::vector<Mat3>& R_ref, const CostWeights& w) {
  double j = 0.0;
  for (std::size_t k = 0; k < knots.size(); ++k) {
    j += w.eps_omega * knots[k].Omega.squaredNorm();
    j += w.eps_R * rotation_error_vee(knots[k].R, R_ref[k]).squaredNorm();
  }
  for (const auto& f : forces) j += w.eps_f * f.squaredNorm();
  return j;
}

/// Reference rotations: geodesic interpolation from R0 to Rg over the knots.
inline std::vector<Mat3> reference_rotations(const Mat3& R0, const Mat3& Rg, int knots) {
  std::vector<Mat3> out;
  for (int k = 0; k < knots; ++k) out.push_back(so3::interp_rotation(R0, Rg, static_cast<double>(k) / (knots - 1)));
  return out;
}

// ---------------------------------------------------------------------------
// Problem layout

struct ProblemCounts {
  int knots = 0;      // K + 1
  int intervals = 0;  // K
  int state_vars = 0;
  int force_vars = 0;
  int duration_vars = 0;
  int vars = 0;
  int eq = 0;
  int ineq = 0;
};

enum class BlockKind { Cost, Eq, Ineq };

using ADVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 64, 1>;
using AD = Eigen::AutoDiffScalar<ADVec>;
using ADX = Eigen::Matrix<AD, Eigen::Dynamic, 1>;

struct Block {
  BlockKind kind;
  std::vector<int> vars;
  int rows = 0;
  std::string tag;
  std::function<ADX(const ADX&)> fn;
};

struct Problem {
  JumpSpec spec;
  ProblemCounts counts;
  std::vector<int> phase_of_interval;
  std::vector<int> phase_start;  // first knot of each phase (size n_phases + 1)
  std::vector<int> force_offset;  // per interval, -1 when in flight
  std::vector<std::vector<int>> interval_legs;
  std::vector<Mat3> R_ref;
  std::vector<Block> blocks;

  int knot_offset(int k) const { return 18 * k; }
  int duration_offset(int i) const { return counts.state_vars + counts.force_vars + i; }
  /// Foot positions used for contact at a knot in phase i: the initial stance
  /// until the first flight, the goal stance afterwards.
  const PerLeg<Vec3>& feet_for_phase(int i) const {
    for (int j = 0; j < i; ++j) {
      bool flight = true;
      for (bool c : spec.phases[j].stance) flight = flight && !c;
      if (flight) return spec.feet_g;
    }
    return spec.feet0;
  }
  bool is_contact_phase(int i) const {
    for (bool c : spec.phases[i].stance) {
      if (c) return true;
    }
    return false;
  }
};

namespace detail {

struct KnotView {
  V3<AD> p, v, w;
  M3<AD> R;
};

inline KnotView knot_view(const ADX& x, int off) {
  KnotView k;
  k.p = x.segment<3>(off);
  k.v = x.segment<3>(off + 3);
  k.w = x.segment<3>(off + 6);
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < 3; ++r) k.R(r, c) = x(off + 9 + 3 * c + r);
  }
  return k;
}

inline std::vector<int> range(int off, int n) {
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) v[i] = off + i;
  return v;
}

inline std::vector<int> concat(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  out.reserve(a.size() + b.size());
  for (int x : a) out.push_back(x);
  for (int x : b) out.push_back(x);
  return out;
}

}  // namespace detail

Problem build_problem(const JumpSpec& spec);

// ---------------------------------------------------------------------------
// Solution

struct TimingSolution {
  std::vector<double> T;
  std::vector<SrbdState> knots;
  std::vector<Vec12> forces;        // per interval, world frame, zero for swing legs
  std::vector<Vec3> omega_dot;      // derived, per interval
  std::vector<double> knot_times;
  double cost = 0.0;
  double max_eq_violation = 0.0;    // defect infinity norm
  double max_ineq_violation = 0.0;
  double kkt_residual = 0.0;
  double max_orthonormality_defect = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double solve_time_s = 0.0;
  double total_time() const {
    double s = 0.0;
    for (double t : T) s += t;
    return s;
  }
};

struct SolveOptions {
  double tol = 1e-4;
  int max_outer = 40;
  int max_inner = 60;
  double rho0 = 1e4;
  double rho_max = 1e9;
  bool verbose = false;  // per outer iteration progress on stderr
};

/// Decision vector <-> solution conversions.
inline TimingSolution unpack(const Problem& pb, const Eigen::VectorXd& z) {
  TimingSolution s;
  const int np = static_cast<int>(pb.spec.phases.size());
  for (int i = 0; i < np; ++i) s.T.push_back(z(pb.duration_offset(i)));
  for (int k = 0; k < pb.counts.knots; ++k) {
    const int o = pb.knot_offset(k);
    SrbdState x;
    x.p = z.segment<3>(o);
    x.v = z.segment<3>(o + 3);
    x.Omega = z.segment<3>(o + 6);
    x.R = Eigen::Map<const Mat3>(z.data() + o + 9);
    s.knots.push_back(x);
    s.max_orthonormality_defect = std::max(s.max_orthonormality_defect, so3::orthonormality_defect(x.R));
  }
  double t = 0.0;
  s.knot_times.push_back(0.0);
  for (int k = 0; k < pb.counts.intervals; ++k) {
    Vec12 f = Vec12::Zero();
    const auto& legs = pb.interval_legs[k];
    for (std::size_t j = 0; j < legs.size(); ++j) f.segment<3>(3 * legs[j]) = z.segment<3>(pb.force_offset[k] + 3 * j);
    s.forces.push_back(f);
    const int ph = pb.phase_of_interval[k];
    const double h = s.T[ph] / pb.spec.phases[ph].knots;
    s.omega_dot.push_back((s.knots[k + 1].Omega - s.knots[k].Omega) / h);
    t += h;
    s.knot_times.push_back(t);
  }
  s.cost = cost(s.knots, s.forces, pb.R_ref, pb.spec.weights);
  return s;
}

/// Initial guess: geodesic rotations, linear positions, gravity-support forces,
/// T_i = (T_min + T_max) / (2 n_p) clamped to the phase bounds.
inline Eigen::VectorXd initial_guess(const Problem& pb) {
  const auto& sp = pb.spec;
  const int np = static_cast<int>(sp.phases.size());
  Eigen::VectorXd z = Eigen::VectorXd::Zero(pb.counts.vars);
  const int K = pb.counts.intervals;
  for (int k = 0; k <= K; ++k) {
    const double s = static_cast<double>(k) / K;
    const int o = pb.knot_offset(k);
    z.segment<3>(o) = (1 - s) * sp.p0 + s * sp.pg;
    Eigen::Map<Mat3>(z.data() + o + 9) = pb.R_ref[k];
  }
  for (int k = 0; k < K; ++k) {
    const auto& legs = pb.interval_legs[k];
    for (std::size_t j = 0; j < legs.size(); ++j) {
      z(pb.force_offset[k] + 3 * j + 2) = sp.model.mass * kGravity / legs.size();
    }
  }
  for (int i = 0; i < np; ++i) {
    z(pb.duration_offset(i)) = std::clamp((sp.T_min + sp.T_max) / (2.0 * np), sp.phases[i].t_min, sp.phases[i].t_max);
  }
  return z;
}

namespace detail {

struct Evaluation {
  Eigen::VectorXd r;  // stacked block residuals (raw)
  std::vector<Eigen::Triplet<double>> jac;
};

inline Evaluation evaluate(const Problem& pb, const Eigen::VectorXd& z, bool with_jac) {
  Evaluation e;
  int rows = 0;
  for (const auto& b : pb.blocks) rows += b.rows;
  e.r.resize(rows);
  int row = 0;
  for (const auto& b : pb.blocks) {
    const int nv = static_cast<int>(b.vars.size());
    ADX x(nv);
    for (int i = 0; i < nv; ++i) {
      x(i).value() = z(b.vars[i]);
      if (with_jac) {
        x(i).derivatives() = ADVec::Unit(nv, i);
      } else {
        x(i).derivatives() = ADVec::Zero(0);
      }
    }
    const ADX r = b.fn(x);
    for (int j = 0; j < b.rows; ++j) {
      e.r(row + j) = r(j).value();
      if (!with_jac) continue;
      const auto& d = r(j).derivatives();
      for (int i = 0; i < d.size(); ++i) {
        if (d(i) != 0.0) e.jac.emplace_back(row + j, b.vars[i], d(i));
      }
    }
    row += b.rows;
  }
  return e;
}

struct Violation {
  double eq = 0.0;
  double ineq = 0.0;
  std::string worst_tag;
};

inline Violation violation(const Problem& pb, const Eigen::VectorXd& r) {
  Violation v;
  int row = 0;
  double worst = 0.0;
  for (const auto& b : pb.blocks) {
    for (int j = 0; j < b.rows; ++j) {
      const double x = r(row + j);
      double viol = 0.0;
      if (b.kind == BlockKind::Eq) {
        viol = std::abs(x);
        v.eq = std::max(v.eq, viol);
      } else if (b.kind == BlockKind::Ineq) {
        viol = std::max(0.0, x);
        v.ineq = std::max(v.ineq, viol);
      }
      if (viol > worst) {
        worst = viol;
        v.worst_tag = b.tag;
      }
    }
    row += b.rows;
  }
  return v;
}

inline void project_durations(const Problem& pb, Eigen::VectorXd& z) {
  for (std::size_t i = 0; i < pb.spec.phases.size(); ++i) {
    const int o = pb.duration_offset(static_cast<int>(i));
    z(o) = std::clamp(z(o), pb.spec.phases[i].t_min, pb.spec.phases[i].t_max);
  }
}

}  // namespace detail

/// Augmented Lagrangian over the equality and inequality constraints. Each
/// subproblem is a nonlinear least-squares problem (the cost is a sum of
/// squares) solved by projected Levenberg-Marquardt on sparse normal
/// equations.
TimingSolution solve_timing(const Problem& pb, Eigen::VectorXd z, const SolveOptions& opt = {});

inline TimingSolution solve_timing(const Problem& pb, const SolveOptions& opt = {}) {
  return solve_timing(pb, initial_guess(pb), opt);
}

// ---------------------------------------------------------------------------
// Reference export

struct ReferenceSample {
  double t = 0.0;
  Vec3 p, v, Omega;
  Mat3 R;
  Vec12 f;
  PerLeg<bool> stance;
};

/// Samples at t = k dt (the last one clamped to sum T_i): piecewise-linear p,
/// pdot, Omega and forces, geodesic R between knots (knot rotations projected
/// onto SO(3)).
inline std::vector<ReferenceSample> export_reference(const Problem& pb, const TimingSolution& sol, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::Config, "export dt must be positive");
  const double total = sol.knot_times.back();
  const int count = static_cast<int>(std::llround(total / dt)) + 1;
  std::vector<ReferenceSample> out;
  out.reserve(count);
  std::size_t seg = 0;
  const int K = pb.counts.intervals;
  for (int j = 0; j < count; ++j) {
    const double t = j == count - 1 ? total : std::min(j * dt, total);
    while (seg + 1 < static_cast<std::size_t>(K) && t >= sol.knot_times[seg + 1]) ++seg;
    const double t0 = sol.knot_times[seg], t1 = sol.knot_times[seg + 1];
    const double s = t1 > t0 ? std::clamp((t - t0) / (t1 - t0), 0.0, 1.0) : 0.0;
    const SrbdState& a = sol.knots[seg];
    const SrbdState& b = sol.knots[seg + 1];
    ReferenceSample r;
    r.t = t;
    r.p = (1 - s) * a.p + s * b.p;
    r.v = (1 - s) * a.v + s * b.v;
    r.Omega = (1 - s) * a.Omega + s * b.Omega;
    const Mat3 ra = so3::project_to_so3(a.R), rb = so3::project_to_so3(b.R);
    r.R = s == 0.0 ? ra : (s == 1.0 ? rb : so3::interp_rotation(ra, rb, s));
    r.f = sol.forces[seg];
    const int ph = pb.phase_of_interval[seg];
    r.stance = pb.spec.phases[ph].stance;
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Preset specs

/// Nominal standing stance: feet under the hips at height z0 below the CoM.
inline void set_nominal_stance(JumpSpec& s, double z0) {
  const auto hips = default_hip_offsets();
  for (int i = 0; i < kNumLegs; ++i) {
    s.sphere_center[i] = Vec3(hips[i].x(), hips[i].y(), -z0);
    s.feet0[i] = s.p0 + s.R0 * s.sphere_center[i];
    s.feet_g[i] = s.pg + s.Rg * s.sphere_center[i];
  }
}

/// Four-leg push-off followed by a flight reaching apex_height above the
/// takeoff point; lands where it started.
inline JumpSpec vertical_hop_spec(double apex_height = 0.1, int knots = 30) {
  JumpSpec s;
  s.name = "vertical_hop";
  const double z0 = 0.5;
  s.p0 = s.pg = Vec3(0, 0, z0);
  PhaseSpec stance, flight;
  stance.knots = flight.knots = knots;
  flight.stance = {false, false, false, false};
  flight.t_min = 2.0 * std::sqrt(2.0 * apex_height / kGravity);
  s.phases = {stance, flight};
  s.T_min = 0.4;
  s.T_max = 1.5;
  s.box_min = Vec3(-0.05, -0.05, z0 - 0.2);
  s.box_max = Vec3(0.05, 0.05, z0);
  set_nominal_stance(s, z0);
  return s;
}

/// Four-leg contact then flight, landing rotated by 90 degrees in yaw.
inline JumpSpec spin_jump_spec(int knots = 30) {
  JumpSpec s;
  s.name = "spin_90";
  const double z0 = 0.5;
  s.p0 = s.pg = Vec3(0, 0, z0);
  s.Rg = yaw_rotation(std::numbers::pi / 2);
  PhaseSpec stance, flight;
  stance.knots = flight.knots = knots;
  flight.stance = {false, false, false, false};
  s.phases = {stance, flight};
  s.T_min = 0.5;
  s.T_max = 1.5;
  s.box_min = Vec3(-0.05, -0.05, z0 - 0.2);
  s.box_max = Vec3(0.05, 0.05, z0);
  set_nominal_stance(s, z0);
  return s;
}

}  // namespace quadloco::trajopt
