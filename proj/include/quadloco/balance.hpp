#pragma once

// QP balance controller: PD on the CoM and orientation gives a desired
// wrench, which is distributed to the stance feet under friction and normal
// force bounds. Swing feet carry exactly zero force, which is also how the
// landing controller handles partial contact.

#include <array>
#include <cmath>

#include "quadloco/common.hpp"
#include "quadloco/qp.hpp"
#include "quadloco/so3.hpp"

namespace quadloco {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6x12 = Eigen::Matrix<double, 6, 12>;

struct BalanceGains {
  Mat3 K_pp = Vec3(60, 60, 120).asDiagonal();
  Mat3 K_dp = Vec3(15, 15, 25).asDiagonal();
  Mat3 K_pw = Vec3(150, 150, 100).asDiagonal();
  Mat3 K_dw = Vec3(25, 25, 20).asDiagonal();
  Vec6 S = (Vec6() << 1, 1, 1, 20, 20, 20).finished();  // diagonal of S
  double alpha = 1e-5;
  double beta = 1e-4;
};

struct BodyTarget {
  Vec3 p = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Vec3 v = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
  Vec3 a = Vec3::Zero();      // feedforward CoM acceleration
};

struct WrenchCommand {
  Vec3 acc;    // desired CoM acceleration
  Vec3 alpha;  // desired angular acceleration, world frame
};

/// p_dd = K_pp (p_d - p) + K_dp (v_d - v) + a_ff
/// w_d  = K_pw log(R_d R^T) + K_dw (w_d - w)
inline WrenchCommand pd_wrench(const BodyState& s, const BodyTarget& d, const BalanceGains& g) {
  const auto lg = so3::log_map_flagged(d.R * s.R.transpose());
  if (lg.near_pi) throw Error(ErrorCode::NearPi, "orientation error near pi");
  return {g.K_pp * (d.p - s.p) + g.K_dp * (d.v - s.v) + d.a,
          g.K_pw * lg.value + g.K_dw * (d.omega - s.omega)};
}

struct ForceModel {
  Mat6x12 A;
  Vec6 b;
};

/// A F = b with A = [I ... I; [p_i - p_c]x ...] and
/// b = [m (p_dd - g_vec); I_world w_d]; I_world = R I_body R^T.
inline ForceModel build_force_model(const Vec3& p_c, const PerLeg<Vec3>& feet, const BodyModel& model,
                                    const WrenchCommand& cmd, const Mat3& R = Mat3::Identity()) {
  ForceModel f;
  for (int i = 0; i < kNumLegs; ++i) {
    f.A.block<3, 3>(0, 3 * i).setIdentity();
    f.A.block<3, 3>(3, 3 * i) = so3::hat(Vec3(feet[i] - p_c));
  }
  f.b.head<3>() = model.mass * (cmd.acc - model.gravity);
  f.b.tail<3>() = R * model.inertia * R.transpose() * cmd.alpha;
  return f;
}

struct BalanceResult {
  Vec12 F = Vec12::Zero();
  QpStatus status = QpStatus::Optimal;
  double b_scale = 1.0;  // < 1 when the fallback shrank b toward gravity-only
  bool fallback = false;
};

/// Friction pyramid and normal bounds for stance feet, expressed on the
/// reduced variable vector (stance feet only, in leg order).
inline void append_friction_rows(int col, const FrictionSpec& fr, std::vector<Eigen::RowVectorXd>& rows,
                                 std::vector<double>& rhs, int n) {
  auto row = [&](double cx, double cy, double cz, double r) {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(n);
    v(col) = cx;
    v(col + 1) = cy;
    v(col + 2) = cz;
    rows.push_back(v);
    rhs.push_back(r);
  };
  row(1, 0, -fr.mu, 0);
  row(-1, 0, -fr.mu, 0);
  row(0, 1, -fr.mu, 0);
  row(0, -1, -fr.mu, 0);
  row(0, 0, -1, -fr.f_min);
  row(0, 0, 1, fr.f_max);
}

/// min (AF - b)^T S (AF - b) + alpha |F|^2 + beta |F - F_prev|^2 over stance
/// forces; swing forces are eliminated and returned as exact zeros.
inline BalanceResult balance_qp(const Mat6x12& A, const Vec6& b, const Vec12& F_prev, const BalanceGains& g,
                                const FrictionSpec& fr, const PerLeg<bool>& stance,
                                const Vec6& b_grav = Vec6::Zero()) {
  std::array<int, 4> legs{};
  int ns = 0;
  for (int i = 0; i < kNumLegs; ++i) {
    if (stance[i]) legs[ns++] = i;
  }
  BalanceResult out;
  if (ns == 0) return out;
  const int n = 3 * ns;
  MatX As(6, n);
  VecX prev(n);
  for (int k = 0; k < ns; ++k) {
    As.middleCols<3>(3 * k) = A.middleCols<3>(3 * legs[k]);
    prev.segment<3>(3 * k) = F_prev.segment<3>(3 * legs[k]);
  }
  const Mat6 S = g.S.asDiagonal();
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  for (int k = 0; k < ns; ++k) append_friction_rows(3 * k, fr, rows, rhs, n);
  QpProblem qp;
  qp.H = 2.0 * (As.transpose() * S * As + (g.alpha + g.beta) * MatX::Identity(n, n));
  qp.C_ineq.resize(static_cast<int>(rows.size()), n);
  qp.d.resize(static_cast<int>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    qp.C_ineq.row(static_cast<int>(r)) = rows[r];
    qp.d(static_cast<int>(r)) = rhs[r];
  }
  qp.C_eq.resize(0, n);
  qp.e.resize(0);

  // Fallback: shrink the commanded wrench toward the gravity-only wrench.
  QpResult r;
  double scale = 1.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    const Vec6 bs = scale * b + (1.0 - scale) * b_grav;
    qp.g = -2.0 * (As.transpose() * S * bs + g.beta * prev);
    r = solve_qp(qp);
    if (r.ok()) break;
    scale *= 0.5;
  }
  out.status = r.status;
  out.b_scale = scale;
  if (!r.ok()) {
    // Saturate the previous solution into the feasible set.
    out.fallback = true;
    for (int k = 0; k < ns; ++k) {
      Vec3 f = prev.segment<3>(3 * k);
      f.z() = std::clamp(f.z(), fr.f_min, fr.f_max);
      f.x() = std::clamp(f.x(), -fr.mu * f.z(), fr.mu * f.z());
      f.y() = std::clamp(f.y(), -fr.mu * f.z(), fr.mu * f.z());
      out.F.segment<3>(3 * legs[k]) = f;
    }
    return out;
  }
  for (int k = 0; k < ns; ++k) out.F.segment<3>(3 * legs[k]) = r.x.segment<3>(3 * k);
  return out;
}

/// True once t >= T_posing and any foot force reaches delta.
inline bool landing_switch(const Eigen::Vector4d& contact_force, double t, double t_posing, double delta = 20.0) {
  return t >= t_posing && (contact_force.array() >= delta).any();
}

/// True once t >= T_posing and any |knee velocity| reaches the threshold.
inline bool knee_impact_detect(double t, double t_posing, const Eigen::Vector4d& knee_vel, double threshold = 5.0) {
  return t >= t_posing && (knee_vel.array().abs() >= threshold).any();
}

/// Stateful wrapper holding F_prev between ticks.
class BalanceController {
 public:
  BalanceController() = default;
  BalanceController(const BodyModel& model, const BalanceGains& gains, const FrictionSpec& fr)
      : model_(model), gains_(gains), friction_(fr) {}

  BalanceResult step(const BodyState& s, const BodyTarget& d, const PerLeg<Vec3>& feet,
                     const PerLeg<bool>& stance) {
    const WrenchCommand cmd = pd_wrench(s, d, gains_);
    const ForceModel fm = build_force_model(s.p, feet, model_, cmd, s.R);
    Vec6 b_grav = Vec6::Zero();
    b_grav.head<3>() = -model_.mass * model_.gravity;
    BalanceResult r = balance_qp(fm.A, fm.b, F_prev_, gains_, friction_, stance, b_grav);
    F_prev_ = r.F;
    return r;
  }

  void reset(const Vec12& f = Vec12::Zero()) { F_prev_ = f; }
  const Vec12& previous() const { return F_prev_; }
  const BalanceGains& gains() const { return gains_; }
  BalanceGains& gains() { return gains_; }

 private:
  BodyModel model_;
  BalanceGains gains_;
  FrictionSpec friction_;
  Vec12 F_prev_ = Vec12::Zero();
};

}  // namespace quadloco
