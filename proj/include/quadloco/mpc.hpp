#pragma once

// Convex MPC over the linearized single-rigid-body model.
//
// State x = [p; theta; v; omega] (12), theta = roll/pitch/yaw, omega in the
// world frame. Input u = stacked ground reaction forces (12). Roll and pitch
// are assumed small and the yaw is frozen at op_yaw for the whole horizon.
// Translational blocks are discretized exactly (ZOH), angular blocks with
// forward Euler.

#include <vector>

#include "quadloco/balance.hpp"
#include "quadloco/common.hpp"
#include "quadloco/qp.hpp"
#include "quadloco/so3.hpp"

namespace quadloco {

using Vec12d = Eigen::Matrix<double, 12, 1>;
using Mat12d = Eigen::Matrix<double, 12, 12>;

namespace mpc_index {
inline constexpr int P = 0, TH = 3, V = 6, W = 9;
}

struct LinearStep {
  Mat12d A;
  Mat12d B;
  Vec12d c;
};

/// One discrete step. r = foot positions relative to the CoM at this step.
inline LinearStep linearize_srbd(double op_yaw, const PerLeg<Vec3>& r, const PerLeg<bool>& stance,
                                 const BodyModel& model, double dt) {
  using namespace mpc_index;
  const Mat3 rz = yaw_rotation(op_yaw);
  const Mat3 inv_inertia = (rz * model.inertia * rz.transpose()).inverse();
  const Mat3 i3 = Mat3::Identity();
  LinearStep s;
  s.A.setIdentity();
  s.A.block<3, 3>(P, V) = dt * i3;
  s.A.block<3, 3>(TH, W) = dt * rz.transpose();
  s.B.setZero();
  for (int i = 0; i < kNumLegs; ++i) {
    if (!stance[i]) continue;
    s.B.block<3, 3>(P, 3 * i) = 0.5 * dt * dt / model.mass * i3;
    s.B.block<3, 3>(V, 3 * i) = dt / model.mass * i3;
    s.B.block<3, 3>(W, 3 * i) = dt * inv_inertia * so3::hat(r[i]);
  }
  s.c.setZero();
  s.c.segment<3>(P) = 0.5 * dt * dt * model.gravity;
  s.c.segment<3>(V) = dt * model.gravity;
  return s;
}

inline Vec12d mpc_state(const BodyState& b) {
  Vec12d x;
  x << b.p, so3::to_rpy(b.R), b.v, b.omega;
  return x;
}

struct MpcWeights {
  Vec12d Q = (Vec12d() << 20, 20, 400, 300, 300, 50, 4, 4, 20, 1, 1, 1).finished();
  double R = 1e-5;  // per N^2
};

struct MpcConfig {
  int horizon = 10;
  double dt = 0.033;
  double op_yaw = 0.0;
  std::vector<Vec12d> Q;            // per step i = 1..k (diagonal)
  std::vector<Vec12d> R;            // per step i = 0..k-1 (diagonal)
  std::vector<Vec12d> x_ref;        // per step i = 1..k
  std::vector<PerLeg<bool>> contact;   // per step i = 0..k-1
  std::vector<PerLeg<Vec3>> feet_rel;  // foot minus CoM, per step i = 0..k-1
  BodyModel model;

  void set_uniform_weights(const MpcWeights& w) {
    Q.assign(horizon, w.Q);
    R.assign(horizon, Vec12d::Constant(w.R));
  }
};

struct MpcResult {
  std::vector<Vec12d> U;  // u_0..u_{k-1}
  std::vector<Vec12d> X;  // predicted x_1..x_k
  QpStatus status = QpStatus::Optimal;
  double cost = 0.0;
  int iterations = 0;
  bool ok() const { return status == QpStatus::Optimal; }
};

inline void validate(const MpcConfig& c) {
  const auto k = static_cast<std::size_t>(c.horizon);
  if (c.horizon < 1 || !(c.dt > 0.0)) throw Error(ErrorCode::Config, "mpc horizon and dt must be positive");
  if (c.Q.size() != k || c.R.size() != k || c.x_ref.size() != k || c.contact.size() != k ||
      c.feet_rel.size() != k) {
    throw Error(ErrorCode::Config, "mpc per-step arrays must have horizon entries");
  }
}

inline std::vector<LinearStep> mpc_steps(const MpcConfig& c) {
  std::vector<LinearStep> out;
  out.reserve(c.horizon);
  for (int i = 0; i < c.horizon; ++i) out.push_back(linearize_srbd(c.op_yaw, c.feet_rel[i], c.contact[i], c.model, c.dt));
  return out;
}

/// Linear rollout of the plan and its cost J.
inline double mpc_cost(const MpcConfig& c, const Vec12d& x0, const std::vector<Vec12d>& U,
                       std::vector<Vec12d>* X = nullptr) {
  const auto steps = mpc_steps(c);
  Vec12d x = x0;
  double j = 0.0;
  if (X) X->clear();
  for (int i = 0; i < c.horizon; ++i) {
    j += U[i].dot(c.R[i].cwiseProduct(U[i]));
    x = steps[i].A * x + steps[i].B * U[i] + steps[i].c;
    const Vec12d e = x - c.x_ref[i];
    j += e.dot(c.Q[i].cwiseProduct(e));
    if (X) X->push_back(x);
  }
  return j;
}

namespace detail {

struct MpcLayout {
  std::vector<std::vector<int>> legs;  // stance legs per step
  std::vector<int> offset;             // first variable of each step
  int n = 0;
};

inline MpcLayout mpc_layout(const MpcConfig& c) {
  MpcLayout l;
  for (int i = 0; i < c.horizon; ++i) {
    l.offset.push_back(l.n);
    l.legs.emplace_back();
    for (int j = 0; j < kNumLegs; ++j) {
      if (c.contact[i][j]) l.legs.back().push_back(j);
    }
    l.n += 3 * static_cast<int>(l.legs.back().size());
  }
  return l;
}

inline void friction_block(const MpcLayout& l, const FrictionSpec& fr, int extra_cols, MatX& C, VecX& d) {
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  const int n = l.n + extra_cols;
  for (std::size_t i = 0; i < l.legs.size(); ++i) {
    for (std::size_t k = 0; k < l.legs[i].size(); ++k) {
      append_friction_rows(l.offset[i] + 3 * static_cast<int>(k), fr, rows, rhs, n);
    }
  }
  C.resize(static_cast<int>(rows.size()), n);
  d.resize(static_cast<int>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    C.row(static_cast<int>(r)) = rows[r];
    d(static_cast<int>(r)) = rhs[r];
  }
}

inline std::vector<Vec12d> expand_forces(const MpcLayout& l, const VecX& z) {
  std::vector<Vec12d> U;
  for (std::size_t i = 0; i < l.legs.size(); ++i) {
    Vec12d u = Vec12d::Zero();
    for (std::size_t k = 0; k < l.legs[i].size(); ++k) {
      u.segment<3>(3 * l.legs[i][k]) = z.segment<3>(l.offset[i] + 3 * static_cast<int>(k));
    }
    U.push_back(u);
  }
  return U;
}

}  // namespace detail

/// Condensed QP: states eliminated through the dynamics, variables are the
/// stance-foot forces of every step.
inline MpcResult solve_mpc(const MpcConfig& c, const Vec12d& x0, const FrictionSpec& fr) {
  validate(c);
  const int k = c.horizon;
  const auto steps = mpc_steps(c);
  const auto lay = detail::mpc_layout(c);
  const int n = lay.n;

  // x_{i+1} = free_i + G_i z, with G_i (12 x n).
  std::vector<Vec12d> free(k);
  std::vector<MatX> G(k, MatX::Zero(12, n));
  Vec12d xf = x0;
  MatX gprev = MatX::Zero(12, n);
  for (int i = 0; i < k; ++i) {
    xf = steps[i].A * xf + steps[i].c;
    MatX gi = steps[i].A * gprev;
    for (std::size_t s = 0; s < lay.legs[i].size(); ++s) {
      gi.middleCols<3>(lay.offset[i] + 3 * static_cast<int>(s)) += steps[i].B.middleCols<3>(3 * lay.legs[i][s]);
    }
    free[i] = xf;
    G[i] = gi;
    gprev = gi;
  }
  QpProblem qp;
  qp.H = MatX::Zero(n, n);
  qp.g = VecX::Zero(n);
  for (int i = 0; i < k; ++i) {
    const Vec12d e = free[i] - c.x_ref[i];
    const MatX qg = c.Q[i].asDiagonal() * G[i];
    qp.H.noalias() += 2.0 * G[i].transpose() * qg;
    qp.g.noalias() += 2.0 * qg.transpose() * e;
    for (std::size_t s = 0; s < lay.legs[i].size(); ++s) {
      const int col = lay.offset[i] + 3 * static_cast<int>(s);
      qp.H.block<3, 3>(col, col) += 2.0 * Vec3(c.R[i].segment<3>(3 * lay.legs[i][s])).asDiagonal().toDenseMatrix();
    }
  }
  detail::friction_block(lay, fr, 0, qp.C_ineq, qp.d);
  qp.C_eq.resize(0, n);
  qp.e.resize(0);

  MpcResult out;
  QpResult r;
  r.x = VecX::Zero(0);
  r.status = QpStatus::Optimal;
  if (n > 0) r = solve_qp(qp, 1e-9, 5000);
  out.status = r.status;
  out.iterations = r.iterations;
  if (!r.ok()) return out;
  out.U = detail::expand_forces(lay, r.x);
  out.cost = mpc_cost(c, x0, out.U, &out.X);
  return out;
}

/// Sparse QP over [forces; x_1..x_k] with the dynamics as equalities. Slower;
/// kept as an independent formulation for cross-checking.
inline MpcResult solve_mpc_sparse(const MpcConfig& c, const Vec12d& x0, const FrictionSpec& fr) {
  validate(c);
  const int k = c.horizon;
  const auto steps = mpc_steps(c);
  const auto lay = detail::mpc_layout(c);
  const int nu = lay.n, n = nu + 12 * k;
  QpProblem qp;
  qp.H = MatX::Zero(n, n);
  qp.g = VecX::Zero(n);
  qp.C_eq = MatX::Zero(12 * k, n);
  qp.e = VecX::Zero(12 * k);
  for (int i = 0; i < k; ++i) {
    const int xi = nu + 12 * i;
    qp.H.block<12, 12>(xi, xi) = 2.0 * c.Q[i].asDiagonal().toDenseMatrix();
    qp.g.segment<12>(xi) = -2.0 * c.Q[i].cwiseProduct(c.x_ref[i]);
    // x_{i+1} - A x_i - B u_i = c_i
    qp.C_eq.block<12, 12>(12 * i, xi).setIdentity();
    if (i > 0) qp.C_eq.block<12, 12>(12 * i, xi - 12) = -steps[i].A;
    for (std::size_t s = 0; s < lay.legs[i].size(); ++s) {
      const int col = lay.offset[i] + 3 * static_cast<int>(s);
      const int leg = lay.legs[i][s];
      qp.C_eq.block<12, 3>(12 * i, col) = -steps[i].B.middleCols<3>(3 * leg);
      qp.H.block<3, 3>(col, col) = 2.0 * Vec3(c.R[i].segment<3>(3 * leg)).asDiagonal().toDenseMatrix();
    }
    qp.e.segment<12>(12 * i) = steps[i].c + (i == 0 ? Vec12d(steps[0].A * x0) : Vec12d::Zero());
  }
  detail::friction_block(lay, fr, 12 * k, qp.C_ineq, qp.d);
  const QpResult r = solve_qp(qp, 1e-10, 10000);
  MpcResult out;
  out.status = r.status;
  out.iterations = r.iterations;
  if (!r.ok()) return out;
  out.U = detail::expand_forces(lay, r.x.head(nu));
  out.cost = mpc_cost(c, x0, out.U, &out.X);
  return out;
}

/// Constant-velocity reference from the current state: xy and yaw advance
/// with the command, height, roll and pitch are held at their targets.
inline std::vector<Vec12d> mpc_reference(const Vec12d& x0, const Vec3& v_des, double yaw_rate, double z_des,
                                         int horizon, double dt) {
  using namespace mpc_index;
  std::vector<Vec12d> ref;
  for (int i = 1; i <= horizon; ++i) {
    Vec12d r = Vec12d::Zero();
    r.segment<2>(P) = x0.segment<2>(P) + v_des.head<2>() * (i * dt);
    r(P + 2) = z_des;
    r(TH + 2) = x0(TH + 2) + yaw_rate * i * dt;
    r.segment<3>(V) = Vec3(v_des.x(), v_des.y(), 0.0);
    r(W + 2) = yaw_rate;
    ref.push_back(r);
  }
  return ref;
}

}  // namespace quadloco
