#pragma once

// Dense convex QP
//
//   min  1/2 x^T H x + g^T x
//   s.t. C_ineq x <= d,   C_eq x = e
//
// solved with the Goldfarb-Idnani dual active-set method. The method starts
// from the unconstrained minimizer and adds violated constraints one at a
// time, so it needs no feasible starting point and reports infeasibility
// directly when a violated constraint cannot be reached. Each iteration
// re-solves the small projected system from a Cholesky factor of H and a QR
// factorization of the active normals.

#include <limits>
#include <vector>

#include "quadloco/common.hpp"

namespace quadloco {

struct QpProblem {
  MatX H;
  VecX g;
  MatX C_ineq;
  VecX d;
  MatX C_eq;
  VecX e;

  int num_vars() const { return static_cast<int>(g.size()); }
  int num_ineq() const { return static_cast<int>(d.size()); }
  int num_eq() const { return static_cast<int>(e.size()); }

  static QpProblem unconstrained(MatX h, VecX g) {
    QpProblem qp;
    const auto n = g.size();
    qp.H = std::move(h);
    qp.g = std::move(g);
    qp.C_ineq.resize(0, n);
    qp.d.resize(0);
    qp.C_eq.resize(0, n);
    qp.e.resize(0);
    return qp;
  }

  double objective(const VecX& x) const { return 0.5 * x.dot(H * x) + g.dot(x); }
};

enum class QpStatus { Optimal, Infeasible, MaxIter };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::MaxIter: return "MaxIter";
  }
  return "?";
}

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;         // max constraint violation
  double complementarity = 0.0;
  double dual = 0.0;           // most negative inequality multiplier, as a positive number
};

struct QpResult {
  VecX x;
  VecX lambda_ineq;  // >= 0 at optimum
  VecX lambda_eq;
  QpStatus status = QpStatus::MaxIter;
  int iterations = 0;
  double objective = 0.0;
  std::vector<int> active_set;  // inequality indices
  bool ok() const { return status == QpStatus::Optimal; }
};

inline KktResiduals kkt_residuals(const QpProblem& qp, const QpResult& r) {
  KktResiduals k;
  VecX grad = qp.H * r.x + qp.g;
  if (qp.num_ineq() > 0) grad += qp.C_ineq.transpose() * r.lambda_ineq;
  if (qp.num_eq() > 0) grad += qp.C_eq.transpose() * r.lambda_eq;
  k.stationarity = grad.cwiseAbs().maxCoeff();
  for (int i = 0; i < qp.num_ineq(); ++i) {
    const double slack = qp.C_ineq.row(i).dot(r.x) - qp.d(i);
    k.primal = std::max(k.primal, slack);
    k.complementarity = std::max(k.complementarity, std::abs(r.lambda_ineq(i) * slack));
    k.dual = std::max(k.dual, -r.lambda_ineq(i));
  }
  for (int i = 0; i < qp.num_eq(); ++i) {
    k.primal = std::max(k.primal, std::abs(qp.C_eq.row(i).dot(r.x) - qp.e(i)));
  }
  return k;
}

struct QpOptions {
  double tol = 1e-9;
  int max_iter = 1000;
  double regularization = 1e-9;
};

class QpSolver {
 public:
  explicit QpSolver(QpOptions opts = {}) : opts_(opts) {}

  QpResult solve(const QpProblem& qp) const {
    const int n = qp.num_vars();
    const int mi = qp.num_ineq();
    const int me = qp.num_eq();
    QpResult res;
    res.lambda_ineq = VecX::Zero(mi);
    res.lambda_eq = VecX::Zero(me);

    Eigen::LLT<MatX> llt(qp.H);
    bool regularize = llt.info() != Eigen::Success;
    if (!regularize && n > 0) {
      const VecX dl = llt.matrixLLT().diagonal();
      regularize = dl.minCoeff() * dl.minCoeff() < 1e-13 * dl.maxCoeff() * dl.maxCoeff();
    }
    if (regularize) llt.compute(qp.H + opts_.regularization * MatX::Identity(n, n));
    if (llt.info() != Eigen::Success) {
      res.status = QpStatus::Infeasible;
      return res;
    }
    const MatX& lfac = llt.matrixLLT();
    auto solve_l = [&](const VecX& v) -> VecX {
      return lfac.triangularView<Eigen::Lower>().solve(v);
    };
    auto solve_lt = [&](const VecX& v) -> VecX {
      return lfac.triangularView<Eigen::Lower>().transpose().solve(v);
    };

    // Constraints are handled internally as n_i^T x >= b_i (equalities with
    // both signs allowed on the multiplier). Index < me denotes an equality.
    auto normal = [&](int c) -> VecX {
      return c < me ? VecX(qp.C_eq.row(c).transpose()) : VecX(-qp.C_ineq.row(c - me).transpose());
    };
    auto rhs = [&](int c) -> double { return c < me ? qp.e(c) : -qp.d(c - me); };

    VecX x = -llt.solve(qp.g);
    std::vector<int> active;    // internal constraint ids
    std::vector<double> u;      // multipliers of active constraints
    MatX y(n, 0);               // L^{-1} N

    auto directions = [&](const VecX& np, VecX& z, VecX& r) {
      const VecX w = solve_l(np);
      if (active.empty()) {
        r.resize(0);
        z = solve_lt(w);
        return;
      }
      Eigen::HouseholderQR<MatX> qr(y);
      r = qr.solve(w);
      z = solve_lt(w - y * r);
    };
    auto add_active = [&](int c, double mult) {
      active.push_back(c);
      u.push_back(mult);
      y.conservativeResize(n, static_cast<Eigen::Index>(active.size()));
      y.col(y.cols() - 1) = solve_l(normal(c));
    };
    auto drop_active = [&](std::size_t k) {
      active.erase(active.begin() + static_cast<long>(k));
      u.erase(u.begin() + static_cast<long>(k));
      MatX ny(n, static_cast<Eigen::Index>(active.size()));
      for (std::size_t j = 0; j < active.size(); ++j) ny.col(static_cast<Eigen::Index>(j)) = solve_l(normal(active[j]));
      y = std::move(ny);
    };
    const double eps = 1e-12;

    // Equalities: full steps onto each hyperplane; never dropped.
    for (int c = 0; c < me; ++c) {
      const VecX np = normal(c);
      VecX z, r;
      directions(np, z, r);
      const double s = np.dot(x) - rhs(c);
      const double zn = z.dot(np);
      if (std::abs(zn) <= eps * std::max(1.0, np.squaredNorm())) {
        if (std::abs(s) > opts_.tol * std::max(1.0, std::abs(rhs(c)))) {
          res.status = QpStatus::Infeasible;
          res.x = x;
          return res;
        }
        continue;  // linearly dependent and consistent
      }
      const double t = -s / zn;
      x += t * z;
      for (std::size_t j = 0; j < u.size(); ++j) u[j] -= t * r(static_cast<Eigen::Index>(j));
      add_active(c, t);
    }

    int iter = 0;
    std::vector<char> in_active(static_cast<std::size_t>(me + mi), 0);
    for (int c : active) in_active[static_cast<std::size_t>(c)] = 1;

    while (true) {
      // Most violated inequality; lowest index wins ties.
      int p = -1;
      double worst = 0.0;
      for (int i = 0; i < mi; ++i) {
        const int c = me + i;
        if (in_active[static_cast<std::size_t>(c)]) continue;
        const double scale = std::max(1.0, qp.C_ineq.row(i).cwiseAbs().maxCoeff());
        const double s = (normal(c).dot(x) - rhs(c)) / scale;
        if (s < -opts_.tol && s < worst) {
          worst = s;
          p = c;
        }
      }
      if (p < 0) {
        res.status = QpStatus::Optimal;
        break;
      }
      if (++iter > opts_.max_iter) {
        res.status = QpStatus::MaxIter;
        break;
      }
      const VecX np = normal(p);
      double up = 0.0;
      bool added = false;
      while (!added) {
        VecX z, r;
        directions(np, z, r);
        // Partial step: largest dual step keeping active inequality multipliers >= 0.
        double t1 = std::numeric_limits<double>::infinity();
        int drop = -1;
        for (std::size_t j = 0; j < active.size(); ++j) {
          if (active[j] < me) continue;
          const double rj = r(static_cast<Eigen::Index>(j));
          if (rj > eps) {
            const double ratio = u[j] / rj;
            if (ratio < t1) {
              t1 = ratio;
              drop = static_cast<int>(j);
            }
          }
        }
        const double zn = z.dot(np);
        const bool z_zero = z.norm() <= 1e-12 * std::max(1.0, np.norm());
        double t2 = std::numeric_limits<double>::infinity();
        if (!z_zero && zn > 0.0) t2 = -(np.dot(x) - rhs(p)) / zn;
        const double t = std::min(t1, t2);
        if (!std::isfinite(t)) {
          res.status = QpStatus::Infeasible;
          res.x = x;
          res.iterations = iter;
          return res;
        }
        if (!z_zero) x += t * z;
        for (std::size_t j = 0; j < u.size(); ++j) u[j] -= t * r(static_cast<Eigen::Index>(j));
        up += t;
        if (t2 <= t1) {
          add_active(p, up);
          in_active[static_cast<std::size_t>(p)] = 1;
          added = true;
        } else {
          in_active[static_cast<std::size_t>(active[static_cast<std::size_t>(drop)])] = 0;
          drop_active(static_cast<std::size_t>(drop));
        }
        if (++iter > opts_.max_iter) break;
      }
      if (!added) {
        res.status = QpStatus::MaxIter;
        break;
      }
    }

    res.x = x;
    res.iterations = iter;
    for (std::size_t j = 0; j < active.size(); ++j) {
      const int c = active[j];
      if (c < me) {
        res.lambda_eq(c) = -u[j];
      } else {
        res.lambda_ineq(c - me) = u[j];
        res.active_set.push_back(c - me);
      }
    }
    std::sort(res.active_set.begin(), res.active_set.end());
    res.objective = qp.objective(x);
    return res;
  }

 private:
  QpOptions opts_;
};

inline QpResult solve_qp(const QpProblem& qp, double tol = 1e-9, int max_iter = 1000) {
  QpOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  return QpSolver(o).solve(qp);
}

}  // namespace quadloco
