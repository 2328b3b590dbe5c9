#include "quadloco/trajopt.hpp"

namespace quadloco::trajopt {

Problem build_problem(const JumpSpec& spec) {
  using namespace detail;
  validate(spec);
  Problem pb;
  pb.spec = spec;
  const int np = static_cast<int>(spec.phases.size());
  int K = 0;
  pb.phase_start.push_back(0);
  for (const auto& ph : spec.phases) {
    for (int j = 0; j < ph.knots; ++j) pb.phase_of_interval.push_back(static_cast<int>(pb.phase_start.size()) - 1);
    K += ph.knots;
    pb.phase_start.push_back(K);
  }
  auto& c = pb.counts;
  c.knots = K + 1;
  c.intervals = K;
  c.state_vars = 18 * (K + 1);
  int off = c.state_vars;
  for (int k = 0; k < K; ++k) {
    std::vector<int> legs;
    for (int l = 0; l < kNumLegs; ++l) {
      if (spec.phases[pb.phase_of_interval[k]].stance[l]) legs.push_back(l);
    }
    pb.force_offset.push_back(legs.empty() ? -1 : off);
    off += 3 * static_cast<int>(legs.size());
    pb.interval_legs.push_back(legs);
  }
  c.force_vars = off - c.state_vars;
  c.duration_vars = np;
  c.vars = off + np;
  pb.R_ref = reference_rotations(spec.R0, spec.Rg, K + 1);

  const BodyModel model = spec.model;
  const CostWeights wts = spec.weights;
  auto add = [&](BlockKind kind, std::vector<int> vars, int rows, std::string tag, std::function<ADX(const ADX&)> fn) {
    if (kind == BlockKind::Eq) c.eq += rows;
    if (kind == BlockKind::Ineq) c.ineq += rows;
    pb.blocks.push_back({kind, std::move(vars), rows, std::move(tag), std::move(fn)});
  };

  // Dynamics defects.
  for (int k = 0; k < K; ++k) {
    const int ph = pb.phase_of_interval[k];
    const int n_i = spec.phases[ph].knots;
    const auto legs = pb.interval_legs[k];
    const int nf = 3 * static_cast<int>(legs.size());
    std::vector<int> vars = concat(range(pb.knot_offset(k), 36), nf ? range(pb.force_offset[k], nf) : std::vector<int>{});
    vars.push_back(pb.duration_offset(ph));
    std::vector<Vec3> feet;
    for (int l : legs) feet.push_back(pb.feet_for_phase(ph)[l]);
    add(BlockKind::Eq, vars, 18, "dynamics", [=](const ADX& x) {
      const KnotView a = knot_view(x, 0), b = knot_view(x, 18);
      std::vector<V3<AD>> f;
      for (int j = 0; j < nf / 3; ++j) f.push_back(x.segment<3>(36 + 3 * j));
      const AD h = x(36 + nf) / AD(static_cast<double>(n_i));
      ADX r(18);
      r.segment<3>(0) = a.p + h * a.v - b.p;
      r.segment<6>(3) = srbd_defect<AD>(a.p, a.v, a.w, a.R, b.v, b.w, f, feet, h, model);
      const V3<AD> wh = a.w * h;
      const M3<AD> d = b.R - a.R * so3::exp_taylor4(wh);
      for (int cc = 0; cc < 3; ++cc) {
        for (int rr = 0; rr < 3; ++rr) r(9 + 3 * cc + rr) = d(rr, cc);
      }
      return r;
    });
  }

  // Boundary conditions.
  {
    const Vec3 p0 = spec.p0;
    const Mat3 R0 = spec.R0;
    add(BlockKind::Eq, range(0, 18), 18, "initial", [=](const ADX& x) {
      ADX r(18);
      for (int i = 0; i < 3; ++i) r(i) = x(i) - p0(i);
      for (int i = 3; i < 9; ++i) r(i) = x(i);
      for (int cc = 0; cc < 3; ++cc) {
        for (int rr = 0; rr < 3; ++rr) r(9 + 3 * cc + rr) = x(9 + 3 * cc + rr) - R0(rr, cc);
      }
      return r;
    });
    // Zero initial angular acceleration.
    add(BlockKind::Eq, concat(range(6, 3), range(pb.knot_offset(1) + 6, 3)), 3, "initial_omega_dot",
        [](const ADX& x) {
          ADX r(3);
          for (int i = 0; i < 3; ++i) r(i) = x(3 + i) - x(i);
          return r;
        });
    const Vec3 pg = spec.pg;
    const Mat3 Rg = spec.Rg;
    std::vector<int> vars = range(pb.knot_offset(K), 3);
    vars = concat(vars, range(pb.knot_offset(K) + 9, 9));
    add(BlockKind::Eq, vars, 12, "goal", [=](const ADX& x) {
      ADX r(12);
      for (int i = 0; i < 3; ++i) r(i) = x(i) - pg(i);
      for (int cc = 0; cc < 3; ++cc) {
        for (int rr = 0; rr < 3; ++rr) r(3 + 3 * cc + rr) = x(3 + 3 * cc + rr) - Rg(rr, cc);
      }
      return r;
    });
  }

  // Friction pyramid and normal force bounds.
  const FrictionSpec fr = spec.friction;
  for (int k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < pb.interval_legs[k].size(); ++j) {
      add(BlockKind::Ineq, range(pb.force_offset[k] + 3 * static_cast<int>(j), 3), 6, "friction", [=](const ADX& x) {
        ADX r(6);
        r(0) = x(0) - fr.mu * x(2);
        r(1) = -x(0) - fr.mu * x(2);
        r(2) = x(1) - fr.mu * x(2);
        r(3) = -x(1) - fr.mu * x(2);
        r(4) = AD(fr.f_min) - x(2);
        r(5) = x(2) - AD(fr.f_max);
        return r;
      });
    }
  }

  // CoM box and foot sphere at contact knots.
  const double r2 = spec.sphere_radius * spec.sphere_radius;
  auto sphere = [&](int k, const Vec3& foot, const Vec3& center) {
    std::vector<int> vars = concat(range(pb.knot_offset(k), 3), range(pb.knot_offset(k) + 9, 9));
    add(BlockKind::Ineq, vars, 1, "foot_sphere", [=](const ADX& x) {
      M3<AD> R;
      for (int cc = 0; cc < 3; ++cc) {
        for (int rr = 0; rr < 3; ++rr) R(rr, cc) = x(3 + 3 * cc + rr);
      }
      const V3<AD> rel = foot.cast<AD>() - x.segment<3>(0);
      const V3<AD> d = R.transpose() * rel - center.cast<AD>();
      ADX r(1);
      r(0) = d.squaredNorm() - AD(r2);
      return r;
    });
  };
  for (int ph = 0; ph < np; ++ph) {
    if (!pb.is_contact_phase(ph)) continue;
    for (int k = pb.phase_start[ph]; k <= pb.phase_start[ph + 1]; ++k) {
      const Vec3 lo = spec.box_min, hi = spec.box_max;
      add(BlockKind::Ineq, range(pb.knot_offset(k), 3), 6, "com_box", [=](const ADX& x) {
        ADX r(6);
        for (int i = 0; i < 3; ++i) {
          r(i) = x(i) - AD(hi(i));
          r(3 + i) = AD(lo(i)) - x(i);
        }
        return r;
      });
      for (int l = 0; l < kNumLegs; ++l) {
        if (spec.phases[ph].stance[l]) sphere(k, pb.feet_for_phase(ph)[l], spec.sphere_center[l]);
      }
    }
  }
  if (!pb.is_contact_phase(np - 1)) {
    for (int l = 0; l < kNumLegs; ++l) sphere(K, spec.feet_g[l], spec.sphere_center[l]);
  }

  // Total duration.
  {
    const double tmin = spec.T_min, tmax = spec.T_max;
    add(BlockKind::Ineq, range(pb.duration_offset(0), np), 2, "total_time", [=](const ADX& x) {
      AD sum = x(0);
      for (int i = 1; i < np; ++i) sum += x(i);
      ADX r(2);
      r(0) = AD(tmin) - sum;
      r(1) = sum - AD(tmax);
      return r;
    });
  }

  // Cost.
  const double sw = std::sqrt(wts.eps_omega), sr = std::sqrt(wts.eps_R), sf = std::sqrt(wts.eps_f);
  for (int k = 0; k <= K; ++k) {
    const Mat3 rref = pb.R_ref[k];
    add(BlockKind::Cost, range(pb.knot_offset(k) + 6, 12), 6, "cost_knot", [=](const ADX& x) {
      M3<AD> R;
      for (int cc = 0; cc < 3; ++cc) {
        for (int rr = 0; rr < 3; ++rr) R(rr, cc) = x(3 + 3 * cc + rr);
      }
      ADX r(6);
      r.head<3>() = x.head<3>() * AD(sw);
      r.tail<3>() = rotation_error_vee<AD>(R, rref) * AD(sr);
      return r;
    });
  }
  for (int k = 0; k < K; ++k) {
    const int nf = 3 * static_cast<int>(pb.interval_legs[k].size());
    if (!nf) continue;
    add(BlockKind::Cost, range(pb.force_offset[k], nf), nf, "cost_force", [=](const ADX& x) { return ADX(x * AD(sf)); });
  }
  return pb;
}

TimingSolution solve_timing(const Problem& pb, Eigen::VectorXd z, const SolveOptions& opt) {
  using namespace detail;
  const auto wall0 = std::chrono::steady_clock::now();
  const int n = pb.counts.vars;
  int m = 0;
  for (const auto& b : pb.blocks) m += b.rows;
  std::vector<BlockKind> row_kind(m);
  {
    int row = 0;
    for (const auto& b : pb.blocks) {
      for (int j = 0; j < b.rows; ++j) row_kind[row + j] = b.kind;
      row += b.rows;
    }
  }
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  double rho = opt.rho0;
  project_durations(pb, z);

  // Residual of the augmented Lagrangian as a sum of squares:
  //   cost rows: r, eq rows: sqrt(rho/2) (c + lambda/rho),
  //   ineq rows: sqrt(rho/2) max(0, g + lambda/rho).
  auto al_residual = [&](const Evaluation& e, Eigen::VectorXd& res, std::vector<char>* active) {
    res.resize(m);
    if (active) active->assign(m, 1);
    const double s = std::sqrt(0.5 * rho);
    for (int i = 0; i < m; ++i) {
      switch (row_kind[i]) {
        case BlockKind::Cost:
          res(i) = e.r(i);
          break;
        case BlockKind::Eq:
          res(i) = s * (e.r(i) + lambda(i) / rho);
          break;
        case BlockKind::Ineq: {
          const double g = e.r(i) + lambda(i) / rho;
          if (g > 0.0) {
            res(i) = s * g;
          } else {
            res(i) = 0.0;
            if (active) (*active)[i] = 0;
          }
          break;
        }
      }
    }
  };
  auto row_scale = [&](int i) { return row_kind[i] == BlockKind::Cost ? 1.0 : std::sqrt(0.5 * rho); };

  TimingSolution best;
  bool have_best = false;
  double prev_viol = std::numeric_limits<double>::infinity();
  int inner_total = 0;
  double last_grad = 0.0;
  int outer = 0;
  Violation v;
  for (outer = 1; outer <= opt.max_outer; ++outer) {
    double mu_lm = 1e-3;
    for (int it = 0; it < opt.max_inner; ++it) {
      ++inner_total;
      Evaluation e = evaluate(pb, z, true);
      Eigen::VectorXd res;
      std::vector<char> active;
      al_residual(e, res, &active);
      std::vector<Eigen::Triplet<double>> trip;
      trip.reserve(e.jac.size());
      for (const auto& t : e.jac) {
        if (active[t.row()]) trip.emplace_back(t.row(), t.col(), t.value() * row_scale(t.row()));
      }
      Eigen::SparseMatrix<double> J(m, n);
      J.setFromTriplets(trip.begin(), trip.end());
      const Eigen::SparseMatrix<double> JT = J.transpose();
      Eigen::SparseMatrix<double> H = JT * J;
      Eigen::VectorXd grad = JT * res;
      // Durations held at a bound that the gradient pushes against are frozen.
      std::vector<int> frozen;
      for (std::size_t i = 0; i < pb.spec.phases.size(); ++i) {
        const int o = pb.duration_offset(static_cast<int>(i));
        const auto& ph = pb.spec.phases[i];
        if ((z(o) <= ph.t_min && grad(o) > 0.0) || (z(o) >= ph.t_max && grad(o) < 0.0)) frozen.push_back(o);
      }
      for (int o : frozen) {
        grad(o) = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator itc(H, o); itc; ++itc) itc.valueRef() = itc.row() == o ? 1.0 : 0.0;
      }
      if (!frozen.empty()) {
        for (int c = 0; c < H.outerSize(); ++c) {
          for (Eigen::SparseMatrix<double>::InnerIterator itc(H, c); itc; ++itc) {
            if (itc.row() != itc.col() && std::find(frozen.begin(), frozen.end(), itc.row()) != frozen.end()) itc.valueRef() = 0.0;
          }
        }
      }
      last_grad = grad.lpNorm<Eigen::Infinity>();
      const double phi = res.squaredNorm();
      Eigen::VectorXd diag = H.diagonal().cwiseMax(1e-6);
      bool accepted = false;
      for (int tries = 0; tries < 12 && !accepted; ++tries) {
        Eigen::SparseMatrix<double> A = H;
        for (int i = 0; i < n; ++i) A.coeffRef(i, i) += mu_lm * diag(i);
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
        if (ldlt.info() != Eigen::Success) {
          mu_lm *= 10.0;
          continue;
        }
        Eigen::VectorXd dz = ldlt.solve(-grad);
        Eigen::VectorXd z_new = z + dz;
        project_durations(pb, z_new);
        Evaluation e2 = evaluate(pb, z_new, false);
        Eigen::VectorXd res2;
        al_residual(e2, res2, nullptr);
        const double phi2 = res2.squaredNorm();
        if (phi2 < phi) {
          const double pred = -(2.0 * grad.dot(z_new - z)) - (J * (z_new - z)).squaredNorm();
          const double ratio = pred > 0 ? (phi - phi2) / pred : 0.0;
          z = z_new;
          accepted = true;
          mu_lm = ratio > 0.75 ? std::max(mu_lm / 3.0, 1e-12) : (ratio < 0.25 ? mu_lm * 2.0 : mu_lm);
          if ((phi - phi2) <= 1e-14 * (1.0 + phi)) it = opt.max_inner;  // stalled
        } else {
          mu_lm *= 4.0;
        }
      }
      if (!accepted) break;
      if (last_grad < 1e-9) break;
    }

    const Evaluation e = evaluate(pb, z, false);
    v = violation(pb, e.r);
    const double viol = std::max(v.eq, v.ineq);
    if (opt.verbose) {
      std::fprintf(stderr, "outer %2d rho %.1e eq %.2e ineq %.2e (%s) grad %.2e cost %.4f inner %d T", outer, rho, v.eq,
                   v.ineq, v.worst_tag.c_str(), last_grad, unpack(pb, z).cost, inner_total);
      for (std::size_t i = 0; i < pb.spec.phases.size(); ++i) std::fprintf(stderr, " %.4f", z(pb.duration_offset(i)));
      std::fprintf(stderr, "\n");
    }
    if (viol <= opt.tol) {
      TimingSolution s = unpack(pb, z);
      if (!have_best || s.cost < best.cost) {
        best = s;
        best.max_eq_violation = v.eq;
        best.max_ineq_violation = v.ineq;
        best.kkt_residual = last_grad;
        have_best = true;
      }
      if (last_grad < 1e-6 * std::max(1.0, std::sqrt(rho))) break;
    }
    for (int i = 0; i < m; ++i) {
      if (row_kind[i] == BlockKind::Eq) lambda(i) += rho * e.r(i);
      if (row_kind[i] == BlockKind::Ineq) lambda(i) = std::max(0.0, lambda(i) + rho * e.r(i));
    }
    if (viol > 0.25 * prev_viol) rho = std::min(rho * 10.0, opt.rho_max);
    prev_viol = viol;
  }
  if (!have_best) {
    std::string msg = "trajectory optimization did not converge: worst defect " + std::to_string(std::max(v.eq, v.ineq)) +
                      " (" + v.worst_tag + "), durations";
    for (std::size_t i = 0; i < pb.spec.phases.size(); ++i) {
      msg += " " + std::to_string(z(pb.duration_offset(static_cast<int>(i))));
    }
    throw Error(ErrorCode::NoConvergence, msg);
  }
  best.outer_iterations = std::min(outer, opt.max_outer);
  best.inner_iterations = inner_total;
  best.solve_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return best;
}

}  // namespace quadloco::trajopt
