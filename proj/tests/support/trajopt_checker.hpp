#pragma once

// Re-evaluates every constraint of a timing solution directly from the spec,
// without the optimizer's block machinery.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "quadloco/trajopt.hpp"

namespace quadloco::checks {

struct CheckReport {
  std::map<std::string, double> worst;  // category -> max violation
  double max() const {
    double m = 0.0;
    for (const auto& [k, v] : worst) m = std::max(m, v);
    return m;
  }
  void note(const std::string& k, double v) { worst[k] = std::max(worst[k], v); }
};

inline Mat3 series_exp4(const Vec3& w) {
  Mat3 a;
  a << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  Mat3 term = Mat3::Identity(), sum = Mat3::Identity();
  for (int k = 1; k <= 4; ++k) {
    term = term * a / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

inline CheckReport check_solution(const trajopt::JumpSpec& spec, const trajopt::TimingSolution& sol) {
  CheckReport rep;
  const auto& m = spec.model;
  const Mat3 inv_i = m.inertia.inverse();
  int k = 0;
  bool flown = false;
  const int n_phases = static_cast<int>(spec.phases.size());
  double total = 0.0;
  for (int ph = 0; ph < n_phases; ++ph) {
    const auto& phase = spec.phases[ph];
    const double T = sol.T[ph];
    total += T;
    rep.note("phase_duration", std::max(0.0, phase.t_min - T));
    rep.note("phase_duration", std::max(0.0, T - phase.t_max));
    const double h = T / phase.knots;
    bool contact = false;
    for (bool c : phase.stance) contact = contact || c;
    const PerLeg<Vec3>& feet = flown ? spec.feet_g : spec.feet0;
    for (int j = 0; j < phase.knots; ++j, ++k) {
      const auto& a = sol.knots[k];
      const auto& b = sol.knots[k + 1];
      const Vec12& f = sol.forces[k];
      Vec3 force = Vec3::Zero(), moment = Vec3::Zero();
      for (int l = 0; l < kNumLegs; ++l) {
        const Vec3 fl = f.segment<3>(3 * l);
        if (!phase.stance[l]) {
          rep.note("swing_force", fl.cwiseAbs().maxCoeff());
          continue;
        }
        force += fl;
        moment += (feet[l] - a.p).cross(fl);
        rep.note("friction", std::max(0.0, std::abs(fl.x()) - spec.friction.mu * fl.z()));
        rep.note("friction", std::max(0.0, std::abs(fl.y()) - spec.friction.mu * fl.z()));
        rep.note("force_bounds", std::max(0.0, spec.friction.f_min - fl.z()));
        rep.note("force_bounds", std::max(0.0, fl.z() - spec.friction.f_max));
      }
      const Vec3 acc = force / m.mass + m.gravity;
      const Vec3 wdot = inv_i * (a.R.transpose() * moment - a.Omega.cross(m.inertia * a.Omega));
      rep.note("dynamics", ((b.p - a.p) / h - a.v).cwiseAbs().maxCoeff() * h);
      rep.note("dynamics", (b.v - a.v - h * acc).cwiseAbs().maxCoeff());
      rep.note("dynamics", (b.Omega - a.Omega - h * wdot).cwiseAbs().maxCoeff());
      rep.note("rotation", (b.R - a.R * series_exp4(h * a.Omega)).cwiseAbs().maxCoeff());
    }
    if (contact) {
      for (int kk = k - phase.knots; kk <= k; ++kk) {
        const auto& x = sol.knots[kk];
        for (int i = 0; i < 3; ++i) {
          rep.note("com_box", std::max(0.0, x.p(i) - spec.box_max(i)));
          rep.note("com_box", std::max(0.0, spec.box_min(i) - x.p(i)));
        }
        for (int l = 0; l < kNumLegs; ++l) {
          if (!phase.stance[l]) continue;
          const double d = (x.R.transpose() * (feet[l] - x.p) - spec.sphere_center[l]).norm();
          rep.note("foot_sphere", std::max(0.0, d * d - spec.sphere_radius * spec.sphere_radius));
        }
      }
    } else {
      flown = true;
    }
  }
  if (flown && !sol.knots.empty()) {
    bool last_contact = false;
    for (bool c : spec.phases.back().stance) last_contact = last_contact || c;
    if (!last_contact) {
      const auto& x = sol.knots.back();
      for (int l = 0; l < kNumLegs; ++l) {
        const double d = (x.R.transpose() * (spec.feet_g[l] - x.p) - spec.sphere_center[l]).norm();
        rep.note("foot_sphere", std::max(0.0, d * d - spec.sphere_radius * spec.sphere_radius));
      }
    }
  }
  rep.note("total_time", std::max(0.0, spec.T_min - total));
  rep.note("total_time", std::max(0.0, total - spec.T_max));
  const auto& x0 = sol.knots.front();
  const auto& xN = sol.knots.back();
  rep.note("boundary", (x0.p - spec.p0).cwiseAbs().maxCoeff());
  rep.note("boundary", x0.v.cwiseAbs().maxCoeff());
  rep.note("boundary", x0.Omega.cwiseAbs().maxCoeff());
  rep.note("boundary", (x0.R - spec.R0).cwiseAbs().maxCoeff());
  rep.note("boundary", (sol.knots[1].Omega - x0.Omega).cwiseAbs().maxCoeff());
  rep.note("boundary", (xN.p - spec.pg).cwiseAbs().maxCoeff());
  rep.note("boundary", (xN.R - spec.Rg).cwiseAbs().maxCoeff());
  return rep;
}

}  // namespace quadloco::checks
