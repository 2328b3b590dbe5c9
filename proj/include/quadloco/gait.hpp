#pragma once

// Periodic gait clock, erf phase gains and the virtual predictive support
// polygon, plus the Raibert/capture-point footstep rule.

#include <cmath>
#include <string>

#include "quadloco/common.hpp"

namespace quadloco {

struct GaitSchedule {
  std::string name = "trot";
  double period = 0.33;
  PerLeg<double> offsets{0.0, 0.5, 0.5, 0.0};
  double stance_fraction = 0.5;
  bool always_stance = false;

  double stance_time() const { return stance_fraction * period; }
  double swing_time() const { return (1.0 - stance_fraction) * period; }
};

/// Presets: trot, pace, bound, stand. Throws Config for unknown names.
inline GaitSchedule gait_preset(const std::string& name, double period = 0.33) {
  GaitSchedule g;
  g.name = name;
  g.period = period;
  if (name == "trot") {
    g.offsets = {0.0, 0.5, 0.5, 0.0};
  } else if (name == "pace") {
    g.offsets = {0.0, 0.5, 0.0, 0.5};
  } else if (name == "bound") {
    g.offsets = {0.0, 0.0, 0.5, 0.5};
  } else if (name == "stand") {
    g.offsets = {0.0, 0.0, 0.0, 0.0};
    g.always_stance = true;
  } else {
    throw Error(ErrorCode::Config, "unknown gait preset '" + name + "'");
  }
  return g;
}

inline void validate(const GaitSchedule& g) {
  if (!(g.period > 0.0)) throw Error(ErrorCode::Config, "gait period must be positive");
  if (!(g.stance_fraction > 0.0 && g.stance_fraction < 1.0)) {
    throw Error(ErrorCode::Config, "stance fraction must lie in (0, 1)");
  }
  for (double o : g.offsets) {
    if (!(o >= 0.0 && o < 1.0)) throw Error(ErrorCode::Config, "phase offsets must lie in [0, 1)");
  }
}

struct Subphase {
  bool contact = true;
  double phi = 0.0;
};

inline Subphase subphase(double t, const GaitSchedule& g, int leg) {
  if (g.always_stance) return {true, 0.5};
  double psi = t / g.period - g.offsets[leg];
  psi -= std::floor(psi);
  if (psi < g.stance_fraction) return {true, psi / g.stance_fraction};
  return {false, (psi - g.stance_fraction) / (1.0 - g.stance_fraction)};
}

/// Time until leg's current subphase ends.
inline double subphase_remaining(double t, const GaitSchedule& g, int leg) {
  const Subphase s = subphase(t, g, leg);
  if (g.always_stance) return g.period;
  return (1.0 - s.phi) * (s.contact ? g.stance_time() : g.swing_time());
}

struct PhaseGainParams {
  double sigma_c0 = 0.1;
  double sigma_c1 = 0.1;
  double sigma_cbar0 = 0.1;
  double sigma_cbar1 = 0.1;
};

inline double phase_gain_contact(double phi, const PhaseGainParams& p) {
  return 0.5 * (std::erf(phi / (p.sigma_c0 * std::sqrt(2.0))) +
                std::erf((1.0 - phi) / (p.sigma_c1 * std::sqrt(2.0))));
}

inline double phase_gain_swing(double phi, const PhaseGainParams& p) {
  return 0.5 * (2.0 + std::erf(-phi / (p.sigma_cbar0 * std::sqrt(2.0))) +
                std::erf((phi - 1.0) / (p.sigma_cbar1 * std::sqrt(2.0))));
}

inline double total_weight(bool contact, double phi, const PhaseGainParams& p) {
  return contact ? phase_gain_contact(phi, p) : phase_gain_swing(phi, p);
}

/// Counterclockwise neighbour (FR -> FL -> BL -> BR -> FR).
inline int leg_ccw(int i) {
  static constexpr int next[4] = {FL, BL, FR, BR};
  return next[i];
}
/// Clockwise neighbour.
inline int leg_cw(int i) {
  static constexpr int prev[4] = {BR, FR, BL, FL};
  return prev[i];
}

struct VirtualPoints {
  Vec2 minus;
  Vec2 plus;
};

inline VirtualPoints virtual_points(const Vec2& p, const Vec2& p_minus, const Vec2& p_plus, double w) {
  return {w * p + (1.0 - w) * p_minus, w * p + (1.0 - w) * p_plus};
}

inline Vec2 polygon_vertex(const Vec2& p, const VirtualPoints& vp, double w, double w_minus, double w_plus,
                           double eps = 1e-9) {
  const double den = w + w_minus + w_plus;
  if (den <= eps) throw Error(ErrorCode::DegenerateWeights, "support polygon weights vanish");
  return (w * p + w_minus * vp.minus + w_plus * vp.plus) / den;
}

inline Vec2 desired_com(const PerLeg<Vec2>& vertices) {
  return 0.25 * (vertices[0] + vertices[1] + vertices[2] + vertices[3]);
}

/// Full chain: gains for all legs at time t, vertices, mean.
inline Vec2 support_polygon_com(double t, const GaitSchedule& g, const PerLeg<Vec2>& feet,
                                const PhaseGainParams& p, PerLeg<double>* weights_out = nullptr) {
  PerLeg<double> w;
  for (int i = 0; i < kNumLegs; ++i) {
    const Subphase s = subphase(t, g, i);
    w[i] = total_weight(s.contact, s.phi, p);
  }
  PerLeg<Vec2> v;
  for (int i = 0; i < kNumLegs; ++i) {
    const int m = leg_cw(i), q = leg_ccw(i);
    v[i] = polygon_vertex(feet[i], virtual_points(feet[i], feet[m], feet[q], w[i]), w[i], w[m], w[q]);
  }
  if (weights_out) *weights_out = w;
  return desired_com(v);
}

/// p_hip + (T_stance / 2) v_d + sqrt(z0 / g) (v - v_d)
inline Vec2 footstep(const Vec2& p_hip, double t_stance, const Vec2& v_d, const Vec2& v, double z0,
                     double g = kGravity) {
  return p_hip + 0.5 * t_stance * v_d + std::sqrt(z0 / g) * (v - v_d);
}

}  // namespace quadloco
