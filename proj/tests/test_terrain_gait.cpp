#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "quadloco/gait.hpp"
#include "quadloco/terrain.hpp"

namespace quadloco {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

PerLeg<Vec2> rect(double hx, double hy) {
  return {Vec2(hx, -hy), Vec2(hx, hy), Vec2(-hx, -hy), Vec2(-hx, hy)};
}

double residual(const PerLeg<Vec2>& xy, const Eigen::Vector4d& z, const Vec3& a) {
  double r = 0.0;
  for (int i = 0; i < 4; ++i) r += std::pow(a(0) + a(1) * xy[i].x() + a(2) * xy[i].y() - z(i), 2);
  return r;
}

TEST(FitPlane, Examples) {
  const auto xy = rect(0.3, 0.2);
  EXPECT_LE((fit_plane(xy, Eigen::Vector4d::Constant(0.1)).vec() - Vec3(0.1, 0, 0)).norm(), 1e-12);
  Eigen::Vector4d z;
  for (int i = 0; i < 4; ++i) z(i) = 0.2 * xy[i].x();
  EXPECT_LE((fit_plane(xy, z).vec() - Vec3(0, 0.2, 0)).norm(), 1e-12);
}

TEST(FitPlane, CollinearGivesMinimumNorm) {
  const PerLeg<Vec2> xy{Vec2(-0.3, 0), Vec2(-0.1, 0), Vec2(0.2, 0), Vec2(0.4, 0)};
  Eigen::Vector4d z;
  for (int i = 0; i < 4; ++i) z(i) = 0.1 * xy[i].x();
  const PlaneCoeffs a = fit_plane(xy, z);
  Eigen::Matrix<double, 4, 3> w;
  for (int i = 0; i < 4; ++i) w.row(i) << 1.0, xy[i].x(), xy[i].y();
  const Vec3 oracle = w.jacobiSvd(Eigen::ComputeFullU | Eigen::ComputeFullV).solve(z);
  EXPECT_LE((a.vec() - oracle).norm(), 1e-10);
  EXPECT_NEAR(a.a2, 0.0, 1e-12);
  EXPECT_LE(residual(xy, z, a.vec()), 1e-20);
}

TEST(FitPlane, MinimalResidualAndTranslationEquivariance) {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int k = 0; k < 50; ++k) {
    PerLeg<Vec2> xy;
    Eigen::Vector4d z;
    for (int i = 0; i < 4; ++i) {
      xy[i] = Vec2(u(rng), u(rng));
      z(i) = 0.2 * u(rng);
    }
    const Vec3 a = fit_plane(xy, z).vec();
    const double r0 = residual(xy, z, a);
    for (int j = 0; j < 3; ++j) {
      for (double s : {-1e-3, 1e-3}) {
        Vec3 b = a;
        b(j) += s;
        EXPECT_GE(residual(xy, z, b), r0 - 1e-15);
      }
    }
    const Vec2 d(u(rng), u(rng));
    PerLeg<Vec2> moved = xy;
    for (auto& p : moved) p += d;
    const Vec3 am = fit_plane(moved, z).vec();
    EXPECT_NEAR(am(1), a(1), 1e-9);
    EXPECT_NEAR(am(2), a(2), 1e-9);
    EXPECT_NEAR(am(0), a(0) - a(1) * d.x() - a(2) * d.y(), 1e-9);
  }
}

TEST(Posture, FlatUphillAndYaw) {
  const Posture flat = posture_from_plane({}, 0.0, 0.5);
  EXPECT_LE((flat.R_d - Mat3::Identity()).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(flat.com_height_d, 0.5);

  const Posture up = posture_from_plane({0.0, std::tan(10 * kDeg), 0.0}, 0.0, 0.5);
  const Vec3 rpy = so3::to_rpy(up.R_d);
  EXPECT_NEAR(rpy.x(), 0.0, 1e-12);
  EXPECT_NEAR(rpy.y(), -10 * kDeg, 1e-12);
  EXPECT_NEAR(up.com_height_d * std::cos(10 * kDeg), 0.5, 1e-12);
  EXPECT_LE(so3::orthonormality_defect(up.R_d), 1e-14);

  const PlaneCoeffs side{0.0, 0.0, std::tan(8 * kDeg)};
  const Posture y0 = posture_from_plane(side, 0.0, 0.5);
  const Posture y1 = posture_from_plane({}, 0.7, 0.5);
  EXPECT_LE((y1.R_d - yaw_rotation(0.7)).norm(), 1e-12);
  EXPECT_LE((y0.R_d.col(2) - side.normal()).norm(), 1e-12);
}

TEST(Posture, RejectsNearVerticalPlane) {
  try {
    posture_from_plane({0.0, 1.0 / std::tan(4 * kDeg), 0.0}, 0.0, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SlopeTooSteep);
  }
  EXPECT_NO_THROW(posture_from_plane({0.0, 1.0 / std::tan(6 * kDeg), 0.0}, 0.0, 0.5));
}

TEST(PlaneFilter, FirstOrderLag) {
  PlaneFilter f(0.5);
  f.update({0, 0, 0});
  f.update({1, 0, 0});
  EXPECT_DOUBLE_EQ(f.value().a0, 0.5);
  PlaneFilter off;
  off.update({0, 0, 0});
  EXPECT_DOUBLE_EQ(off.update({1, 2, 3}).a2, 3.0);
}

TEST(Subphase, TrotClock) {
  const GaitSchedule g = gait_preset("trot");
  Subphase s = subphase(0.0, g, FR);
  EXPECT_TRUE(s.contact);
  EXPECT_DOUBLE_EQ(s.phi, 0.0);
  s = subphase(g.period / 4, g, FR);
  EXPECT_TRUE(s.contact);
  EXPECT_NEAR(s.phi, 0.5, 1e-12);
  EXPECT_FALSE(subphase(0.0, g, FL).contact);
  EXPECT_NEAR(subphase(0.75 * g.period, g, FR).phi, 0.5, 1e-12);
  const GaitSchedule stand = gait_preset("stand");
  for (int i = 0; i < 4; ++i) EXPECT_TRUE(subphase(1.234, stand, i).contact);
  EXPECT_THROW(gait_preset("gallop"), Error);
}

TEST(Subphase, PiecewiseLinear) {
  const GaitSchedule g = gait_preset("bound", 0.4);
  const double dt = 1e-4;
  for (int k = 0; k < 8000; ++k) {
    const double t = k * dt;
    const Subphase a = subphase(t, g, BR), b = subphase(t + dt, g, BR);
    if (a.contact == b.contact && b.phi > a.phi) {
      const double rate = a.contact ? 1.0 / g.stance_time() : 1.0 / g.swing_time();
      EXPECT_NEAR(b.phi - a.phi, rate * dt, 1e-9);
    }
  }
}

TEST(PhaseGain, Examples) {
  const PhaseGainParams p;
  // P(|Z| > 5) = 5.733031e-7 for a standard normal.
  EXPECT_NEAR(phase_gain_contact(0.5, p), 1.0 - 5.733031e-7, 1e-12);
  // At phi = 0 the far term is erf(10 / sqrt 2), which is 1 to double precision.
  EXPECT_NEAR(phase_gain_contact(0.0, p), 0.5, 1e-15);
  EXPECT_NEAR(phase_gain_swing(0.0, p), 0.5, 1e-15);
  EXPECT_NEAR(phase_gain_contact(0.1, p), 0.5 * (1.0 + 0.6826895), 1e-7);
  EXPECT_NEAR(phase_gain_swing(0.5, p), 5.733031e-7, 1e-12);
  for (double phi = 0.0; phi <= 1.0; phi += 0.01) {
    EXPECT_NEAR(phase_gain_contact(phi, p), phase_gain_contact(1 - phi, p), 1e-14);
    EXPECT_NEAR(phase_gain_swing(phi, p), phase_gain_swing(1 - phi, p), 1e-14);
  }
  EXPECT_LE(std::abs(total_weight(true, 1.0, p) - total_weight(false, 0.0, p)), 1e-3);
}

TEST(PhaseGain, BoundedForAnySigma) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> sig(0.01, 2.0), ph(0.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const PhaseGainParams p{sig(rng), sig(rng), sig(rng), sig(rng)};
    const double phi = ph(rng);
    for (bool c : {true, false}) {
      const double w = total_weight(c, phi, p);
      EXPECT_GE(w, 0.0);
      EXPECT_LE(w, 1.0);
    }
  }
}

TEST(Adjacency, CounterClockwiseFromAbove) {
  EXPECT_EQ(leg_ccw(FR), FL);
  EXPECT_EQ(leg_ccw(FL), BL);
  EXPECT_EQ(leg_ccw(BL), BR);
  EXPECT_EQ(leg_ccw(BR), FR);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(leg_cw(leg_ccw(i)), i);
}

TEST(SupportPolygon, VirtualPointsAndVertex) {
  const Vec2 p(1, 0), pm(0, 0), pp(1, 1);
  auto vp = virtual_points(p, pm, pp, 1.0);
  EXPECT_EQ(vp.minus, p);
  EXPECT_EQ(vp.plus, p);
  vp = virtual_points(p, pm, pp, 0.0);
  EXPECT_EQ(vp.minus, pm);
  EXPECT_EQ(vp.plus, pp);
  EXPECT_LE((virtual_points(p, pm, pp, 0.5).minus - Vec2(0.5, 0)).norm(), 1e-15);
  EXPECT_EQ(polygon_vertex(p, virtual_points(p, pm, pp, 1.0), 1, 1, 1), p);
  const auto v0 = virtual_points(p, pm, pp, 0.0);
  EXPECT_LE((polygon_vertex(p, v0, 0, 1, 1) - 0.5 * (pm + pp)).norm(), 1e-15);
  EXPECT_THROW(polygon_vertex(p, v0, 0, 0, 0), Error);
}

TEST(SupportPolygon, VertexInsideTriangle) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(-1, 1), w(0, 1);
  for (int k = 0; k < 500; ++k) {
    const Vec2 a(u(rng), u(rng)), b(u(rng), u(rng)), c(u(rng), u(rng));
    const double wi = w(rng), wm = w(rng), wp = w(rng);
    const Vec2 x = polygon_vertex(a, virtual_points(a, b, c, wi), wi, wm, wp);
    // Barycentric coordinates of x in (a, b, c) are nonnegative.
    Eigen::Matrix2d m;
    m << b - a, c - a;
    if (std::abs(m.determinant()) < 1e-6) continue;
    const Vec2 l = m.inverse() * (x - a);
    EXPECT_GE(l(0), -1e-12);
    EXPECT_GE(l(1), -1e-12);
    EXPECT_LE(l.sum(), 1.0 + 1e-12);
  }
}

TEST(SupportPolygon, TrotAtZeroVelocityStaysAtCentroid) {
  const GaitSchedule g = gait_preset("trot");
  const PhaseGainParams p;
  const auto feet = rect(0.3, 0.128);
  Vec2 prev = support_polygon_com(0.0, g, feet, p);
  for (int k = 0; k <= 330; ++k) {
    PerLeg<double> w;
    const Vec2 c = support_polygon_com(k * 1e-3, g, feet, p, &w);
    EXPECT_LE(c.norm(), 1e-12);
    for (double x : w) EXPECT_TRUE(x >= 0.0 && x <= 1.0);
    EXPECT_LE((c - prev).norm(), 1e-3);
    prev = c;
  }
  // Translation equivariance.
  PerLeg<Vec2> moved = feet;
  for (auto& f : moved) f += Vec2(0.4, -0.1);
  EXPECT_LE((support_polygon_com(0.05, g, moved, p) - Vec2(0.4, -0.1)).norm(), 1e-12);
}

TEST(SupportPolygon, ContinuousAcrossSwitchesForAsymmetricFeet) {
  // No jumps: the largest per-step change shrinks linearly with the step.
  const GaitSchedule g = gait_preset("bound");
  const PhaseGainParams p;
  const PerLeg<Vec2> feet{Vec2(0.35, -0.1), Vec2(0.28, 0.15), Vec2(-0.3, -0.12), Vec2(-0.25, 0.14)};
  auto worst_step = [&](double dt) {
    Vec2 prev = support_polygon_com(0.0, g, feet, p);
    double worst = 0.0;
    for (int k = 1; k * dt <= 2 * g.period; ++k) {
      const Vec2 c = support_polygon_com(k * dt, g, feet, p);
      worst = std::max(worst, (c - prev).norm());
      prev = c;
    }
    return worst;
  };
  const double coarse = worst_step(1e-3), fine = worst_step(1e-4);
  EXPECT_GT(coarse, 0.0);
  EXPECT_LT(fine, 0.12 * coarse);
}

TEST(Footstep, Examples) {
  EXPECT_LE((footstep(Vec2::Zero(), 0.3, Vec2(1, 0), Vec2(1, 0), 0.5) - Vec2(0.15, 0)).norm(), 1e-15);
  const Vec2 extra = footstep(Vec2::Zero(), 0.3, Vec2::Zero(), Vec2(0.2, 0), 0.3, 9.81);
  EXPECT_NEAR(extra.x(), 0.0350, 5e-5);
  EXPECT_NEAR(extra.x(), std::sqrt(0.3 / 9.81) * 0.2, 1e-15);
}

}  // namespace
}  // namespace quadloco
