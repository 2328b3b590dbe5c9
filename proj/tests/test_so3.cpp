#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "quadloco/so3.hpp"

namespace quadloco::so3 {
namespace {

constexpr double kPi = std::numbers::pi;

Vec3 random_axis_angle(std::mt19937& rng, double max_angle) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, max_angle);
  Vec3 axis(n(rng), n(rng), n(rng));
  return axis.normalized() * u(rng);
}

TEST(Hat, ZeroAndCrossProduct) {
  EXPECT_TRUE(hat(Vec3::Zero()).isZero());
  EXPECT_TRUE((hat(Vec3(0, 0, 1)) * Vec3(1, 0, 0)).isApprox(Vec3(0, 1, 0)));
  EXPECT_TRUE(vee(hat(Vec3(1, 2, 3))).isApprox(Vec3(1, 2, 3)));
}

TEST(Hat, SkewAndAnticommutes) {
  std::mt19937 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Vec3 v(n(rng), n(rng), n(rng)), w(n(rng), n(rng), n(rng));
    EXPECT_TRUE((hat(v).transpose() + hat(v)).isZero(0));
    EXPECT_NEAR((hat(v) * w - v.cross(w)).norm(), 0.0, 1e-14);
    EXPECT_NEAR((hat(v) * w + hat(w) * v).norm(), 0.0, 1e-14);
  }
}

TEST(Vee, RejectsNonSkew) {
  EXPECT_TRUE(vee(Mat3::Zero()).isZero());
  Mat3 m = hat(Vec3(1, 2, 3));
  m(0, 0) = 0.05;  // ||M + M^T|| = 0.1
  try {
    vee(m);
    FAIL() << "expected NonSkew";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonSkew);
  }
}

TEST(ExpTaylor4, IdentityAndAccuracy) {
  EXPECT_TRUE(exp_taylor4(Vec3::Zero()).isIdentity(0));
  // Leading remainder is hat(w)^5 / 5!, whose Frobenius norm is sqrt(2) theta^5 / 120.
  const Vec3 small(0.01, 0.02, 0.03);
  const double lead = std::sqrt(2.0) * std::pow(small.norm(), 5) / 120.0;
  const double small_err = (exp_taylor4(small) - exp_exact(small)).norm();
  EXPECT_LE(small_err, 1e-9);
  EXPECT_NEAR(small_err / lead, 1.0, 1e-2);
  // Quarter turn: truncation error is of order theta^5 / 5!.
  const Vec3 quarter(0, 0, kPi / 2);
  const double err = (exp_taylor4(quarter) - exp_exact(quarter)).norm();
  const double t5 = std::pow(kPi / 2, 5) / 120.0;
  EXPECT_GT(err, 0.5 * t5);
  EXPECT_LT(err, 2.0 * t5);
}

TEST(ExpExact, HandComputed) {
  EXPECT_TRUE(exp_exact(Vec3::Zero()).isIdentity(0));
  EXPECT_NEAR((exp_exact(Vec3(0, 0, kPi / 2)) * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((exp_exact(Vec3(kPi, 0, 0)) * Vec3(0, 1, 0) - Vec3(0, -1, 0)).norm(), 0.0, 1e-12);
}

TEST(ExpExact, Orthonormal) {
  std::mt19937 rng(2);
  for (int i = 0; i < 200; ++i) {
    const Mat3 r = exp_exact(random_axis_angle(rng, 3.0));
    EXPECT_LE(orthonormality_defect(r), 1e-12);
    EXPECT_GT(r.determinant(), 0.0);
  }
}

TEST(LogMap, RoundTripAndSymmetry) {
  EXPECT_TRUE(log_map(Mat3::Identity()).isZero(0));
  EXPECT_NEAR((log_map(exp_exact(Vec3(0.1, 0.2, 0.3))) - Vec3(0.1, 0.2, 0.3)).norm(), 0.0, 1e-10);
  std::mt19937 rng(3);
  for (int i = 0; i < 500; ++i) {
    const Vec3 v = random_axis_angle(rng, kPi - 0.01);
    const Mat3 r = exp_exact(v);
    EXPECT_LE((log_map(r) - v).norm(), 1e-9);
    EXPECT_LE((log_map(r.transpose()) + log_map(r)).norm(), 1e-9);
  }
}

TEST(LogMap, NearPiFlagged) {
  const auto res = log_map_flagged(exp_exact(Vec3(0, kPi, 0)));
  EXPECT_TRUE(res.near_pi);
  EXPECT_NEAR(res.value.norm(), kPi, 1e-9);
  EXPECT_NEAR(std::abs(res.value.y()), kPi, 1e-9);
  // Either sign of the axis is a valid branch at exactly pi.
  EXPECT_LE((exp_exact(res.value) - exp_exact(Vec3(0, kPi, 0))).norm(), 1e-9);
  EXPECT_FALSE(log_map_flagged(exp_exact(Vec3(0, 3.0, 0))).near_pi);
}

TEST(RotationError, ZeroConstructionAndLeftInvariance) {
  std::mt19937 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Mat3 rref = exp_exact(random_axis_angle(rng, 3.0));
    const Mat3 q = exp_exact(random_axis_angle(rng, 3.0));
    const Mat3 r = exp_exact(random_axis_angle(rng, 3.0));
    EXPECT_LE(rotation_error(rref, rref).norm(), 1e-12);
    EXPECT_LE((rotation_error(rref, rref * exp_exact(Vec3(0, 0, 0.2))) - Vec3(0, 0, 0.2)).norm(), 1e-10);
    if (rotation_angle(rref.transpose() * r) < kPi - 0.05) {
      EXPECT_LE((rotation_error(q * rref, q * r) - rotation_error(rref, r)).norm(), 1e-9);
    }
  }
}

TEST(InterpRotation, EndpointsMidpointMonotone) {
  const Mat3 rg = yaw_rotation(kPi / 2);
  EXPECT_TRUE(interp_rotation(Mat3::Identity(), rg, 0.0).isIdentity(0));
  EXPECT_TRUE(interp_rotation(Mat3::Identity(), rg, 1.0).isApprox(rg));
  EXPECT_LE((interp_rotation(Mat3::Identity(), rg, 0.5) - yaw_rotation(kPi / 4)).norm(), 1e-12);
  std::mt19937 rng(5);
  const Mat3 r0 = exp_exact(random_axis_angle(rng, 2.0));
  const Mat3 r1 = exp_exact(random_axis_angle(rng, 2.0));
  double prev = -1.0;
  for (int i = 0; i <= 50; ++i) {
    const double a = rotation_angle(r0.transpose() * interp_rotation(r0, r1, i / 50.0));
    EXPECT_GE(a, prev - 1e-12);
    prev = a;
  }
}

TEST(ExpTaylor4, ErrorBoundOnGrid) {
  for (int i = 1; i <= 20; ++i) {
    const double th = 0.05 * i;
    for (const Vec3& axis : {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 1).normalized(), Vec3(-1, 2, 0.5).normalized()}) {
      const Mat3 r = exp_taylor4(Vec3(axis * th));
      EXPECT_LE((r - exp_exact(axis * th)).norm(), std::pow(th, 5) / 60.0) << th;
    }
  }
}

TEST(ExpTaylor4, OrthonormalityDefectClosedForm) {
  // T(w)^T T(w) = T(-w) T(w) = I + hat(w)^6 / 72 + hat(w)^8 / 576, so the
  // Frobenius defect is sqrt(2) theta^6 (1/72 - theta^2/576).
  for (int i = 1; i <= 20; ++i) {
    const double th = 0.05 * i;
    const Vec3 w = Vec3(0.3, -0.4, 0.866).normalized() * th;
    const double expected = std::sqrt(2.0) * std::pow(th, 6) * (1.0 / 72.0 - th * th / 576.0);
    const double defect = orthonormality_defect(exp_taylor4(w));
    EXPECT_NEAR(defect, expected, 1e-14 + 1e-9 * expected) << th;
    if (th <= 0.95 + 1e-12) {
      EXPECT_LE(defect, std::pow(th, 5) / 60.0) << th;
    }
  }
}

}  // namespace
}  // namespace quadloco::so3
