#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace quadloco {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;

inline constexpr int kNumLegs = 4;
inline constexpr double kGravity = 9.81;

// Leg indexing used everywhere: front-right, front-left, back-right, back-left.
enum Leg : int { FR = 0, FL = 1, BR = 2, BL = 3 };

template <typename T>
using PerLeg = std::array<T, kNumLegs>;

enum class ErrorCode {
  NonSkew,
  NearPi,
  SingularInnovation,
  SlopeTooSteep,
  DegenerateWeights,
  Infeasible,
  MaxIter,
  SpecError,
  NoConvergence,
  Unreachable,
  Config,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::NonSkew: return "NonSkew";
    case ErrorCode::NearPi: return "NearPi";
    case ErrorCode::SingularInnovation: return "SingularInnovation";
    case ErrorCode::SlopeTooSteep: return "SlopeTooSteep";
    case ErrorCode::DegenerateWeights: return "DegenerateWeights";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::MaxIter: return "MaxIter";
    case ErrorCode::SpecError: return "SpecError";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Rigid-body parameters of the robot trunk. Defaults are the Cheetah 3 values.
struct BodyModel {
  double mass = 45.0;                                  // kg
  Mat3 inertia = Vec3(0.35, 2.1, 2.1).asDiagonal();    // kg m^2, body frame, about the CoM
  Vec3 gravity = Vec3(0.0, 0.0, -kGravity);            // m/s^2, world frame
};

// Floating-base state, world frame (omega is the world-frame angular velocity).
struct BodyState {
  Vec3 p = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Vec3 v = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
};

struct FrictionSpec {
  double mu = 0.6;
  double f_min = 1.0;     // N
  double f_max = 1000.0;  // N
};

// Hip (ab/ad joint) locations in the body frame from the 0.6 m x 0.256 m trunk.
inline PerLeg<Vec3> default_hip_offsets(double length = 0.6, double width = 0.256) {
  const double hx = 0.5 * length, hy = 0.5 * width;
  return {Vec3(hx, -hy, 0.0), Vec3(hx, hy, 0.0), Vec3(-hx, -hy, 0.0), Vec3(-hx, hy, 0.0)};
}

inline Mat3 yaw_rotation(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

}  // namespace quadloco
