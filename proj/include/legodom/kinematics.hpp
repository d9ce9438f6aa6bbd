// SPDX-License-Identifier: Apache-2.0
//
// Serial-chain forward kinematics for a quadruped: per-leg revolute chains
// with body-frame offsets, analytic position Jacobians, and the inverse
// kinematics used by the trajectory synthesizer.

#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

namespace legodom {

using Vector12d = Eigen::Matrix<double, 12, 1>;
using Matrix3x12d = Eigen::Matrix<double, 3, 12>;

inline constexpr int kNumLegs = 4;
inline constexpr int kJointsPerLeg = 3;

struct Joint {
  Eigen::Vector3d axis;    // unit rotation axis, parent frame
  Eigen::Vector3d offset;  // translation from parent joint, m
};

/// One leg: a serial path of revolute joints ending in a foot point.
struct LegChain {
  std::string name;
  std::vector<Joint> joints;
  Eigen::Vector3d foot_offset;  // from the last joint frame, m

  void validate() const;  // throws std::invalid_argument on non-unit axes
};

struct JointState {
  Vector12d q;   // rad
  Vector12d dq;  // rad/s
};

/// Four-legged kinematic model. Leg order: LF, RF, LH, RH; the 12-vector
/// q maps leg L to q[3L .. 3L+2].
struct RobotModel {
  std::array<LegChain, kNumLegs> legs;

  static RobotModel from_json(const std::string& text);
  static RobotModel load(const std::string& path);
  std::string to_json() const;
};

/// The configuration shipped with the toolkit: hip-roll / hip-pitch / knee
/// per leg, 0.25 m thigh and shank.
RobotModel default_quadruped();

/// Chain-level FK: body-frame foot position for arbitrary joint counts.
Eigen::Vector3d fk_position_chain(const LegChain& chain, const Eigen::VectorXd& q_leg);
Eigen::Matrix3d fk_orientation_chain(const LegChain& chain, const Eigen::VectorXd& q_leg);
Eigen::Matrix3Xd jacobian_chain(const LegChain& chain, const Eigen::VectorXd& q_leg);

/// Body-frame foot position of one leg.
Eigen::Vector3d fk_position(const RobotModel& robot, const Vector12d& q, int leg);

/// Orientation of the contact (foot) frame in the body frame.
Eigen::Matrix3d fk_orientation(const RobotModel& robot, const Vector12d& q, int leg);

/// 3x12 position Jacobian; columns outside the leg's joints are zero.
Matrix3x12d jacobian(const RobotModel& robot, const Vector12d& q, int leg);

/// World-frame velocity of the foot point:
///   v_body + R * (omega x h_p(q) + J_p(q) * dq)
Eigen::Vector3d foot_velocity_world(const RobotModel& robot, const Vector12d& q,
                                    const Vector12d& dq, const Eigen::Vector3d& omega,
                                    const Eigen::Matrix3d& r_wb,
                                    const Eigen::Vector3d& v_body_world, int leg);

/// Inverse kinematics for one leg: joint angles reaching a body-frame foot
/// target. Closed-form seed for the shipped roll/pitch/knee geometry,
/// Newton-polished against the chain's actual parameters. `seed` warm-starts
/// the polish. Throws std::domain_error when the target is outside the
/// workspace.
Eigen::Vector3d ik_leg(const RobotModel& robot, int leg, const Eigen::Vector3d& target,
                       const Eigen::Vector3d* seed = nullptr);

}  // namespace legodom
