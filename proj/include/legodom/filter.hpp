// SPDX-License-Identifier: Apache-2.0
//
// World-centric right-invariant EKF on SE_K(3) with IMU bias augmentation.
// The state carries rotation, velocity, position and one column per tracked
// contact; biases live outside the group ("imperfect" invariant form).
// Error coordinates are right invariant, xi such that X_est = exp(xi) X,
// with bias error appended as b_est - b. P rows are ordered
// [rot, vel, pos, contact_0.., gyro bias, accel bias].

#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <vector>

#include "legodom/kinematics.hpp"
#include "legodom/lie.hpp"

namespace legodom {

/// Process/measurement covariance scalars (each multiplies an identity) and
/// the initial covariance diagonal. Defaults are the inference values used
/// throughout: gyro 1e-5, accel 1e-1, contact 1e-4, encoder 1e-6,
/// network velocity 10^-5.5, biases 1e-10.
struct NoiseConfig {
  double gyro_cov = 1e-5;
  double accel_cov = 1e-1;
  double contact_cov = 1e-4;
  double encoder_cov = 1e-6;
  double nmn_cov = 3.1622776601683794e-06;  // 10^-5.5
  double gyro_bias_cov = 1e-10;
  double accel_bias_cov = 1e-10;

  double init_rot_cov = 1e-8;
  double init_vel_cov = 1e-8;
  double init_pos_cov = 1e-8;
  double init_gyro_bias_cov = 1e-10;
  double init_accel_bias_cov = 1e-10;

  Eigen::Vector3d gravity{0.0, 0.0, -9.81};

  void validate() const;  // throws on non-positive covariances
  static NoiseConfig from_json(const std::string& text);
  static NoiseConfig load(const std::string& path);
  std::string to_json() const;
};

struct ImuSample {
  Eigen::Vector3d accel;  // m/s^2, body frame
  Eigen::Vector3d gyro;   // rad/s, body frame
  double t = 0.0;
};

struct FilterState {
  GroupElement x;  // columns: [v, p, contact_0, contact_1, ...]
  Eigen::Vector3d bias_gyro{Eigen::Vector3d::Zero()};
  Eigen::Vector3d bias_accel{Eigen::Vector3d::Zero()};
  Eigen::MatrixXd p_cov;        // (dof + 6) square
  std::map<int, int> contact_map;  // foot index -> contact slot (column 2 + slot)
  double t = 0.0;

  int num_contacts() const { return static_cast<int>(contact_map.size()); }
  int error_dim() const { return x.dof() + 6; }

  Eigen::Matrix3d rotation() const { return x.rotation(); }
  Eigen::Vector3d velocity() const { return x.column(0); }
  Eigen::Vector3d position() const { return x.column(1); }
  /// World position of a tracked contact. Throws if the foot is not tracked.
  Eigen::Vector3d contact_point(int foot) const;

  /// Offset of a foot's error block within P.
  int contact_error_offset(int foot) const;
};

/// State aligned with (r0, v0, p0), zero biases, no contacts, diagonal P
/// from the initial covariances.
FilterState filter_init(const NoiseConfig& noise, const Eigen::Matrix3d& r0,
                        const Eigen::Vector3d& v0, const Eigen::Vector3d& p0);

/// Strapdown propagation over dt with bias-corrected IMU, holding the sample
/// constant across the interval (exact closed form under that hold), plus
/// covariance transport P <- Phi P Phi' + Q_d. Contact columns keep their
/// mean; their process noise is the contact covariance, optionally scaled
/// per foot through `contact_cov_scale` (slip rejection hook).
/// Throws std::invalid_argument unless 0 < dt <= 0.05.
FilterState propagate(const FilterState& s, const ImuSample& imu, double dt,
                      const NoiseConfig& noise,
                      const std::map<int, double>& contact_cov_scale = {});

/// Augments the state with a new contact column at p + R * fk(q); grows P
/// with the position block plus encoder noise through the leg Jacobian.
/// Throws std::invalid_argument if the foot is already tracked.
FilterState add_contact(const FilterState& s, int foot, const RobotModel& robot,
                        const Vector12d& q, const NoiseConfig& noise);

/// Drops a contact column and its P rows/cols; other blocks are preserved
/// bit for bit. Throws std::invalid_argument if the foot is unknown.
FilterState remove_contact(const FilterState& s, int foot);

/// One leg-kinematics observation: the foot's body-frame position from FK.
struct KinematicObs {
  int foot;
  Vector12d q;
};

struct UpdateResult {
  FilterState state;
  /// False when the innovation covariance was near singular and the update
  /// was skipped (prior returned unchanged).
  bool applied = true;
};

/// Joint right-invariant update for any mix of kinematic observations and an
/// optional body-frame velocity measurement: stacked H, block-diagonal
/// measurement covariance, single gain, exponential state update and
/// Joseph-form covariance update.
/// Throws std::invalid_argument if no observation is given or a foot is
/// not tracked.
UpdateResult stacked_update(const FilterState& s, const RobotModel& robot,
                            const std::vector<KinematicObs>& kin_obs,
                            const std::optional<Eigen::Vector3d>& velocity_obs,
                            const NoiseConfig& noise);

/// Single-foot kinematic update (single-entry stack).
UpdateResult update_kinematics(const FilterState& s, const RobotModel& robot, int foot,
                               const Vector12d& q, const NoiseConfig& noise);

/// Learned body-frame velocity update (single-entry stack).
UpdateResult update_velocity(const FilterState& s, const Eigen::Vector3d& v_meas,
                             const NoiseConfig& noise);

/// Continuous-time right-invariant error dynamics matrix A for the current
/// state (gravity coupling, bias columns). Exposed for the sensitivity test.
Eigen::MatrixXd error_dynamics_matrix(const FilterState& s, const NoiseConfig& noise);

/// State transition Phi = exp(A * dt); exact (the series terminates).
Eigen::MatrixXd propagation_phi(const FilterState& s, double dt, const NoiseConfig& noise);

}  // namespace legodom
