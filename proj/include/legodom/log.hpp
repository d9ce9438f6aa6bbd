// SPDX-License-Identifier: Apache-2.0
//
// On-disk interchange formats. A trajectory log is JSON Lines: one header
// object followed by one record object per estimator tick. The ground-truth
// sidecar mirrors the timestamps with poses, contact flags and foot
// positions. Estimated trajectories use the same line-per-sample layout.

#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "legodom/kinematics.hpp"

namespace legodom {

inline constexpr int kLogSchemaVersion = 1;

struct LogHeader {
  int schema_version = kLogSchemaVersion;
  double estimator_rate = 500.0;  // Hz
  double imu_rate = 500.0;        // Hz; below estimator_rate means held samples
  std::uint64_t seed = 0;
  nlohmann::json robot;    // embedded robot model (RobotModel::to_json)
  nlohmann::json terrain;  // generator settings, informational
};

/// One tick. Channel ordering is fixed: accel, gyro, q, dq, q_des
/// (mirrors the network input ordering, with q_des taken from the
/// previous tick at assembly time).
struct LogRecord {
  double t = 0.0;
  Eigen::Vector3d accel;
  Eigen::Vector3d gyro;
  Vector12d q;
  Vector12d dq;
  Vector12d q_des;
  std::optional<Eigen::Vector4d> grf;  // per-foot vertical force, N
  std::optional<Eigen::Matrix3d> gt_r;
  std::optional<Eigen::Vector3d> gt_v;
  std::optional<Eigen::Vector3d> gt_p;
};

struct TrajectoryLog {
  LogHeader header;
  std::vector<LogRecord> records;

  void write(const std::string& path) const;
  static TrajectoryLog read(const std::string& path);

  RobotModel robot_model() const;  // from the embedded header config
};

/// Ground-truth sidecar tick.
struct GtRecord {
  double t = 0.0;
  Eigen::Matrix3d r;
  Eigen::Vector3d v;  // world
  Eigen::Vector3d p;
  Eigen::Vector3d v_body;  // R' v, the velocity label
  std::array<bool, 4> contact{};
  std::array<Eigen::Vector3d, 4> foot_w;
};

void write_ground_truth(const std::string& path, const std::vector<GtRecord>& gt);
std::vector<GtRecord> read_ground_truth(const std::string& path);

/// Estimated trajectory sample (also what the evaluator consumes).
struct TrajectorySample {
  double t = 0.0;
  Eigen::Matrix3d r;
  Eigen::Vector3d v;
  Eigen::Vector3d p;
};

using Trajectory = std::vector<TrajectorySample>;

void write_trajectory(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory(const std::string& path);

/// The network input frame for tick k of a log: accel, gyro, q, dq and the
/// previous tick's joint targets (tick 0 reuses its own).
Eigen::VectorXd assemble_nmn_input(const std::vector<LogRecord>& records, std::size_t k);

}  // namespace legodom
