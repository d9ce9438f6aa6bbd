// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic quadruped trajectories: a trot-style gait over a
// smooth commanded-velocity profile, with body truth built so that holding
// each emitted IMU sample over its tick reproduces the truth exactly. Feet
// are pinned in world during stance except for injected slip intervals; a
// soft-terrain analog lets stance feet settle downward. Joint streams come
// from per-leg inverse kinematics, forces from a smooth stance bump.

#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "legodom/filter.hpp"
#include "legodom/kinematics.hpp"
#include "legodom/log.hpp"

namespace legodom {

struct SimNoise {
  bool enabled = false;
  double gyro_std = 0.01;       // rad/s
  double accel_std = 0.1;       // m/s^2
  double encoder_std = 0.001;   // rad
  double joint_vel_std = 0.05;  // rad/s
  Eigen::Vector3d gyro_bias{Eigen::Vector3d::Zero()};
  Eigen::Vector3d accel_bias{Eigen::Vector3d::Zero()};
};

/// Smooth body-frame velocity command. All-zero amplitudes give a standing
/// log (all feet in stance, constant pose).
struct CommandProfile {
  double max_speed = 0.35;     // m/s, forward
  double lateral_amp = 0.04;   // m/s
  double yaw_rate_amp = 0.12;  // rad/s
  double settle_time = 0.4;    // s of standing before the gait starts
  double ramp_time = 1.0;      // s to reach full command

  Eigen::Vector3d velocity_at(double t) const;  // body frame
  double yaw_rate_at(double t) const;
  bool is_standing() const;
};

struct TerrainConfig {
  enum class Profile { Flat, Slippery, SoftAnalog };
  Profile profile = Profile::Flat;

  double duration = 10.0;          // s
  double slip_probability = 0.01;  // per stance event (Slippery only)
  double slip_speed = 0.8;         // m/s while slipping
  double slip_duration_frac = 0.3; // fraction of the stance window
  double gait_period = 0.5;        // s
  double duty_factor = 0.5;        // stance fraction
  double swing_height = 0.06;      // m
  double stand_height = 0.38;      // m
  double soft_sink = 0.03;         // m, SoftAnalog settling depth
  double soft_tau = 0.12;          // s, settling time constant
  double mass = 25.0;              // kg, scales the synthetic forces
  double link_length_jitter = 0.0; // +- fraction applied per trajectory

  double estimator_rate = 500.0;  // Hz
  double imu_rate = 500.0;        // Hz
  double sim_rate = 4000.0;       // Hz, internal event grid

  CommandProfile command;
  SimNoise noise;

  nlohmann::json to_json() const;
  static TerrainConfig from_json(const nlohmann::json& j);
};

struct SimResult {
  TrajectoryLog log;
  std::vector<GtRecord> gt;
};

/// Generates one labeled trajectory. Same config and seed give bit-identical
/// output.
SimResult generate(const RobotModel& robot, const TerrainConfig& config,
                   std::uint64_t seed);

/// Inverts the IMU model between two consecutive truth states: the returned
/// sample, held constant over dt, propagates (r0, v0) exactly onto (r1, v1).
ImuSample synthesize_imu(const Eigen::Matrix3d& r0, const Eigen::Vector3d& v0,
                         const Eigen::Matrix3d& r1, const Eigen::Vector3d& v1,
                         double dt, const Eigen::Vector3d& gravity);

/// Joint angles reaching the given world-frame foot targets from body pose
/// (r, p). Warm-started by `prev_q` when given. Throws std::domain_error on
/// a workspace violation.
Vector12d synthesize_joints(const RobotModel& robot, const Eigen::Matrix3d& r,
                            const Eigen::Vector3d& p,
                            const std::array<Eigen::Vector3d, 4>& foot_w,
                            const Vector12d* prev_q = nullptr);

/// Robot with every link offset scaled by an independent factor in
/// [1-jitter, 1+jitter] (the kinematics randomization toggle).
RobotModel jitter_links(const RobotModel& robot, double jitter, std::mt19937_64& rng);

}  // namespace legodom
