// SPDX-License-Identifier: Apache-2.0

#include "legodom/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "legodom/lie.hpp"

namespace legodom {

using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double smootherstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * x * (x * (6.0 * x - 15.0) + 10.0);
}

const char* profile_name(TerrainConfig::Profile p) {
  switch (p) {
    case TerrainConfig::Profile::Flat: return "flat";
    case TerrainConfig::Profile::Slippery: return "slippery";
    case TerrainConfig::Profile::SoftAnalog: return "soft";
  }
  return "flat";
}

TerrainConfig::Profile profile_from_name(const std::string& s) {
  if (s == "flat") return TerrainConfig::Profile::Flat;
  if (s == "slippery") return TerrainConfig::Profile::Slippery;
  if (s == "soft") return TerrainConfig::Profile::SoftAnalog;
  throw std::runtime_error("terrain: unknown profile " + s);
}

}  // namespace

Eigen::Vector3d CommandProfile::velocity_at(double t) const {
  if (t < settle_time) return Eigen::Vector3d::Zero();
  const double tau = t - settle_time;
  const double s = smootherstep(ramp_time > 0.0 ? tau / ramp_time : 1.0);
  const double vx = max_speed * s * (0.7 + 0.3 * std::sin(kTwoPi * tau / 6.3));
  const double vy = lateral_amp * s * std::sin(kTwoPi * tau / 7.1);
  return {vx, vy, 0.0};
}

double CommandProfile::yaw_rate_at(double t) const {
  if (t < settle_time) return 0.0;
  const double tau = t - settle_time;
  const double s = smootherstep(ramp_time > 0.0 ? tau / ramp_time : 1.0);
  return yaw_rate_amp * s * std::sin(kTwoPi * tau / 9.7);
}

bool CommandProfile::is_standing() const {
  return max_speed == 0.0 && lateral_amp == 0.0 && yaw_rate_amp == 0.0;
}

json TerrainConfig::to_json() const {
  return json{{"profile", profile_name(profile)},
              {"duration", duration},
              {"slip_probability", slip_probability},
              {"slip_speed", slip_speed},
              {"slip_duration_frac", slip_duration_frac},
              {"gait_period", gait_period},
              {"duty_factor", duty_factor},
              {"swing_height", swing_height},
              {"stand_height", stand_height},
              {"soft_sink", soft_sink},
              {"soft_tau", soft_tau},
              {"mass", mass},
              {"link_length_jitter", link_length_jitter},
              {"estimator_rate", estimator_rate},
              {"imu_rate", imu_rate},
              {"sim_rate", sim_rate},
              {"command",
               {{"max_speed", command.max_speed},
                {"lateral_amp", command.lateral_amp},
                {"yaw_rate_amp", command.yaw_rate_amp},
                {"settle_time", command.settle_time},
                {"ramp_time", command.ramp_time}}},
              {"noise",
               {{"enabled", noise.enabled},
                {"gyro_std", noise.gyro_std},
                {"accel_std", noise.accel_std},
                {"encoder_std", noise.encoder_std},
                {"joint_vel_std", noise.joint_vel_std}}}};
}

TerrainConfig TerrainConfig::from_json(const json& j) {
  TerrainConfig c;
  if (j.contains("profile")) c.profile = profile_from_name(j["profile"].get<std::string>());
  c.duration = j.value("duration", c.duration);
  c.slip_probability = j.value("slip_probability", c.slip_probability);
  c.slip_speed = j.value("slip_speed", c.slip_speed);
  c.slip_duration_frac = j.value("slip_duration_frac", c.slip_duration_frac);
  c.gait_period = j.value("gait_period", c.gait_period);
  c.duty_factor = j.value("duty_factor", c.duty_factor);
  c.swing_height = j.value("swing_height", c.swing_height);
  c.stand_height = j.value("stand_height", c.stand_height);
  c.soft_sink = j.value("soft_sink", c.soft_sink);
  c.soft_tau = j.value("soft_tau", c.soft_tau);
  c.mass = j.value("mass", c.mass);
  c.link_length_jitter = j.value("link_length_jitter", c.link_length_jitter);
  c.estimator_rate = j.value("estimator_rate", c.estimator_rate);
  c.imu_rate = j.value("imu_rate", c.imu_rate);
  c.sim_rate = j.value("sim_rate", c.sim_rate);
  if (j.contains("command")) {
    const auto& cm = j["command"];
    c.command.max_speed = cm.value("max_speed", c.command.max_speed);
    c.command.lateral_amp = cm.value("lateral_amp", c.command.lateral_amp);
    c.command.yaw_rate_amp = cm.value("yaw_rate_amp", c.command.yaw_rate_amp);
    c.command.settle_time = cm.value("settle_time", c.command.settle_time);
    c.command.ramp_time = cm.value("ramp_time", c.command.ramp_time);
  }
  if (j.contains("noise")) {
    const auto& nz = j["noise"];
    c.noise.enabled = nz.value("enabled", c.noise.enabled);
    c.noise.gyro_std = nz.value("gyro_std", c.noise.gyro_std);
    c.noise.accel_std = nz.value("accel_std", c.noise.accel_std);
    c.noise.encoder_std = nz.value("encoder_std", c.noise.encoder_std);
    c.noise.joint_vel_std = nz.value("joint_vel_std", c.noise.joint_vel_std);
  }
  return c;
}

ImuSample synthesize_imu(const Eigen::Matrix3d& r0, const Eigen::Vector3d& v0,
                         const Eigen::Matrix3d& r1, const Eigen::Vector3d& v1,
                         double dt, const Eigen::Vector3d& gravity) {
  ImuSample s;
  const Eigen::Vector3d w_dt = so3_log(r0.transpose() * r1);
  s.gyro = w_dt / dt;
  s.accel = so3_left_jacobian_inv(w_dt) * (r0.transpose() * (v1 - v0 - gravity * dt)) / dt;
  return s;
}

Vector12d synthesize_joints(const RobotModel& robot, const Eigen::Matrix3d& r,
                            const Eigen::Vector3d& p,
                            const std::array<Eigen::Vector3d, 4>& foot_w,
                            const Vector12d* prev_q) {
  Vector12d q;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Eigen::Vector3d target = r.transpose() * (foot_w[leg] - p);
    Eigen::Vector3d seed;
    const Eigen::Vector3d* seed_ptr = nullptr;
    if (prev_q != nullptr) {
      seed = prev_q->segment<3>(3 * leg);
      seed_ptr = &seed;
    }
    q.segment<3>(3 * leg) = ik_leg(robot, leg, target, seed_ptr);
  }
  return q;
}

RobotModel jitter_links(const RobotModel& robot, double jitter, std::mt19937_64& rng) {
  if (jitter <= 0.0) return robot;
  std::uniform_real_distribution<double> u(1.0 - jitter, 1.0 + jitter);
  RobotModel out = robot;
  for (auto& leg : out.legs) {
    for (auto& joint : leg.joints) joint.offset *= u(rng);
    leg.foot_offset *= u(rng);
  }
  return out;
}

namespace {

struct StanceRun {
  int foot = 0;
  int first_tick = 0;
  int end_tick = 0;  // exclusive
  Eigen::Vector3d anchor{Eigen::Vector3d::Zero()};
  bool slips = false;
  double slip_start = 0.0;  // s
  double slip_end = 0.0;
  Eigen::Vector3d slip_dir{Eigen::Vector3d::Zero()};
};

// Trot pairing: LF and RH lead, RF and LH are half a period out of phase.
constexpr double kPhaseOffset[kNumLegs] = {0.0, 0.5, 0.5, 0.0};

}  // namespace

SimResult generate(const RobotModel& robot_nominal, const TerrainConfig& config,
                   std::uint64_t seed) {
  const double dt = 1.0 / config.estimator_rate;
  const int n = static_cast<int>(std::llround(config.duration * config.estimator_rate)) + 1;
  const double settle = config.command.settle_time;
  const bool standing = config.command.is_standing();
  const bool soft = config.profile == TerrainConfig::Profile::SoftAnalog;
  const Eigen::Vector3d gravity(0.0, 0.0, -9.81);

  std::mt19937_64 rng_events(seed);
  std::mt19937_64 rng_noise(seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 rng_jitter(seed ^ 0x6a09e667f3bcc909ULL);

  const RobotModel robot = jitter_links(robot_nominal, config.link_length_jitter, rng_jitter);

  // Body truth on the tick grid: the exact integral of each tick's held
  // angular rate / specific force, with velocity pinned to the command.
  std::vector<Eigen::Matrix3d> r_t(n);
  std::vector<Eigen::Vector3d> v_t(n), p_t(n), w_t(n), a_t(n);
  r_t[0] = Eigen::Matrix3d::Identity();
  v_t[0] = config.command.velocity_at(0.0);
  p_t[0] = {0.0, 0.0, config.stand_height};
  for (int k = 0; k + 1 < n; ++k) {
    const double t = k * dt;
    w_t[k] = {0.0, 0.0, config.command.yaw_rate_at(t)};
    const Eigen::Vector3d w_dt = w_t[k] * dt;
    r_t[k + 1] = r_t[k] * so3_exp(w_dt);
    v_t[k + 1] = r_t[k + 1] * config.command.velocity_at((k + 1) * dt);
    a_t[k] = so3_left_jacobian_inv(w_dt) *
             (r_t[k].transpose() * (v_t[k + 1] - v_t[k] - gravity * dt)) / dt;
    p_t[k + 1] = p_t[k] + v_t[k] * dt +
                 (r_t[k] * so3_gamma2(w_dt) * a_t[k] + 0.5 * gravity) * dt * dt;
  }
  if (n >= 2) {
    w_t[n - 1] = w_t[n - 2];
    a_t[n - 1] = a_t[n - 2];
  }

  // Per-tick stance membership from the gait phase.
  auto in_stance = [&](int foot, double t) {
    if (standing || t < settle) return true;
    const double phase =
        std::fmod((t - settle) / config.gait_period + kPhaseOffset[foot], 1.0);
    return phase < config.duty_factor;
  };
  std::vector<std::array<bool, 4>> stance(n);
  for (int k = 0; k < n; ++k) {
    for (int f = 0; f < kNumLegs; ++f) stance[k][f] = in_stance(f, k * dt);
  }

  // Nominal body-frame foot position (hip field plus standing height).
  std::array<Eigen::Vector3d, 4> nominal;
  for (int f = 0; f < kNumLegs; ++f) {
    const auto& j0 = robot.legs[f].joints[0].offset;
    const auto& j1 = robot.legs[f].joints[1].offset;
    nominal[f] = {j0.x(), j0.y() + j1.y(), -config.stand_height};
  }

  // Enumerate stance runs per foot and place their world anchors. Slip
  // events are drawn per run, quantized to the internal grid.
  const double grid = 1.0 / config.sim_rate;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<std::vector<StanceRun>> runs(kNumLegs);
  for (int f = 0; f < kNumLegs; ++f) {
    int k = 0;
    while (k < n) {
      if (!stance[k][f]) {
        ++k;
        continue;
      }
      StanceRun run;
      run.foot = f;
      run.first_tick = k;
      while (k < n && stance[k][f]) ++k;
      run.end_tick = k;

      const int k0 = run.first_tick;
      const Eigen::Vector3d lead =
          (k0 == 0) ? Eigen::Vector3d::Zero()
                    : Eigen::Vector3d(config.command.velocity_at(k0 * dt) * 0.5 *
                                      config.duty_factor * config.gait_period);
      run.anchor = p_t[k0] + r_t[k0] * (nominal[f] + lead);
      run.anchor.z() = 0.0;

      const double run_len = (run.end_tick - run.first_tick) * dt;
      if (config.slip_probability > 0.0 && k0 > 0 && u01(rng_events) < config.slip_probability) {
        run.slips = true;
        const double dur =
            std::round(config.slip_duration_frac * run_len / grid) * grid;
        const double start_frac = 0.15 + 0.4 * u01(rng_events);
        const double t0 = run.first_tick * dt;
        run.slip_start =
            t0 + std::round(start_frac * (run_len - dur) / grid) * grid;
        run.slip_end = run.slip_start + dur;
        const double theta = kTwoPi * u01(rng_events);
        run.slip_dir = {std::cos(theta), std::sin(theta), 0.0};
      }
      runs[f].push_back(run);
    }
  }

  auto run_foot_pos = [&](const StanceRun& run, double t) {
    Eigen::Vector3d pos = run.anchor;
    if (run.slips) {
      const double moved = std::clamp(t - run.slip_start, 0.0, run.slip_end - run.slip_start);
      pos += config.slip_speed * moved * run.slip_dir;
    }
    if (soft) {
      const double dt_in = t - run.first_tick * dt;
      pos.z() -= config.soft_sink * (1.0 - std::exp(-dt_in / config.soft_tau));
    }
    return pos;
  };

  // World foot positions per tick: pinned (plus slip/soft motion) in stance,
  // smooth interpolation to the next anchor in swing.
  std::vector<std::array<Eigen::Vector3d, 4>> foot_w(n);
  for (int f = 0; f < kNumLegs; ++f) {
    const auto& fruns = runs[f];
    if (fruns.empty()) {
      for (int k = 0; k < n; ++k) {
        foot_w[k][f] = p_t[k] + r_t[k] * nominal[f];
        foot_w[k][f].z() = 0.0;
      }
      continue;
    }
    if (fruns[0].first_tick > 0) {
      // Leading swing: from the standing pose to the first anchor.
      Eigen::Vector3d lift_pos = p_t[0] + r_t[0] * nominal[f];
      lift_pos.z() = 0.0;
      const double t_land = fruns[0].first_tick * dt;
      for (int k = 0; k < fruns[0].first_tick; ++k) {
        const double s = std::clamp(k * dt / t_land, 0.0, 1.0);
        const double ss = smootherstep(s);
        Eigen::Vector3d pos = lift_pos + ss * (fruns[0].anchor - lift_pos);
        const double lift = std::sin(std::numbers::pi * s);
        pos.z() = config.swing_height * lift * lift;
        foot_w[k][f] = pos;
      }
    }
    for (size_t ri = 0; ri < fruns.size(); ++ri) {
      const StanceRun& run = fruns[ri];
      for (int k = run.first_tick; k < run.end_tick; ++k) {
        foot_w[k][f] = run_foot_pos(run, k * dt);
      }
      // Swing to the next run (or a virtual anchor past the log end).
      const int sw_begin = run.end_tick;
      const int sw_end = (ri + 1 < fruns.size()) ? fruns[ri + 1].first_tick : n;
      if (sw_begin >= n) continue;
      const Eigen::Vector3d lift_pos = run_foot_pos(run, (run.end_tick - 1) * dt);
      Eigen::Vector3d target;
      double t_land;
      if (ri + 1 < fruns.size()) {
        target = fruns[ri + 1].anchor;
        t_land = fruns[ri + 1].first_tick * dt;
      } else {
        const int last = n - 1;
        target = p_t[last] + r_t[last] * nominal[f];
        target.z() = 0.0;
        t_land = (n - 1) * dt + (1.0 - config.duty_factor) * config.gait_period;
      }
      const double t_lift = (run.end_tick - 1) * dt;
      for (int k = sw_begin; k < sw_end && k < n; ++k) {
        const double s = std::clamp((k * dt - t_lift) / (t_land - t_lift), 0.0, 1.0);
        const double ss = smootherstep(s);
        Eigen::Vector3d pos = lift_pos + ss * (target - lift_pos);
        // sin^2 lift keeps takeoff and landing velocities continuous.
        const double lift = std::sin(std::numbers::pi * s);
        pos.z() = (1.0 - ss) * lift_pos.z() + config.swing_height * lift * lift;
        foot_w[k][f] = pos;
      }
    }
  }

  // Joint streams via IK, warm-started along the trajectory.
  std::vector<Vector12d> q(n);
  for (int k = 0; k < n; ++k) {
    q[k] = synthesize_joints(robot, r_t[k], p_t[k], foot_w[k], k > 0 ? &q[k - 1] : nullptr);
  }
  std::vector<Vector12d> dq(n);
  for (int k = 0; k < n; ++k) {
    if (k == 0) {
      dq[k] = (q[1] - q[0]) / dt;
    } else if (k == n - 1) {
      dq[k] = (q[k] - q[k - 1]) / dt;
    } else {
      dq[k] = (q[k + 1] - q[k - 1]) / (2.0 * dt);
    }
  }
  constexpr int kTargetLeadTicks = 5;

  // Synthetic vertical ground force: a smooth bump over each stance run.
  const double weight = config.mass * 9.81;
  auto grf_at = [&](int f, int k) {
    if (!stance[k][f]) return 0.0;
    if (standing) return weight / 4.0;
    const auto& fruns = runs[f];
    for (const auto& run : fruns) {
      if (k >= run.first_tick && k < run.end_tick) {
        const double s = static_cast<double>(k - run.first_tick) /
                         std::max(1, run.end_tick - 1 - run.first_tick);
        double force = weight * std::pow(std::sin(std::numbers::pi * std::clamp(s, 0.0, 1.0)), 2);
        if (run.first_tick == 0) force = std::max(force, weight / 4.0 * (1.0 - s));
        if (soft) {
          force *= 1.0 - std::exp(-(k - run.first_tick) * dt / config.soft_tau);
        }
        return force;
      }
    }
    return 0.0;
  };

  // Assemble the log. IMU samples below the estimator rate are held.
  SimResult out;
  out.log.header.estimator_rate = config.estimator_rate;
  out.log.header.imu_rate = config.imu_rate;
  out.log.header.seed = seed;
  out.log.header.robot = json::parse(robot_nominal.to_json());
  out.log.header.terrain = config.to_json();
  out.log.records.resize(n);
  out.gt.resize(n);

  std::normal_distribution<double> gauss(0.0, 1.0);
  const SimNoise& nz = config.noise;
  for (int k = 0; k < n; ++k) {
    LogRecord& rec = out.log.records[k];
    rec.t = k * dt;

    int j = k;
    if (config.imu_rate < config.estimator_rate) {
      const double frame = std::floor(k * dt * config.imu_rate) / config.imu_rate;
      j = std::min(n - 1, static_cast<int>(std::llround(frame * config.estimator_rate)));
    }
    rec.gyro = w_t[j];
    rec.accel = a_t[j];
    rec.q = q[k];
    rec.dq = dq[k];
    rec.q_des = q[std::min(k + kTargetLeadTicks, n - 1)];
    Eigen::Vector4d grf;
    for (int f = 0; f < kNumLegs; ++f) grf(f) = grf_at(f, k);
    rec.grf = grf;

    if (nz.enabled) {
      for (int i = 0; i < 3; ++i) rec.gyro(i) += nz.gyro_bias(i) + nz.gyro_std * gauss(rng_noise);
      for (int i = 0; i < 3; ++i) rec.accel(i) += nz.accel_bias(i) + nz.accel_std * gauss(rng_noise);
      for (int i = 0; i < 12; ++i) rec.q(i) += nz.encoder_std * gauss(rng_noise);
      for (int i = 0; i < 12; ++i) rec.dq(i) += nz.joint_vel_std * gauss(rng_noise);
    }

    rec.gt_r = r_t[k];
    rec.gt_v = v_t[k];
    rec.gt_p = p_t[k];

    GtRecord& g = out.gt[k];
    g.t = rec.t;
    g.r = r_t[k];
    g.v = v_t[k];
    g.p = p_t[k];
    g.v_body = r_t[k].transpose() * v_t[k];
    g.contact = stance[k];
    g.foot_w = foot_w[k];
  }
  return out;
}

}  // namespace legodom
