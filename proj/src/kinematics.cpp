// SPDX-License-Identifier: Apache-2.0

#include "legodom/kinematics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "legodom/lie.hpp"

namespace legodom {

using nlohmann::json;

void LegChain::validate() const {
  for (const auto& j : joints) {
    if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument("LegChain: joint axis is not a unit vector");
    }
    if (!j.offset.allFinite()) {
      throw std::invalid_argument("LegChain: non-finite joint offset");
    }
  }
  if (!foot_offset.allFinite()) {
    throw std::invalid_argument("LegChain: non-finite foot offset");
  }
}

namespace {

Eigen::Vector3d vec3_from_json(const json& a) {
  if (!a.is_array() || a.size() != 3) {
    throw std::runtime_error("robot config: expected a 3-element array");
  }
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

// Axis-angle rotation for one revolute joint.
Eigen::Matrix3d joint_rotation(const Joint& j, double q) { return so3_exp(j.axis * q); }

}  // namespace

RobotModel RobotModel::from_json(const std::string& text) {
  json root = json::parse(text);
  const auto& legs = root.at("legs");
  if (!legs.is_array() || legs.size() != kNumLegs) {
    throw std::runtime_error("robot config: expected exactly 4 legs");
  }
  RobotModel m;
  for (int i = 0; i < kNumLegs; ++i) {
    const auto& leg = legs[i];
    LegChain chain;
    chain.name = leg.value("name", "leg" + std::to_string(i));
    for (const auto& joint : leg.at("joints")) {
      chain.joints.push_back(
          {vec3_from_json(joint.at("axis")), vec3_from_json(joint.at("offset"))});
    }
    if (chain.joints.size() != kJointsPerLeg) {
      throw std::runtime_error("robot config: legs must have 3 joints");
    }
    chain.foot_offset = vec3_from_json(leg.at("foot_offset"));
    chain.validate();
    m.legs[i] = std::move(chain);
  }
  return m;
}

RobotModel RobotModel::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("robot config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

std::string RobotModel::to_json() const {
  json legs = json::array();
  for (const auto& chain : this->legs) {
    json joints = json::array();
    for (const auto& j : chain.joints) {
      joints.push_back({{"axis", vec3_to_json(j.axis)}, {"offset", vec3_to_json(j.offset)}});
    }
    legs.push_back({{"name", chain.name},
                    {"joints", joints},
                    {"foot_offset", vec3_to_json(chain.foot_offset)}});
  }
  return json{{"legs", legs}}.dump(2);
}

RobotModel default_quadruped() {
  RobotModel m;
  const char* names[kNumLegs] = {"LF", "RF", "LH", "RH"};
  const double fx[kNumLegs] = {0.19, 0.19, -0.19, -0.19};
  const double sy[kNumLegs] = {1.0, -1.0, 1.0, -1.0};
  for (int i = 0; i < kNumLegs; ++i) {
    LegChain chain;
    chain.name = names[i];
    chain.joints = {
        {Eigen::Vector3d::UnitX(), {fx[i], sy[i] * 0.11, 0.0}},     // hip roll
        {Eigen::Vector3d::UnitY(), {0.0, sy[i] * 0.06, 0.0}},       // hip pitch
        {Eigen::Vector3d::UnitY(), {0.0, 0.0, -0.25}},              // knee
    };
    chain.foot_offset = {0.0, 0.0, -0.25};
    m.legs[i] = std::move(chain);
  }
  return m;
}

Eigen::Vector3d fk_position_chain(const LegChain& chain, const Eigen::VectorXd& q_leg) {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < chain.joints.size(); ++i) {
    p += r * chain.joints[i].offset;
    r = r * joint_rotation(chain.joints[i], q_leg[static_cast<int>(i)]);
  }
  return p + r * chain.foot_offset;
}

Eigen::Matrix3d fk_orientation_chain(const LegChain& chain, const Eigen::VectorXd& q_leg) {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  for (size_t i = 0; i < chain.joints.size(); ++i) {
    r = r * joint_rotation(chain.joints[i], q_leg[static_cast<int>(i)]);
  }
  return r;
}

Eigen::Matrix3Xd jacobian_chain(const LegChain& chain, const Eigen::VectorXd& q_leg) {
  const int n = static_cast<int>(chain.joints.size());
  std::vector<Eigen::Vector3d> origins(n), axes(n);
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    p += r * chain.joints[i].offset;
    origins[i] = p;
    axes[i] = r * chain.joints[i].axis;
    r = r * joint_rotation(chain.joints[i], q_leg[i]);
  }
  const Eigen::Vector3d foot = p + r * chain.foot_offset;
  Eigen::Matrix3Xd jac(3, n);
  for (int i = 0; i < n; ++i) {
    jac.col(i) = axes[i].cross(foot - origins[i]);
  }
  return jac;
}

namespace {

void check_leg_index(int leg) {
  if (leg < 0 || leg >= kNumLegs) throw std::invalid_argument("leg index out of range");
}

}  // namespace

Eigen::Vector3d fk_position(const RobotModel& robot, const Vector12d& q, int leg) {
  check_leg_index(leg);
  return fk_position_chain(robot.legs[leg], q.segment<3>(3 * leg));
}

Eigen::Matrix3d fk_orientation(const RobotModel& robot, const Vector12d& q, int leg) {
  check_leg_index(leg);
  return fk_orientation_chain(robot.legs[leg], q.segment<3>(3 * leg));
}

Matrix3x12d jacobian(const RobotModel& robot, const Vector12d& q, int leg) {
  check_leg_index(leg);
  Matrix3x12d jac = Matrix3x12d::Zero();
  jac.middleCols<3>(3 * leg) = jacobian_chain(robot.legs[leg], q.segment<3>(3 * leg));
  return jac;
}

Eigen::Vector3d foot_velocity_world(const RobotModel& robot, const Vector12d& q,
                                    const Vector12d& dq, const Eigen::Vector3d& omega,
                                    const Eigen::Matrix3d& r_wb,
                                    const Eigen::Vector3d& v_body_world, int leg) {
  const Eigen::Vector3d h = fk_position(robot, q, leg);
  const Eigen::Vector3d foot_body_rate = omega.cross(h) + jacobian(robot, q, leg) * dq;
  return v_body_world + r_wb * foot_body_rate;
}

namespace {

// Closed-form seed for a roll(x) / pitch(y) / knee(y) leg. Returns false if
// the chain does not match that structure.
bool analytic_seed(const LegChain& chain, const Eigen::Vector3d& target,
                   Eigen::Vector3d& q_out) {
  if (chain.joints.size() != 3) return false;
  const Eigen::Vector3d ax0 = chain.joints[0].axis;
  const Eigen::Vector3d ax1 = chain.joints[1].axis;
  const Eigen::Vector3d ax2 = chain.joints[2].axis;
  if ((ax0 - Eigen::Vector3d::UnitX()).norm() > 1e-9) return false;
  if ((ax1 - Eigen::Vector3d::UnitY()).norm() > 1e-9) return false;
  if ((ax2 - Eigen::Vector3d::UnitY()).norm() > 1e-9) return false;
  // Pitch offset must be purely lateral, thigh and shank purely vertical.
  if (std::abs(chain.joints[1].offset.x()) > 1e-9 ||
      std::abs(chain.joints[1].offset.z()) > 1e-9)
    return false;
  if (chain.joints[2].offset.head<2>().norm() > 1e-9) return false;
  if (chain.foot_offset.head<2>().norm() > 1e-9) return false;

  const double d = chain.joints[1].offset.y();
  const double l1 = -chain.joints[2].offset.z();
  const double l2 = -chain.foot_offset.z();

  const Eigen::Vector3d w = target - chain.joints[0].offset;
  const double rho = std::hypot(w.y(), w.z());
  if (rho < std::abs(d) + 1e-9) return false;
  const double phi = std::atan2(w.z(), w.y());
  // Roll that puts the remaining chain plane at lateral offset d, foot down.
  const double q1 = phi + std::acos(std::clamp(d / rho, -1.0, 1.0));

  const double c1 = std::cos(q1), s1 = std::sin(q1);
  const double xp = w.x();
  const double zp = -w.y() * s1 + w.z() * c1;  // z in the rolled frame

  const double r2 = xp * xp + zp * zp;
  const double r = std::sqrt(r2);
  if (r > l1 + l2 - 1e-9 || r < std::abs(l1 - l2) + 1e-9) return false;

  const double cq3 = std::clamp((r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2), -1.0, 1.0);
  const double q3 = -std::acos(cq3);  // knee folds one way, consistently
  const double alpha = std::atan2(-xp, -zp);
  const double q2 = alpha - std::atan2(l2 * std::sin(q3), l1 + l2 * std::cos(q3));
  q_out = {q1, q2, q3};
  return true;
}

}  // namespace

Eigen::Vector3d ik_leg(const RobotModel& robot, int leg, const Eigen::Vector3d& target,
                       const Eigen::Vector3d* seed) {
  check_leg_index(leg);
  const LegChain& chain = robot.legs[leg];

  Eigen::Vector3d q = Eigen::Vector3d::Zero();
  if (seed != nullptr) {
    q = *seed;
  } else if (!analytic_seed(chain, target, q)) {
    q.setZero();
  }

  // Newton polish against the chain's actual parameters.
  for (int iter = 0; iter < 50; ++iter) {
    const Eigen::Vector3d residual = target - fk_position_chain(chain, q);
    if (residual.norm() < 1e-13) return q;
    const Eigen::Matrix3d jac = jacobian_chain(chain, q);
    // Damped solve to step past near-singular poses.
    const Eigen::Matrix3d jtj =
        jac.transpose() * jac + 1e-12 * Eigen::Matrix3d::Identity();
    q += jtj.ldlt().solve(jac.transpose() * residual);
  }
  if ((target - fk_position_chain(chain, q)).norm() > 1e-9) {
    throw std::domain_error("ik_leg: foot target outside workspace for " + chain.name);
  }
  return q;
}

}  // namespace legodom
