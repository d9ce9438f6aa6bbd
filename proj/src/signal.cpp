// SPDX-License-Identifier: Apache-2.0

#include "legodom/signal.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace legodom {

LowPassFilter::LowPassFilter(double cutoff_hz) : cutoff_hz_(cutoff_hz) {
  if (!(cutoff_hz > 0.0)) {
    throw std::invalid_argument("LowPassFilter: cutoff must be positive");
  }
}

Eigen::VectorXd LowPassFilter::step(const Eigen::VectorXd& x, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("LowPassFilter: dt must be positive");
  if (!initialized_) {
    y_ = x;
    initialized_ = true;
    return y_;
  }
  const double tau = 1.0 / (2.0 * std::numbers::pi * cutoff_hz_);
  const double alpha = dt / (dt + tau);
  y_ += alpha * (x - y_);
  return y_;
}

double LowPassFilter::step(double x, double dt) {
  Eigen::VectorXd v(1);
  v << x;
  return step(v, dt)(0);
}

std::array<bool, 4> nmn_contact(const Eigen::Vector4d& c_filtered, double threshold) {
  std::array<bool, 4> out{};
  for (int i = 0; i < 4; ++i) out[i] = c_filtered(i) >= threshold;
  return out;
}

bool GrfContactDetector::step(double force_z, double dt) {
  filtered_ = lpf_.step(force_z, dt);
  return filtered_ >= threshold_;
}

bool velocity_gate(const Eigen::Vector3d& v_hat_filtered, double gate) {
  return v_hat_filtered.norm() > gate;
}

double slip_reject(const Eigen::Vector3d& foot_vel_world, double base_cov_v,
                   double threshold, double factor) {
  return foot_vel_world.norm() > threshold ? base_cov_v * factor : base_cov_v;
}

}  // namespace legodom
