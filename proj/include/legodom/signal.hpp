// SPDX-License-Identifier: Apache-2.0
//
// Signal conditioning between raw measurements / network outputs and the
// filter: first-order low-pass filtering, contact thresholding, the
// velocity-measurement gate and slip rejection.

#pragma once

#include <Eigen/Core>
#include <array>

namespace legodom {

/// Discrete first-order low-pass filter, alpha = dt / (dt + 1/(2 pi f_c)).
/// The first sample initializes the output.
class LowPassFilter {
 public:
  explicit LowPassFilter(double cutoff_hz);

  Eigen::VectorXd step(const Eigen::VectorXd& x, double dt);
  double step(double x, double dt);

  bool initialized() const { return initialized_; }
  double cutoff_hz() const { return cutoff_hz_; }
  void reset() { initialized_ = false; }

 private:
  double cutoff_hz_;
  bool initialized_ = false;
  Eigen::VectorXd y_;
};

/// Default thresholds; each is overridable through the run configuration.
inline constexpr double kContactThreshold = 0.5;   // on filtered probability
inline constexpr double kGrfThreshold = 40.0;      // N, on filtered force
inline constexpr double kVelocityGate = 0.1;       // m/s, strict >
inline constexpr double kSlipThreshold = 0.4;      // m/s, strict >
inline constexpr double kSlipCovFactor = 10.0;
inline constexpr double kContactLpfHz = 40.0;
inline constexpr double kVelocityLpfHz = 10.0;
inline constexpr double kGrfLpfHz = 10.0;

/// Per-foot contact from filtered probabilities: in contact iff c >= threshold.
std::array<bool, 4> nmn_contact(const Eigen::Vector4d& c_filtered,
                                double threshold = kContactThreshold);

/// Ground-reaction-force contact baseline: 10 Hz low pass, then >= 40 N.
class GrfContactDetector {
 public:
  explicit GrfContactDetector(double cutoff_hz = kGrfLpfHz,
                              double threshold_newton = kGrfThreshold)
      : lpf_(cutoff_hz), threshold_(threshold_newton) {}

  bool step(double force_z, double dt);
  double filtered() const { return filtered_; }

 private:
  LowPassFilter lpf_;
  double threshold_;
  double filtered_ = 0.0;
};

/// True iff the filtered velocity magnitude exceeds the gate (strict >).
bool velocity_gate(const Eigen::Vector3d& v_hat_filtered, double gate = kVelocityGate);

/// Contact-velocity covariance with slip rejection applied: inflated by ten
/// when the foot speed exceeds the threshold (strict >), never decreased.
double slip_reject(const Eigen::Vector3d& foot_vel_world, double base_cov_v,
                   double threshold = kSlipThreshold, double factor = kSlipCovFactor);

/// Per-foot contact decision with provenance, as consumed by the runner.
struct ContactDecision {
  std::array<bool, 4> in_contact{};
  std::array<bool, 4> slip{};  // only meaningful where in_contact is set
  enum class Source { Nmn, Grf, Truth } source = Source::Nmn;
};

}  // namespace legodom
