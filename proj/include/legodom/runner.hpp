// SPDX-License-Identifier: Apache-2.0
//
// Offline estimator pipeline over a trajectory log. Each tick: network
// inference and low-pass filtering, contact decisions (network / force /
// ground-truth source), contact add/remove on decision edges, strapdown
// propagation with the held IMU sample, then one stacked update from the
// in-contact legs plus the gated velocity measurement. Slip rejection
// inflates the slipping foot's contact covariance for that tick.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "legodom/filter.hpp"
#include "legodom/log.hpp"
#include "legodom/nmn.hpp"
#include "legodom/signal.hpp"

namespace legodom {

enum class Variant {
  Proposed,      // network contact + gated network velocity
  ContactOnly,   // network contact, no velocity measurement
  VelocityOnly,  // network velocity only, no leg kinematics
  GrfContact,    // force-thresholded contact, no velocity measurement
  TruthContact,  // ground-truth contact flags, no velocity measurement
};

Variant variant_from_name(const std::string& name);
std::string variant_name(Variant v);

struct RunThresholds {
  double contact = kContactThreshold;
  double velocity_gate = kVelocityGate;
  double slip = kSlipThreshold;
  double grf = kGrfThreshold;
  double lpf_contact_hz = kContactLpfHz;
  double lpf_velocity_hz = kVelocityLpfHz;
  double lpf_grf_hz = kGrfLpfHz;
};

struct RunConfig {
  Variant variant = Variant::Proposed;
  bool slip_rejection = false;
  NoiseConfig noise;
  RunThresholds thresholds;
  bool init_from_gt = true;  // align the initial state with the ground truth

  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::string& path);
};

/// One filter event, for the run's audit trail.
struct FilterEvent {
  double t = 0.0;
  std::string type;  // add_contact, remove_contact, update_kinematics,
                     // update_velocity, slip_inflate, skip_singular
  int foot = -1;
};

struct RunResult {
  Trajectory trajectory;
  std::vector<FilterEvent> events;
};

/// Runs the configured estimator over a log. `gt` is required by the
/// TruthContact variant and by init_from_gt when the log carries no inline
/// ground truth; `model` is required by the network-driven variants.
/// Throws std::invalid_argument on a variant/log/model mismatch.
RunResult run_estimator(const TrajectoryLog& log, const RunConfig& config,
                        const NmnModel* model = nullptr,
                        const std::vector<GtRecord>* gt = nullptr);

void write_events(const std::string& path, const std::vector<FilterEvent>& events);

}  // namespace legodom
