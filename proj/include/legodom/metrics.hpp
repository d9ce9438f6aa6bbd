// SPDX-License-Identifier: Apache-2.0
//
// Trajectory evaluation: absolute trajectory error after initial-pose
// alignment and relative error over fixed-duration sub-trajectories.

#pragma once

#include <string>

#include "legodom/log.hpp"

namespace legodom {

/// Rigid transform making the estimate's first pose coincide with the
/// ground truth's first pose, applied to every pose and velocity.
/// Throws std::invalid_argument on empty input.
Trajectory align_initial(const Trajectory& est, const Trajectory& gt);

struct AteResult {
  double pos = 0.0;  // m
  double vel = 0.0;  // m/s
  double ori = 0.0;  // rad
};

/// RMSE over nearest-neighbor-paired samples (pairing tolerance in seconds)
/// of position, velocity and geodesic orientation errors. Alignment is the
/// caller's business (see evaluate).
/// Throws std::invalid_argument when no samples pair up.
AteResult ate(const Trajectory& est, const Trajectory& gt, double pair_tol = 0.002);

enum class ReAggregation { Rmse, Mean };

/// Relative error: for each window start (fixed stride) re-align the
/// estimate at the window start and take the end-of-window error; aggregate
/// across windows. Throws std::invalid_argument when the trajectory is
/// shorter than the window.
AteResult relative_error(const Trajectory& est, const Trajectory& gt,
                         double window_s = 10.0, double stride_s = 1.0,
                         ReAggregation agg = ReAggregation::Rmse,
                         double pair_tol = 0.002);

struct ErrorReport {
  AteResult ate;
  AteResult re;
  double re_window_s = 10.0;

  std::string to_json() const;
  /// Flat CSV row; `header` gives the matching column names.
  static std::string csv_header(const std::string& label_cols = "run");
  std::string csv_row(const std::string& label) const;
};

ErrorReport evaluate(const Trajectory& est, const Trajectory& gt,
                     double re_window_s = 10.0, double re_stride_s = 1.0,
                     ReAggregation agg = ReAggregation::Rmse);

/// Ground-truth sidecar as a Trajectory.
Trajectory gt_trajectory(const std::vector<GtRecord>& gt);

}  // namespace legodom
