// SPDX-License-Identifier: Apache-2.0

#include "legodom/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "legodom/lie.hpp"

namespace legodom {

Trajectory align_initial(const Trajectory& est, const Trajectory& gt) {
  if (est.empty() || gt.empty()) {
    throw std::invalid_argument("align_initial: empty trajectory");
  }
  // T = gt_0 * est_0^-1 acting on (R, p); velocities rotate.
  const Eigen::Matrix3d r_align = gt.front().r * est.front().r.transpose();
  const Eigen::Vector3d t_align = gt.front().p - r_align * est.front().p;
  Trajectory out = est;
  for (auto& s : out) {
    s.r = r_align * s.r;
    s.p = r_align * s.p + t_align;
    s.v = r_align * s.v;
  }
  return out;
}

namespace {

// Nearest-neighbor pairing on timestamps within tol; both inputs sorted.
std::vector<std::pair<int, int>> pair_samples(const Trajectory& est, const Trajectory& gt,
                                              double tol) {
  std::vector<std::pair<int, int>> pairs;
  int j = 0;
  for (int i = 0; i < static_cast<int>(est.size()); ++i) {
    while (j + 1 < static_cast<int>(gt.size()) &&
           std::abs(gt[j + 1].t - est[i].t) <= std::abs(gt[j].t - est[i].t)) {
      ++j;
    }
    if (std::abs(gt[j].t - est[i].t) <= tol) pairs.emplace_back(i, j);
  }
  return pairs;
}

AteResult rmse_over_pairs(const Trajectory& est, const Trajectory& gt,
                          const std::vector<std::pair<int, int>>& pairs) {
  double sp = 0.0, sv = 0.0, so = 0.0;
  for (const auto& [i, j] : pairs) {
    sp += (est[i].p - gt[j].p).squaredNorm();
    sv += (est[i].v - gt[j].v).squaredNorm();
    so += so3_log(renormalize_rotation(gt[j].r.transpose() * est[i].r)).squaredNorm();
  }
  const double inv = 1.0 / static_cast<double>(pairs.size());
  return {std::sqrt(sp * inv), std::sqrt(sv * inv), std::sqrt(so * inv)};
}

}  // namespace

AteResult ate(const Trajectory& est, const Trajectory& gt, double pair_tol) {
  const auto pairs = pair_samples(est, gt, pair_tol);
  if (pairs.empty()) throw std::invalid_argument("ate: no paired samples");
  return rmse_over_pairs(est, gt, pairs);
}

AteResult relative_error(const Trajectory& est, const Trajectory& gt, double window_s,
                         double stride_s, ReAggregation agg, double pair_tol) {
  if (est.empty() || gt.empty()) throw std::invalid_argument("relative_error: empty input");
  const double t0 = std::max(est.front().t, gt.front().t);
  const double t_end = std::min(est.back().t, gt.back().t);
  if (t_end - t0 < window_s) {
    throw std::invalid_argument("relative_error: trajectory shorter than the window");
  }

  const auto pairs = pair_samples(est, gt, pair_tol);
  if (pairs.empty()) throw std::invalid_argument("relative_error: no paired samples");

  double sp = 0.0, sv = 0.0, so = 0.0;
  int count = 0;
  size_t start_idx = 0;
  for (double ws = t0; ws + window_s <= t_end + 1e-9; ws += stride_s) {
    // First paired sample at/after the window start, last within the window.
    while (start_idx < pairs.size() && est[pairs[start_idx].first].t < ws - 1e-9) ++start_idx;
    if (start_idx >= pairs.size()) break;
    size_t end_idx = start_idx;
    for (size_t k = start_idx; k < pairs.size(); ++k) {
      if (est[pairs[k].first].t <= ws + window_s + 1e-9) {
        end_idx = k;
      } else {
        break;
      }
    }
    const auto& [es, gs] = pairs[start_idx];
    const auto& [ee, ge] = pairs[end_idx];

    // Re-align at the window start.
    const Eigen::Matrix3d r_align = gt[gs].r * est[es].r.transpose();
    const Eigen::Vector3d t_align = gt[gs].p - r_align * est[es].p;
    const Eigen::Vector3d p_err = r_align * est[ee].p + t_align - gt[ge].p;
    const Eigen::Vector3d v_err = r_align * est[ee].v - gt[ge].v;
    const double o_err =
        so3_log(renormalize_rotation(gt[ge].r.transpose() * (r_align * est[ee].r))).norm();

    if (agg == ReAggregation::Rmse) {
      sp += p_err.squaredNorm();
      sv += v_err.squaredNorm();
      so += o_err * o_err;
    } else {
      sp += p_err.norm();
      sv += v_err.norm();
      so += o_err;
    }
    ++count;
  }
  if (count == 0) throw std::invalid_argument("relative_error: no complete window");
  const double inv = 1.0 / count;
  if (agg == ReAggregation::Rmse) {
    return {std::sqrt(sp * inv), std::sqrt(sv * inv), std::sqrt(so * inv)};
  }
  return {sp * inv, sv * inv, so * inv};
}

std::string ErrorReport::to_json() const {
  nlohmann::json root = {
      {"ate", {{"pos", ate.pos}, {"vel", ate.vel}, {"ori", ate.ori}}},
      {"re",
       {{"pos", re.pos}, {"vel", re.vel}, {"ori", re.ori}, {"window_s", re_window_s}}}};
  return root.dump(2);
}

std::string ErrorReport::csv_header(const std::string& label_cols) {
  return label_cols + ",ate_pos,ate_vel,ate_ori,re_pos,re_vel,re_ori";
}

std::string ErrorReport::csv_row(const std::string& label) const {
  std::ostringstream ss;
  ss.precision(12);
  ss << label << "," << ate.pos << "," << ate.vel << "," << ate.ori << "," << re.pos << ","
     << re.vel << "," << re.ori;
  return ss.str();
}

ErrorReport evaluate(const Trajectory& est, const Trajectory& gt, double re_window_s,
                     double re_stride_s, ReAggregation agg) {
  const Trajectory aligned = align_initial(est, gt);
  ErrorReport report;
  report.ate = ate(aligned, gt);
  report.re = relative_error(aligned, gt, re_window_s, re_stride_s, agg);
  report.re_window_s = re_window_s;
  return report;
}

Trajectory gt_trajectory(const std::vector<GtRecord>& gt) {
  Trajectory out;
  out.reserve(gt.size());
  for (const auto& g : gt) out.push_back({g.t, g.r, g.v, g.p});
  return out;
}

}  // namespace legodom
