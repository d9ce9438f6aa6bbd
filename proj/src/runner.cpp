// SPDX-License-Identifier: Apache-2.0

#include "legodom/runner.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace legodom {

using nlohmann::json;

Variant variant_from_name(const std::string& name) {
  if (name == "proposed") return Variant::Proposed;
  if (name == "contact_only" || name == "c_only") return Variant::ContactOnly;
  if (name == "velocity_only" || name == "v_only") return Variant::VelocityOnly;
  if (name == "grf") return Variant::GrfContact;
  if (name == "truth") return Variant::TruthContact;
  throw std::runtime_error("unknown estimator variant: " + name);
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Proposed: return "proposed";
    case Variant::ContactOnly: return "contact_only";
    case Variant::VelocityOnly: return "velocity_only";
    case Variant::GrfContact: return "grf";
    case Variant::TruthContact: return "truth";
  }
  return "proposed";
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  RunConfig c;
  if (j.contains("variant")) c.variant = variant_from_name(j["variant"].get<std::string>());
  c.slip_rejection = j.value("slip_rejection", c.slip_rejection);
  c.init_from_gt = j.value("init_from_gt", c.init_from_gt);
  if (j.contains("noise")) c.noise = NoiseConfig::from_json(j["noise"].dump());
  if (j.contains("thresholds")) {
    const auto& t = j["thresholds"];
    c.thresholds.contact = t.value("contact", c.thresholds.contact);
    c.thresholds.velocity_gate = t.value("velocity_gate", c.thresholds.velocity_gate);
    c.thresholds.slip = t.value("slip", c.thresholds.slip);
    c.thresholds.grf = t.value("grf", c.thresholds.grf);
    c.thresholds.lpf_contact_hz = t.value("lpf_contact_hz", c.thresholds.lpf_contact_hz);
    c.thresholds.lpf_velocity_hz = t.value("lpf_velocity_hz", c.thresholds.lpf_velocity_hz);
    c.thresholds.lpf_grf_hz = t.value("lpf_grf_hz", c.thresholds.lpf_grf_hz);
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("run config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

RunResult run_estimator(const TrajectoryLog& log, const RunConfig& config,
                        const NmnModel* model, const std::vector<GtRecord>* gt) {
  if (log.records.empty()) throw std::invalid_argument("run: empty log");
  const auto& records = log.records;
  const bool uses_nmn = config.variant == Variant::Proposed ||
                        config.variant == Variant::ContactOnly ||
                        config.variant == Variant::VelocityOnly;
  const bool uses_kinematics = config.variant != Variant::VelocityOnly;
  const bool uses_velocity = config.variant == Variant::Proposed ||
                             config.variant == Variant::VelocityOnly;
  if (uses_nmn && model == nullptr) {
    throw std::invalid_argument("run: variant needs a network model");
  }
  if (config.variant == Variant::TruthContact &&
      (gt == nullptr || gt->size() != records.size())) {
    throw std::invalid_argument("run: truth variant needs a matching ground-truth sidecar");
  }
  if (config.variant == Variant::GrfContact && !records.front().grf.has_value()) {
    throw std::invalid_argument("run: grf variant needs a grf channel in the log");
  }
  const RobotModel robot = log.robot_model();

  // Initial state: ground truth when available (and requested), else level
  // pose at the first tick.
  Eigen::Matrix3d r0 = Eigen::Matrix3d::Identity();
  Eigen::Vector3d v0 = Eigen::Vector3d::Zero();
  Eigen::Vector3d p0 = Eigen::Vector3d::Zero();
  if (config.init_from_gt) {
    if (records.front().gt_r) {
      r0 = *records.front().gt_r;
      v0 = *records.front().gt_v;
      p0 = *records.front().gt_p;
    } else if (gt != nullptr && !gt->empty()) {
      r0 = gt->front().r;
      v0 = gt->front().v;
      p0 = gt->front().p;
    } else {
      throw std::invalid_argument("run: init_from_gt set but no ground truth available");
    }
  }
  FilterState state = filter_init(config.noise, r0, v0, p0);

  LowPassFilter lpf_contact(config.thresholds.lpf_contact_hz);
  LowPassFilter lpf_velocity(config.thresholds.lpf_velocity_hz);
  std::array<GrfContactDetector, 4> grf_detectors{
      GrfContactDetector(config.thresholds.lpf_grf_hz, config.thresholds.grf),
      GrfContactDetector(config.thresholds.lpf_grf_hz, config.thresholds.grf),
      GrfContactDetector(config.thresholds.lpf_grf_hz, config.thresholds.grf),
      GrfContactDetector(config.thresholds.lpf_grf_hz, config.thresholds.grf)};
  Eigen::VectorXd hidden;
  if (uses_nmn) hidden = Eigen::VectorXd::Zero(model->hidden_dim());

  RunResult out;
  out.trajectory.reserve(records.size());
  const double nominal_dt = 1.0 / log.header.estimator_rate;

  for (size_t k = 0; k < records.size(); ++k) {
    const LogRecord& rec = records[k];
    const double dt = (k == 0) ? nominal_dt : rec.t - records[k - 1].t;

    // Network inference and signal conditioning.
    Eigen::Vector4d c_filtered = Eigen::Vector4d::Zero();
    Eigen::Vector3d v_filtered = Eigen::Vector3d::Zero();
    if (uses_nmn) {
      NmnOutput y = nmn_forward(*model, assemble_nmn_input(records, k), hidden);
      hidden = std::move(y.hidden);
      c_filtered = lpf_contact.step(y.contact_prob, dt);
      v_filtered = lpf_velocity.step(y.velocity, dt);
    }

    // Contact decision per source.
    std::array<bool, 4> want{};
    switch (config.variant) {
      case Variant::Proposed:
      case Variant::ContactOnly:
        want = nmn_contact(c_filtered, config.thresholds.contact);
        break;
      case Variant::GrfContact:
        for (int f = 0; f < 4; ++f) {
          want[f] = grf_detectors[f].step(rec.grf ? (*rec.grf)(f) : 0.0, dt);
        }
        break;
      case Variant::TruthContact:
        want = (*gt)[k].contact;
        break;
      case Variant::VelocityOnly:
        break;  // no contacts ever
    }

    // Slip detection on the previous tick's state and measurements, feeding
    // this tick's process noise.
    std::map<int, double> contact_cov_scale;
    if (config.slip_rejection && uses_kinematics && k > 0) {
      const LogRecord& prev = records[k - 1];
      for (const auto& [foot, slot] : state.contact_map) {
        const Eigen::Vector3d foot_vel = foot_velocity_world(
            robot, prev.q, prev.dq, prev.gyro - state.bias_gyro, state.rotation(),
            state.velocity(), foot);
        const double scaled = slip_reject(foot_vel, 1.0, config.thresholds.slip);
        if (scaled != 1.0) {
          contact_cov_scale[foot] = scaled;
          out.events.push_back({rec.t, "slip_inflate", foot});
        }
      }
    }

    if (k > 0) {
      ImuSample imu{records[k - 1].accel, records[k - 1].gyro, records[k - 1].t};
      state = propagate(state, imu, dt, config.noise, contact_cov_scale);
    }

    // Contact add/remove on decision edges (same tick).
    if (uses_kinematics) {
      for (int f = 0; f < 4; ++f) {
        const bool tracked = state.contact_map.count(f) != 0;
        if (want[f] && !tracked) {
          state = add_contact(state, f, robot, rec.q, config.noise);
          out.events.push_back({rec.t, "add_contact", f});
        } else if (!want[f] && tracked) {
          state = remove_contact(state, f);
          out.events.push_back({rec.t, "remove_contact", f});
        }
      }
    }

    // Stacked update: kinematics for every in-contact leg plus the gated
    // velocity measurement.
    std::vector<KinematicObs> kin;
    if (uses_kinematics) {
      for (const auto& [foot, slot] : state.contact_map) kin.push_back({foot, rec.q});
    }
    std::optional<Eigen::Vector3d> v_meas;
    if (uses_velocity && velocity_gate(v_filtered, config.thresholds.velocity_gate)) {
      v_meas = v_filtered;
    }
    if (!kin.empty() || v_meas) {
      UpdateResult res = stacked_update(state, robot, kin, v_meas, config.noise);
      if (res.applied) {
        for (const auto& obs : kin) out.events.push_back({rec.t, "update_kinematics", obs.foot});
        if (v_meas) out.events.push_back({rec.t, "update_velocity", -1});
        state = std::move(res.state);
      } else {
        out.events.push_back({rec.t, "skip_singular", -1});
      }
    }

    state.t = rec.t;
    out.trajectory.push_back({rec.t, state.rotation(), state.velocity(), state.position()});
  }
  return out;
}

void write_events(const std::string& path, const std::vector<FilterEvent>& events) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("events: cannot write " + path);
  for (const auto& e : events) {
    f << json{{"t", e.t}, {"type", e.type}, {"foot", e.foot}}.dump() << "\n";
  }
}

}  // namespace legodom
