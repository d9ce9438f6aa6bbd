// SPDX-License-Identifier: Apache-2.0

#include "legodom/log.hpp"

#include <fstream>
#include <stdexcept>

namespace legodom {

using nlohmann::json;

namespace {

json arr(const double* data, int n) {
  json a = json::array();
  for (int i = 0; i < n; ++i) a.push_back(data[i]);
  return a;
}

template <typename Vec>
Vec vec_from(const json& a, const char* name) {
  Vec v;
  if (!a.is_array() || static_cast<int>(a.size()) != v.size()) {
    throw std::runtime_error(std::string("log: bad array length for ") + name);
  }
  for (int i = 0; i < v.size(); ++i) v(i) = a[i].get<double>();
  return v;
}

Eigen::Matrix3d mat3_from(const json& a, const char* name) {
  if (!a.is_array() || a.size() != 9) {
    throw std::runtime_error(std::string("log: bad matrix length for ") + name);
  }
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = a[3 * r + c].get<double>();
  return m;
}

json mat3_to(const Eigen::Matrix3d& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

}  // namespace

void TrajectoryLog::write(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("log: cannot write " + path);
  json h = {{"schema_version", header.schema_version},
            {"estimator_rate", header.estimator_rate},
            {"imu_rate", header.imu_rate},
            {"seed", header.seed},
            {"robot", header.robot},
            {"terrain", header.terrain}};
  f << h.dump() << "\n";
  for (const auto& rec : records) {
    json r = {{"t", rec.t},
              {"accel", arr(rec.accel.data(), 3)},
              {"gyro", arr(rec.gyro.data(), 3)},
              {"q", arr(rec.q.data(), 12)},
              {"dq", arr(rec.dq.data(), 12)},
              {"q_des", arr(rec.q_des.data(), 12)}};
    if (rec.grf) r["grf"] = arr(rec.grf->data(), 4);
    if (rec.gt_r) r["gt_R"] = mat3_to(*rec.gt_r);
    if (rec.gt_v) r["gt_v"] = arr(rec.gt_v->data(), 3);
    if (rec.gt_p) r["gt_p"] = arr(rec.gt_p->data(), 3);
    f << r.dump() << "\n";
  }
}

TrajectoryLog TrajectoryLog::read(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("log: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("log: empty file " + path);

  TrajectoryLog log;
  json h = json::parse(line);
  log.header.schema_version = h.at("schema_version").get<int>();
  if (log.header.schema_version != kLogSchemaVersion) {
    throw std::runtime_error("log: unsupported schema_version");
  }
  log.header.estimator_rate = h.at("estimator_rate").get<double>();
  log.header.imu_rate = h.at("imu_rate").get<double>();
  log.header.seed = h.value("seed", std::uint64_t{0});
  log.header.robot = h.value("robot", json::object());
  log.header.terrain = h.value("terrain", json::object());

  double prev_t = -1.0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json r = json::parse(line);
    LogRecord rec;
    rec.t = r.at("t").get<double>();
    if (rec.t <= prev_t) throw std::runtime_error("log: timestamps not increasing");
    prev_t = rec.t;
    rec.accel = vec_from<Eigen::Vector3d>(r.at("accel"), "accel");
    rec.gyro = vec_from<Eigen::Vector3d>(r.at("gyro"), "gyro");
    rec.q = vec_from<Vector12d>(r.at("q"), "q");
    rec.dq = vec_from<Vector12d>(r.at("dq"), "dq");
    rec.q_des = vec_from<Vector12d>(r.at("q_des"), "q_des");
    if (r.contains("grf")) rec.grf = vec_from<Eigen::Vector4d>(r["grf"], "grf");
    if (r.contains("gt_R")) rec.gt_r = mat3_from(r["gt_R"], "gt_R");
    if (r.contains("gt_v")) rec.gt_v = vec_from<Eigen::Vector3d>(r["gt_v"], "gt_v");
    if (r.contains("gt_p")) rec.gt_p = vec_from<Eigen::Vector3d>(r["gt_p"], "gt_p");
    log.records.push_back(std::move(rec));
  }
  return log;
}

RobotModel TrajectoryLog::robot_model() const {
  if (header.robot.is_null() || header.robot.empty()) {
    throw std::runtime_error("log: header carries no robot model");
  }
  return RobotModel::from_json(header.robot.dump());
}

void write_ground_truth(const std::string& path, const std::vector<GtRecord>& gt) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("log: cannot write " + path);
  f << json{{"schema_version", kLogSchemaVersion}, {"type", "ground_truth"}}.dump() << "\n";
  for (const auto& g : gt) {
    json feet = json::array();
    for (const auto& fp : g.foot_w) feet.push_back(arr(fp.data(), 3));
    json r = {{"t", g.t},
              {"R", mat3_to(g.r)},
              {"v", arr(g.v.data(), 3)},
              {"p", arr(g.p.data(), 3)},
              {"v_body", arr(g.v_body.data(), 3)},
              {"contact", {g.contact[0], g.contact[1], g.contact[2], g.contact[3]}},
              {"foot_w", feet}};
    f << r.dump() << "\n";
  }
}

std::vector<GtRecord> read_ground_truth(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("log: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("log: empty file " + path);
  std::vector<GtRecord> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json r = json::parse(line);
    GtRecord g;
    g.t = r.at("t").get<double>();
    g.r = mat3_from(r.at("R"), "R");
    g.v = vec_from<Eigen::Vector3d>(r.at("v"), "v");
    g.p = vec_from<Eigen::Vector3d>(r.at("p"), "p");
    g.v_body = vec_from<Eigen::Vector3d>(r.at("v_body"), "v_body");
    const auto& c = r.at("contact");
    for (int i = 0; i < 4; ++i) g.contact[i] = c[i].get<bool>();
    const auto& feet = r.at("foot_w");
    for (int i = 0; i < 4; ++i) g.foot_w[i] = vec_from<Eigen::Vector3d>(feet[i], "foot_w");
    out.push_back(std::move(g));
  }
  return out;
}

void write_trajectory(const std::string& path, const Trajectory& traj) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("log: cannot write " + path);
  f << json{{"schema_version", kLogSchemaVersion}, {"type", "trajectory"}}.dump() << "\n";
  for (const auto& s : traj) {
    json r = {{"t", s.t}, {"R", mat3_to(s.r)}, {"v", arr(s.v.data(), 3)}, {"p", arr(s.p.data(), 3)}};
    f << r.dump() << "\n";
  }
}

Trajectory read_trajectory(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("log: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("log: empty file " + path);
  Trajectory out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json r = json::parse(line);
    TrajectorySample s;
    s.t = r.at("t").get<double>();
    s.r = mat3_from(r.at("R"), "R");
    s.v = vec_from<Eigen::Vector3d>(r.at("v"), "v");
    s.p = vec_from<Eigen::Vector3d>(r.at("p"), "p");
    out.push_back(s);
  }
  return out;
}

Eigen::VectorXd assemble_nmn_input(const std::vector<LogRecord>& records, std::size_t k) {
  const LogRecord& rec = records.at(k);
  const LogRecord& prev = records.at(k > 0 ? k - 1 : 0);
  Eigen::VectorXd m(42);
  m << rec.accel, rec.gyro, rec.q, rec.dq, prev.q_des;
  return m;
}

}  // namespace legodom
