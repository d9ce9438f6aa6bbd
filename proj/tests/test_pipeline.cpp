// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "legodom/metrics.hpp"
#include "legodom/runner.hpp"
#include "legodom/sim.hpp"

using namespace legodom;

namespace {

SimResult make_sim(double duration, double slip_prob, bool noise, std::uint64_t seed) {
  TerrainConfig cfg;
  cfg.duration = duration;
  cfg.slip_probability = slip_prob;
  if (slip_prob > 0.0) cfg.profile = TerrainConfig::Profile::Slippery;
  cfg.noise.enabled = noise;
  return generate(default_quadruped(), cfg, seed);
}

// Zero network whose velocity head carries a constant bias: the contact
// probabilities sit at 0.5 (in contact by the >= convention) and the
// velocity output passes the measurement gate.
NmnModel biased_test_model() {
  NmnModel m = NmnModel::zeros(kNmnInputDim, 16, 8, 8);
  m.mlp[2].b(4) = 0.25;
  return m;
}

int count_events(const std::vector<FilterEvent>& events, const std::string& type) {
  int n = 0;
  for (const auto& e : events) n += (e.type == type);
  return n;
}

}  // namespace

TEST_CASE("log file roundtrip") {
  namespace fs = std::filesystem;
  const SimResult sim = make_sim(0.5, 0.0, true, 9);
  const std::string path = (fs::temp_directory_path() / "legodom_log_rt.jsonl").string();
  sim.log.write(path);
  const TrajectoryLog loaded = TrajectoryLog::read(path);

  CHECK(loaded.records.size() == sim.log.records.size());
  CHECK(loaded.header.seed == 9);
  CHECK(loaded.header.estimator_rate == 500.0);
  for (size_t k = 0; k < loaded.records.size(); k += 19) {
    CHECK((loaded.records[k].q - sim.log.records[k].q).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.records[k].accel - sim.log.records[k].accel).cwiseAbs().maxCoeff() == 0.0);
    CHECK((*loaded.records[k].gt_p - *sim.log.records[k].gt_p).cwiseAbs().maxCoeff() == 0.0);
  }
  const RobotModel robot = loaded.robot_model();
  CHECK(robot.legs[0].name == "LF");
  std::remove(path.c_str());
}

TEST_CASE("log rejects corrupt input") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "legodom_log_bad.jsonl").string();
  {
    std::ofstream f(path);
    f << R"({"schema_version":1,"estimator_rate":500.0,"imu_rate":500.0})" << "\n";
    f << R"({"t":0.0,"accel":[0,0,9.81],"gyro":[0,0,0],"q":[0,0,0,0,0,0,0,0,0,0,0,0],)"
      << R"("dq":[0,0,0,0,0,0,0,0,0,0,0,0],"q_des":[0,0,0,0,0,0,0,0,0,0,0,0]})" << "\n";
    f << R"({"t":0.0,"accel":[0,0,9.81],"gyro":[0,0,0],"q":[0,0,0,0,0,0,0,0,0,0,0,0],)"
      << R"("dq":[0,0,0,0,0,0,0,0,0,0,0,0],"q_des":[0,0,0,0,0,0,0,0,0,0,0,0]})" << "\n";
  }
  CHECK_THROWS(TrajectoryLog::read(path));  // duplicate timestamp
  std::remove(path.c_str());
}

TEST_CASE("noise-free closure with truth contacts") {
  const SimResult sim = make_sim(3.0, 0.0, false, 17);
  RunConfig cfg;
  cfg.variant = Variant::TruthContact;
  const RunResult res = run_estimator(sim.log, cfg, nullptr, &sim.gt);

  const Trajectory gt = gt_trajectory(sim.gt);
  const AteResult err = ate(res.trajectory, gt);
  CHECK(err.pos < 1e-6);
  CHECK(err.ori < 1e-8);
  CHECK(count_events(res.events, "update_kinematics") > 1000);
}

TEST_CASE("variant structure: which updates run") {
  const SimResult sim = make_sim(1.0, 0.0, false, 23);
  const NmnModel model = biased_test_model();

  SUBCASE("velocity-only never touches the legs") {
    RunConfig cfg;
    cfg.variant = Variant::VelocityOnly;
    const RunResult res = run_estimator(sim.log, cfg, &model);
    CHECK(count_events(res.events, "update_kinematics") == 0);
    CHECK(count_events(res.events, "add_contact") == 0);
    CHECK(count_events(res.events, "update_velocity") > 100);
  }
  SUBCASE("contact-only never uses the velocity channel") {
    RunConfig cfg;
    cfg.variant = Variant::ContactOnly;
    const RunResult res = run_estimator(sim.log, cfg, &model);
    CHECK(count_events(res.events, "update_velocity") == 0);
    CHECK(count_events(res.events, "update_kinematics") > 100);
  }
  SUBCASE("proposed uses both") {
    RunConfig cfg;
    cfg.variant = Variant::Proposed;
    const RunResult res = run_estimator(sim.log, cfg, &model);
    CHECK(count_events(res.events, "update_velocity") > 100);
    CHECK(count_events(res.events, "update_kinematics") > 100);
  }
  SUBCASE("network variants require a model") {
    RunConfig cfg;
    cfg.variant = Variant::Proposed;
    CHECK_THROWS_AS(run_estimator(sim.log, cfg, nullptr), std::invalid_argument);
  }
}

TEST_CASE("grf variant") {
  const SimResult sim = make_sim(1.5, 0.0, false, 29);
  RunConfig cfg;
  cfg.variant = Variant::GrfContact;

  const RunResult res = run_estimator(sim.log, cfg);
  CHECK(count_events(res.events, "add_contact") >= 4);
  CHECK(count_events(res.events, "update_kinematics") > 100);

  TrajectoryLog stripped = sim.log;
  for (auto& r : stripped.records) r.grf.reset();
  CHECK_THROWS_AS(run_estimator(stripped, cfg), std::invalid_argument);
}

TEST_CASE("truth variant requires ground truth") {
  const SimResult sim = make_sim(0.5, 0.0, false, 31);
  RunConfig cfg;
  cfg.variant = Variant::TruthContact;
  CHECK_THROWS_AS(run_estimator(sim.log, cfg, nullptr, nullptr), std::invalid_argument);
}

TEST_CASE("slip rejection fires on slipping feet") {
  const SimResult sim = make_sim(20.0, 0.3, false, 37);
  RunConfig cfg;
  cfg.variant = Variant::TruthContact;
  cfg.slip_rejection = true;
  const RunResult with = run_estimator(sim.log, cfg, nullptr, &sim.gt);
  CHECK(count_events(with.events, "slip_inflate") > 10);

  cfg.slip_rejection = false;
  const RunResult without = run_estimator(sim.log, cfg, nullptr, &sim.gt);
  CHECK(count_events(without.events, "slip_inflate") == 0);
}

TEST_CASE("end-to-end determinism") {
  const SimResult sim = make_sim(1.0, 0.05, true, 41);
  RunConfig cfg;
  cfg.variant = Variant::Proposed;
  const NmnModel model = biased_test_model();
  const RunResult a = run_estimator(sim.log, cfg, &model, &sim.gt);
  const RunResult b = run_estimator(sim.log, cfg, &model, &sim.gt);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (size_t k = 0; k < a.trajectory.size(); ++k) {
    CHECK((a.trajectory[k].p - b.trajectory[k].p).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.trajectory[k].r - b.trajectory[k].r).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(a.events.size() == b.events.size());
}

TEST_CASE("trajectory and event files") {
  namespace fs = std::filesystem;
  const SimResult sim = make_sim(0.5, 0.0, false, 43);
  RunConfig cfg;
  cfg.variant = Variant::TruthContact;
  const RunResult res = run_estimator(sim.log, cfg, nullptr, &sim.gt);

  const std::string tpath = (fs::temp_directory_path() / "legodom_traj.jsonl").string();
  write_trajectory(tpath, res.trajectory);
  const Trajectory loaded = read_trajectory(tpath);
  CHECK(loaded.size() == res.trajectory.size());
  CHECK((loaded[10].p - res.trajectory[10].p).norm() == 0.0);
  std::remove(tpath.c_str());

  const std::string epath = (fs::temp_directory_path() / "legodom_events.jsonl").string();
  write_events(epath, res.events);
  std::ifstream f(epath);
  int lines = 0;
  std::string line;
  while (std::getline(f, line)) ++lines;
  CHECK(lines == static_cast<int>(res.events.size()));
  std::remove(epath.c_str());
}

TEST_CASE("run config json") {
  const RunConfig cfg = RunConfig::from_json(R"({
    "variant": "grf",
    "slip_rejection": true,
    "thresholds": {"grf": 35.0, "contact": 0.6},
    "noise": {"accel": 0.05}
  })");
  CHECK(cfg.variant == Variant::GrfContact);
  CHECK(cfg.slip_rejection);
  CHECK(cfg.thresholds.grf == 35.0);
  CHECK(cfg.thresholds.contact == 0.6);
  CHECK(cfg.noise.accel_cov == 0.05);
  CHECK(cfg.noise.gyro_cov == 1e-5);  // untouched default
}
