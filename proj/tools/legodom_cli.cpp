// SPDX-License-Identifier: Apache-2.0
//
// Offline pipeline driver: simulate | train | run | eval | compare.
// Errors land on stderr as one JSON object; exit code is nonzero.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "legodom/metrics.hpp"
#include "legodom/runner.hpp"
#include "legodom/sim.hpp"
#include "legodom/train.hpp"

using namespace legodom;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int cmd_simulate(const std::string& robot_path, const std::string& profile,
                 const std::string& terrain_path, double duration, std::uint64_t seed,
                 double slip_prob, double slip_speed, double speed, bool noise,
                 double imu_rate, double link_jitter, const std::string& out_prefix) {
  RobotModel robot = robot_path.empty() ? default_quadruped() : RobotModel::load(robot_path);
  TerrainConfig cfg;
  if (!terrain_path.empty()) {
    cfg = TerrainConfig::from_json(json::parse(read_file(terrain_path)));
  } else {
    if (profile == "flat") {
      cfg.profile = TerrainConfig::Profile::Flat;
      cfg.slip_probability = 0.0;
    } else if (profile == "slippery") {
      cfg.profile = TerrainConfig::Profile::Slippery;
      cfg.slip_probability = 0.05;
    } else if (profile == "soft") {
      cfg.profile = TerrainConfig::Profile::SoftAnalog;
      cfg.slip_probability = 0.0;
    } else if (profile == "stand") {
      cfg.profile = TerrainConfig::Profile::Flat;
      cfg.slip_probability = 0.0;
      cfg.command.max_speed = 0.0;
      cfg.command.lateral_amp = 0.0;
      cfg.command.yaw_rate_amp = 0.0;
    } else {
      throw std::runtime_error("unknown profile " + profile);
    }
    cfg.duration = duration;
    if (slip_prob >= 0.0) cfg.slip_probability = slip_prob;
    if (slip_speed > 0.0) cfg.slip_speed = slip_speed;
    if (speed >= 0.0) cfg.command.max_speed = speed;
    cfg.noise.enabled = noise;
    if (imu_rate > 0.0) cfg.imu_rate = imu_rate;
    cfg.link_length_jitter = link_jitter;
  }
  SimResult sim = generate(robot, cfg, seed);
  sim.log.write(out_prefix + ".jsonl");
  write_ground_truth(out_prefix + ".gt.jsonl", sim.gt);
  std::cout << json{{"log", out_prefix + ".jsonl"},
                    {"ground_truth", out_prefix + ".gt.jsonl"},
                    {"ticks", sim.log.records.size()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_model, const std::string& out_report) {
  TrainConfig cfg = config_path.empty() ? TrainConfig{} : TrainConfig::load(config_path);
  Dataset ds = load_dataset_dir(data_dir, cfg.seq_len, cfg.val_fraction, cfg.seed);
  TrainOutput result = train(ds, cfg);
  result.model.save(out_model);
  if (!out_report.empty()) {
    std::ofstream f(out_report);
    f << result.report.to_json() << "\n";
  }
  const ValMetrics vm = evaluate_model(result.model, ds.val.empty() ? ds.train : ds.val);
  std::cout << json{{"model", out_model},
                    {"stopped_iter", result.report.stopped_iter},
                    {"wall_seconds", result.report.wall_seconds},
                    {"contact_accuracy", vm.contact_accuracy},
                    {"velocity_l1", vm.velocity_l1}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_run(const std::string& log_path, const std::string& config_path,
            const std::string& variant, bool slip_rejection, const std::string& model_path,
            const std::string& noise_path, const std::string& gt_path,
            const std::string& out_path, const std::string& events_path) {
  TrajectoryLog log = TrajectoryLog::read(log_path);
  RunConfig cfg;
  if (!config_path.empty()) cfg = RunConfig::load(config_path);
  if (!variant.empty()) cfg.variant = variant_from_name(variant);
  if (slip_rejection) cfg.slip_rejection = true;
  if (!noise_path.empty()) cfg.noise = NoiseConfig::load(noise_path);

  std::optional<NmnModel> model;
  if (!model_path.empty()) model = NmnModel::load(model_path);
  std::vector<GtRecord> gt;
  if (!gt_path.empty()) gt = read_ground_truth(gt_path);

  RunResult result = run_estimator(log, cfg, model ? &*model : nullptr,
                                   gt.empty() ? nullptr : &gt);
  write_trajectory(out_path, result.trajectory);
  if (!events_path.empty()) write_events(events_path, result.events);
  std::cout << json{{"trajectory", out_path},
                    {"ticks", result.trajectory.size()},
                    {"events", result.events.size()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path,
             const std::string& out_path, const std::string& csv_path,
             const std::string& label, double window) {
  const Trajectory est = read_trajectory(est_path);
  const Trajectory gt = gt_trajectory(read_ground_truth(gt_path));
  const ErrorReport report = evaluate(est, gt, window);
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    f << report.to_json() << "\n";
  }
  if (!csv_path.empty()) {
    std::ofstream f(csv_path);
    f << ErrorReport::csv_header() << "\n" << report.csv_row(label) << "\n";
  }
  std::cout << report.to_json() << "\n";
  return 0;
}

int cmd_compare(const std::string& config_path, const std::string& out_csv) {
  const json cfg = json::parse(read_file(config_path));
  TrajectoryLog log = TrajectoryLog::read(cfg.at("log").get<std::string>());
  std::vector<GtRecord> gt = read_ground_truth(cfg.at("ground_truth").get<std::string>());
  const Trajectory gt_traj = gt_trajectory(gt);

  std::optional<NmnModel> model;
  if (cfg.contains("model")) model = NmnModel::load(cfg["model"].get<std::string>());

  NoiseConfig noise;
  if (cfg.contains("noise")) noise = NoiseConfig::load(cfg["noise"].get<std::string>());

  const double window = cfg.value("re_window_s", 10.0);
  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot write " + out_csv);
  out << ErrorReport::csv_header("variant,slip_rejection") << "\n";
  for (const auto& run : cfg.at("runs")) {
    RunConfig rc;
    rc.variant = variant_from_name(run.at("variant").get<std::string>());
    rc.slip_rejection = run.value("slip_rejection", false);
    rc.noise = noise;
    RunResult res = run_estimator(log, rc, model ? &*model : nullptr, &gt);
    const ErrorReport report = evaluate(res.trajectory, gt_traj, window);
    out << report.csv_row(variant_name(rc.variant) + "," +
                          (rc.slip_rejection ? "on" : "off"))
        << "\n";
  }
  std::cout << json{{"table", out_csv}}.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proprioceptive state-estimation toolkit for legged robots"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic labeled trajectory");
  std::string robot_path, profile = "flat", terrain_path, out_prefix = "trajectory";
  double duration = 10.0, slip_prob = -1.0, slip_speed = -1.0, speed = -1.0,
         imu_rate = -1.0, link_jitter = 0.0;
  std::uint64_t seed = 0;
  bool noise = false;
  sim->add_option("--robot", robot_path, "Robot config JSON (default: built-in quadruped)");
  sim->add_option("--profile", profile, "flat | slippery | soft | stand");
  sim->add_option("--terrain-config", terrain_path, "Full terrain config JSON (overrides flags)");
  sim->add_option("--duration", duration, "Seconds");
  sim->add_option("--seed", seed, "RNG seed");
  sim->add_option("--slip-prob", slip_prob, "Slip probability per stance");
  sim->add_option("--slip-speed", slip_speed, "Slip speed, m/s");
  sim->add_option("--speed", speed, "Peak commanded speed, m/s");
  sim->add_flag("--sensor-noise", noise, "Add sensor noise to the emitted streams");
  sim->add_option("--imu-rate", imu_rate, "IMU rate in Hz (held below the estimator rate)");
  sim->add_option("--link-jitter", link_jitter, "Per-trajectory link length jitter fraction");
  sim->add_option("--out", out_prefix, "Output prefix (.jsonl and .gt.jsonl)");

  // train
  auto* tr = app.add_subcommand("train", "Train the measurement network on logs");
  std::string data_dir, train_config, out_model = "model.json", out_report;
  tr->add_option("--data", data_dir, "Directory of *.jsonl logs with .gt.jsonl sidecars")
      ->required();
  tr->add_option("--config", train_config, "Training config JSON");
  tr->add_option("--out", out_model, "Output model path");
  tr->add_option("--report", out_report, "Training report JSON path");

  // run
  auto* rn = app.add_subcommand("run", "Run an estimator variant over a log");
  std::string log_path, run_config, variant_str, model_path, noise_path, gt_path,
      out_traj = "estimate.jsonl", events_path;
  bool slip_flag = false;
  rn->add_option("--log", log_path, "Trajectory log")->required();
  rn->add_option("--config", run_config, "Run config JSON");
  rn->add_option("--variant", variant_str, "proposed | contact_only | velocity_only | grf | truth");
  rn->add_flag("--slip-rejection", slip_flag, "Enable slip rejection");
  rn->add_option("--model", model_path, "Network weight file");
  rn->add_option("--noise", noise_path, "Noise config JSON");
  rn->add_option("--gt", gt_path, "Ground-truth sidecar (truth variant / init)");
  rn->add_option("--out", out_traj, "Estimated trajectory output");
  rn->add_option("--events", events_path, "Filter event log output");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate an estimate against ground truth");
  std::string est_path, eval_gt, eval_out, eval_csv, eval_label = "run";
  double window = 10.0;
  ev->add_option("--est", est_path, "Estimated trajectory")->required();
  ev->add_option("--gt", eval_gt, "Ground-truth sidecar")->required();
  ev->add_option("--out", eval_out, "Error report JSON");
  ev->add_option("--csv", eval_csv, "Error report CSV row");
  ev->add_option("--label", eval_label, "CSV row label");
  ev->add_option("--window", window, "Relative-error window, seconds");

  // compare
  auto* cp = app.add_subcommand("compare", "Run a matrix of variants and emit a table");
  std::string compare_config, compare_out = "table.csv";
  cp->add_option("--config", compare_config, "Comparison config JSON")->required();
  cp->add_option("--out", compare_out, "Output CSV table");

  CLI11_PARSE(app, argc, argv);
  try {
    if (sim->parsed()) {
      return cmd_simulate(robot_path, profile, terrain_path, duration, seed, slip_prob,
                          slip_speed, speed, noise, imu_rate, link_jitter, out_prefix);
    }
    if (tr->parsed()) return cmd_train(data_dir, train_config, out_model, out_report);
    if (rn->parsed()) {
      return cmd_run(log_path, run_config, variant_str, slip_flag, model_path, noise_path,
                     gt_path, out_traj, events_path);
    }
    if (ev->parsed()) return cmd_eval(est_path, eval_gt, eval_out, eval_csv, eval_label, window);
    if (cp->parsed()) return cmd_compare(compare_config, compare_out);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
