// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: runs every release criterion end to end and prints one
// pass/fail line per criterion. Exit code is the number of failures.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "legodom/metrics.hpp"
#include "legodom/runner.hpp"
#include "legodom/sim.hpp"
#include "legodom/train.hpp"

using namespace legodom;

namespace {

struct Criterion {
  int id;
  std::string name;
  bool pass = false;
  std::string detail;
};

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

std::mt19937_64 arng(20260809);

double urand(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(arng);
}

Eigen::Vector3d rand_vec(double s) { return {urand(-s, s), urand(-s, s), urand(-s, s)}; }

Vector12d rand_pose() {
  Vector12d q;
  for (int i = 0; i < 12; ++i) q(i) = urand(-0.5, 0.5);
  return q;
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------------

Criterion criterion_closure() {
  Criterion c{1, "noise-free closure (truth contacts, 10 s trot)"};
  TerrainConfig cfg;
  cfg.duration = 10.0;
  cfg.slip_probability = 0.0;
  const SimResult sim = generate(default_quadruped(), cfg, 100);

  RunConfig run;
  run.variant = Variant::TruthContact;
  const double t0 = now_seconds();
  const RunResult res = run_estimator(sim.log, run, nullptr, &sim.gt);
  const double elapsed = now_seconds() - t0;

  const AteResult err = ate(res.trajectory, gt_trajectory(sim.gt));
  c.pass = err.pos < 1e-4 && err.ori < 1e-5 && elapsed < 5.0;
  c.detail = "ate_pos=" + fmt(err.pos) + " m, ate_ori=" + fmt(err.ori) +
             " rad, runtime=" + fmt(elapsed) + " s";
  return c;
}

Criterion criterion_zero_innovation() {
  Criterion c{2, "zero-innovation fixed point (1000 exact-state updates)"};
  const NoiseConfig noise;
  const RobotModel robot = default_quadruped();
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    FilterState s = filter_init(noise, so3_exp(rand_vec(1.2)), rand_vec(0.5), rand_vec(1.5));
    const Vector12d q = rand_pose();
    const int foot = i % 4;
    s = add_contact(s, foot, robot, q, noise);

    UpdateResult res = update_kinematics(s, robot, foot, q, noise);
    const Eigen::Vector3d v_body = s.rotation().transpose() * s.velocity();
    res = update_velocity(res.state, v_body, noise);

    double delta = (res.state.x.matrix() - s.x.matrix()).cwiseAbs().maxCoeff();
    delta = std::max(delta, (res.state.bias_gyro - s.bias_gyro).cwiseAbs().maxCoeff());
    delta = std::max(delta, (res.state.bias_accel - s.bias_accel).cwiseAbs().maxCoeff());
    worst = std::max(worst, delta);
  }
  c.pass = worst < 1e-10;
  c.detail = "max state change = " + fmt(worst);
  return c;
}

Criterion criterion_covariance_health() {
  Criterion c{3, "covariance health over 1e4 propagate/update cycles"};
  const NoiseConfig noise;
  const RobotModel robot = default_quadruped();
  FilterState s = filter_init(noise, Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero(),
                              Eigen::Vector3d(0, 0, 0.38));
  s = add_contact(s, 0, robot, rand_pose(), noise);

  double worst_asym = 0.0, worst_eig = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const ImuSample imu{rand_vec(2.0) + Eigen::Vector3d(0, 0, 9.81), rand_vec(0.5),
                        i * 2e-3};
    s = propagate(s, imu, 2e-3, noise);
    const Vector12d q = rand_pose();
    if (i % 11 == 0) {
      const int foot = 1 + (i / 11) % 3;
      if (s.contact_map.count(foot) == 0) {
        s = add_contact(s, foot, robot, q, noise);
      } else {
        s = remove_contact(s, foot);
      }
    }
    std::vector<KinematicObs> obs;
    for (const auto& [foot, slot] : s.contact_map) obs.push_back({foot, q});
    const UpdateResult res = stacked_update(s, robot, obs, rand_vec(0.3), noise);
    if (res.applied) s = res.state;

    worst_asym = std::max(worst_asym, (s.p_cov - s.p_cov.transpose()).cwiseAbs().maxCoeff());
    const double ev =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.p_cov).eigenvalues().minCoeff();
    worst_eig = std::min(worst_eig, ev);
  }
  c.pass = worst_asym < 1e-9 && worst_eig >= -1e-10;
  c.detail = "max asymmetry = " + fmt(worst_asym) + ", min eigenvalue = " + fmt(worst_eig);
  return c;
}

Criterion criterion_lie_suite() {
  Criterion c{4, "lie suite: exp/log roundtrip, series, adjoint"};
  double worst_rt = 0.0, worst_series = 0.0, worst_adj = 0.0;

  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector3d axis = rand_vec(1.0).normalized();
    const Eigen::Vector3d w = urand(1e-10, M_PI - 0.1) * axis;
    worst_rt = std::max(worst_rt, (so3_log(so3_exp(w)) - w).norm());
  }
  for (int i = 0; i < 200; ++i) {
    const int cols = 1 + i % 4;
    Eigen::VectorXd xi(3 + 3 * cols);
    for (int j = 0; j < xi.size(); ++j) xi(j) = urand(-1.0, 1.0);
    if (xi.norm() > 5.0) xi *= 5.0 / xi.norm();
    Eigen::MatrixXd series = Eigen::MatrixXd::Identity(3 + cols, 3 + cols);
    Eigen::MatrixXd pow = series;
    const Eigen::MatrixXd wedge = sek3_wedge(xi);
    for (int k = 1; k <= 30; ++k) {
      pow = (pow * wedge / static_cast<double>(k)).eval();
      series += pow;
    }
    worst_series =
        std::max(worst_series, (sek3_exp(xi).matrix() - series).cwiseAbs().maxCoeff());
  }
  for (int i = 0; i < 100; ++i) {
    const int cols = 2 + i % 3;
    Eigen::VectorXd seed(3 + 3 * cols), xi(3 + 3 * cols);
    for (int j = 0; j < seed.size(); ++j) seed(j) = urand(-1.0, 1.0);
    for (int j = 0; j < xi.size(); ++j) xi(j) = urand(-0.5, 0.5);
    const GroupElement a = sek3_exp(seed);
    const Eigen::MatrixXd lhs = compose(sek3_exp(adjoint(a) * xi), a).matrix();
    const Eigen::MatrixXd rhs = compose(a, sek3_exp(xi)).matrix();
    worst_adj = std::max(worst_adj, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  c.pass = worst_rt < 1e-10 && worst_series < 1e-10 && worst_adj < 1e-8;
  c.detail = "roundtrip=" + fmt(worst_rt) + ", series=" + fmt(worst_series) +
             ", adjoint=" + fmt(worst_adj);
  return c;
}

Criterion criterion_jacobian_gradients() {
  Criterion c{5, "leg Jacobian and trainer gradients vs finite differences"};
  const RobotModel robot = default_quadruped();

  double worst_jac = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vector12d q = rand_pose();
    const int leg = i % 4;
    const Matrix3x12d jac = jacobian(robot, q, leg);
    for (int col = 3 * leg; col < 3 * leg + 3; ++col) {
      Vector12d qp = q, qm = q;
      qp(col) += 1e-6;
      qm(col) -= 1e-6;
      const Eigen::Vector3d fd =
          (fk_position(robot, qp, leg) - fk_position(robot, qm, leg)) / 2e-6;
      worst_jac = std::max(worst_jac, (jac.col(col) - fd).cwiseAbs().maxCoeff());
    }
  }

  // Tiny-model gradient check across every tensor.
  NmnModel model = NmnModel::zeros(kNmnInputDim, 8, 16, 8);
  {
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    auto fill = [&](Eigen::MatrixXd& w) {
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i2 = 0; i2 < w.rows(); ++i2) w(i2, j) = u(arng);
    };
    auto fillv = [&](Eigen::VectorXd& v) {
      for (Eigen::Index i2 = 0; i2 < v.size(); ++i2) v(i2) = u(arng);
    };
    fill(model.gru.w_ih);
    fill(model.gru.w_hh);
    fillv(model.gru.b_ih);
    fillv(model.gru.b_hh);
    for (auto& l : model.mlp) {
      fill(l.w);
      fillv(l.b);
    }
  }
  std::vector<TrainSequence> batch;
  for (int j = 0; j < 2; ++j) {
    TrainSequence s;
    s.inputs = Eigen::MatrixXd(kNmnInputDim, 5);
    s.contact = Eigen::MatrixXd(4, 5);
    s.velocity = Eigen::MatrixXd(3, 5);
    for (int t = 0; t < 5; ++t) {
      for (int i = 0; i < kNmnInputDim; ++i) s.inputs(i, t) = urand(-1, 1);
      for (int f = 0; f < 4; ++f) s.contact(f, t) = urand(0, 1) < 0.5 ? 0.0 : 1.0;
      for (int d = 0; d < 3; ++d) s.velocity(d, t) = urand(0.4, 1.2) * (urand(0, 1) < 0.5 ? -1 : 1);
    }
    batch.push_back(std::move(s));
  }
  TrainConfig cfg;
  cfg.lambda = 50.0;
  cfg.smooth_target = SmoothTarget::Velocity;
  const Gradients g = backward(model, batch, cfg);

  double worst_grad = 0.0;
  auto check = [&](Eigen::Map<Eigen::VectorXd> param, const double* grad, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double backup = param(i);
      param(i) = backup + 1e-5;
      const double lp = batch_loss(model, batch, cfg);
      param(i) = backup - 1e-5;
      const double lm = batch_loss(model, batch, cfg);
      param(i) = backup;
      const double fd = (lp - lm) / 2e-5;
      const double rel = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
      worst_grad = std::max(worst_grad, rel);
    }
  };
  check({model.gru.w_ih.data(), model.gru.w_ih.size()}, g.gru_w_ih.data(), g.gru_w_ih.size());
  check({model.gru.w_hh.data(), model.gru.w_hh.size()}, g.gru_w_hh.data(), g.gru_w_hh.size());
  check({model.gru.b_ih.data(), model.gru.b_ih.size()}, g.gru_b_ih.data(), g.gru_b_ih.size());
  check({model.gru.b_hh.data(), model.gru.b_hh.size()}, g.gru_b_hh.data(), g.gru_b_hh.size());
  for (int l = 0; l < 3; ++l) {
    check({model.mlp[l].w.data(), model.mlp[l].w.size()}, g.mlp[l].w.data(), g.mlp[l].w.size());
    check({model.mlp[l].b.data(), model.mlp[l].b.size()}, g.mlp[l].b.data(), g.mlp[l].b.size());
  }

  c.pass = worst_jac < 1e-6 && worst_grad < 1e-4;
  c.detail = "jacobian fd = " + fmt(worst_jac) + ", gradient rel = " + fmt(worst_grad);
  return c;
}

Criterion criterion_forward_oracle() {
  Criterion c{6, "network forward pass vs dense-algebra oracle (100 cases)"};
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int hd = 8 + 8 * (i % 3);
    NmnModel m = NmnModel::zeros(kNmnInputDim, hd, 16, 8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto fill = [&](Eigen::MatrixXd& w) {
      for (Eigen::Index jj = 0; jj < w.cols(); ++jj)
        for (Eigen::Index ii = 0; ii < w.rows(); ++ii) w(ii, jj) = u(arng);
    };
    auto fillv = [&](Eigen::VectorXd& v) {
      for (Eigen::Index ii = 0; ii < v.size(); ++ii) v(ii) = u(arng);
    };
    fill(m.gru.w_ih);
    fill(m.gru.w_hh);
    fillv(m.gru.b_ih);
    fillv(m.gru.b_hh);
    for (auto& l : m.mlp) {
      fill(l.w);
      fillv(l.b);
    }
    fillv(m.norm_mean);
    m.norm_std = Eigen::VectorXd::Constant(kNmnInputDim, 1.0) +
                 0.5 * Eigen::VectorXd::Random(kNmnInputDim).cwiseAbs();

    Eigen::VectorXd input(kNmnInputDim), h(hd);
    for (int j = 0; j < kNmnInputDim; ++j) input(j) = u(arng) * 2.0;
    for (int j = 0; j < hd; ++j) h(j) = u(arng) * 0.9;

    // Straight-line scalar evaluation.
    Eigen::VectorXd x(kNmnInputDim);
    for (int j = 0; j < kNmnInputDim; ++j) x(j) = (input(j) - m.norm_mean(j)) / m.norm_std(j);
    Eigen::VectorXd h1(hd);
    for (int r = 0; r < hd; ++r) {
      double az = m.gru.b_ih(r) + m.gru.b_hh(r);
      double ar = m.gru.b_ih(hd + r) + m.gru.b_hh(hd + r);
      double an = m.gru.b_ih(2 * hd + r);
      double un = 0.0;
      for (int j = 0; j < kNmnInputDim; ++j) {
        az += m.gru.w_ih(r, j) * x(j);
        ar += m.gru.w_ih(hd + r, j) * x(j);
        an += m.gru.w_ih(2 * hd + r, j) * x(j);
      }
      for (int j = 0; j < hd; ++j) {
        az += m.gru.w_hh(r, j) * h(j);
        ar += m.gru.w_hh(hd + r, j) * h(j);
        un += m.gru.w_hh(2 * hd + r, j) * h(j);
      }
      const double zz = 1.0 / (1.0 + std::exp(-az));
      const double rr = 1.0 / (1.0 + std::exp(-ar));
      h1(r) = (1.0 - zz) * std::tanh(an + rr * un + m.gru.b_hh(2 * hd + r)) + zz * h(r);
    }
    Eigen::VectorXd uvec(hd + kNmnInputDim);
    uvec << h1, x;
    auto dense = [](const DenseLayer& l, const Eigen::VectorXd& a, bool act) {
      Eigen::VectorXd out = l.b;
      for (Eigen::Index r = 0; r < l.w.rows(); ++r)
        for (Eigen::Index cc = 0; cc < l.w.cols(); ++cc) out(r) += l.w(r, cc) * a(cc);
      if (act)
        for (Eigen::Index r = 0; r < out.size(); ++r)
          out(r) = out(r) > 0 ? out(r) : std::expm1(out(r));
      return out;
    };
    const Eigen::VectorXd y = dense(m.mlp[2], dense(m.mlp[1], dense(m.mlp[0], uvec, true), true), false);

    const NmnOutput got = nmn_forward(m, input, h);
    for (int f = 0; f < 4; ++f) {
      worst = std::max(worst, std::abs(got.contact_prob(f) - 1.0 / (1.0 + std::exp(-y(f)))));
    }
    worst = std::max(worst, (got.velocity - Eigen::Vector3d(y.tail<3>())).cwiseAbs().maxCoeff());
    worst = std::max(worst, (got.hidden - h1).cwiseAbs().maxCoeff());
  }
  c.pass = worst < 1e-12;
  c.detail = "max deviation = " + fmt(worst);
  return c;
}

// Shared training data for the learning criteria.
struct AcceptanceData {
  Dataset quality;      // clean walking + standing logs (injection during training)
  Dataset noisy;        // sensor noise frozen in the logs
  Dataset overfit;      // tiny frozen-noise pool for the early-stopping study
  NmnModel desk_model;  // trained by criterion 11
  double train_wall = 0.0;
  ValMetrics desk_metrics;
};

Dataset build_dataset(int n_logs, double log_seconds, bool sensor_noise, int standing_logs,
                      int seq_len, double val_fraction, std::uint64_t seed_base) {
  std::vector<std::pair<TrajectoryLog, std::vector<GtRecord>>> logs;
  for (int i = 0; i < n_logs; ++i) {
    TerrainConfig cfg;
    cfg.duration = log_seconds;
    cfg.slip_probability = 0.01;
    cfg.profile = TerrainConfig::Profile::Slippery;
    cfg.noise.enabled = sensor_noise;
    cfg.command.max_speed = 0.2 + 0.05 * (i % 5);
    SimResult sim = generate(default_quadruped(), cfg, seed_base + i);
    logs.emplace_back(std::move(sim.log), std::move(sim.gt));
  }
  for (int i = 0; i < standing_logs; ++i) {
    TerrainConfig cfg;
    cfg.duration = log_seconds / 2;
    cfg.slip_probability = 0.0;
    cfg.noise.enabled = sensor_noise;
    cfg.command.max_speed = 0.0;
    cfg.command.lateral_amp = 0.0;
    cfg.command.yaw_rate_amp = 0.0;
    SimResult sim = generate(default_quadruped(), cfg, seed_base + 1000 + i);
    logs.emplace_back(std::move(sim.log), std::move(sim.gt));
  }
  return make_dataset(logs, seq_len, val_fraction, seed_base + 7);
}

Criterion criterion_desk_quality(AcceptanceData& data) {
  Criterion c{11, "desk-trained model quality"};
  const double t0 = now_seconds();
  data.quality = build_dataset(26, 10.0, false, 4, 400, 0.15, 9000);

  TrainConfig cfg;
  cfg.max_iters = 80;
  cfg.epochs_per_iter = 2;
  cfg.batch_size = 16;
  cfg.seq_len = 400;
  cfg.seed = 11;
  cfg.noise_randomization = true;

  TrainOutput result = train(data.quality, cfg);
  data.desk_model = std::move(result.model);
  data.train_wall = now_seconds() - t0;

  // Held-out evaluation against a fixed noisy realization of the inputs.
  std::vector<TrainSequence> noisy_val = data.quality.val;
  {
    std::mt19937_64 vrng(4242);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& s : noisy_val) {
      for (Eigen::Index t = 0; t < s.inputs.cols(); ++t) {
        for (int i = 0; i < 3; ++i) s.inputs(i, t) += cfg.inj_accel_std * gauss(vrng);
        for (int i = 3; i < 6; ++i) s.inputs(i, t) += cfg.inj_gyro_std * gauss(vrng);
        for (int i = 6; i < 18; ++i) s.inputs(i, t) += cfg.inj_encoder_std * gauss(vrng);
        for (int i = 18; i < 30; ++i) s.inputs(i, t) += cfg.inj_joint_vel_std * gauss(vrng);
      }
    }
  }
  data.desk_metrics = evaluate_model(data.desk_model, noisy_val);

  // Stationary stance through the trained model.
  TerrainConfig stand;
  stand.duration = 2.0;
  stand.command.max_speed = 0.0;
  stand.command.lateral_amp = 0.0;
  stand.command.yaw_rate_amp = 0.0;
  const SimResult stand_sim = generate(default_quadruped(), stand, 777);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(data.desk_model.hidden_dim());
  double min_c = 1.0, max_v = 0.0;
  for (size_t k = 0; k < stand_sim.log.records.size(); ++k) {
    const NmnOutput y =
        nmn_forward(data.desk_model, assemble_nmn_input(stand_sim.log.records, k), h);
    h = y.hidden;
    if (k > 250) {  // past the filter/hidden-state warmup
      min_c = std::min(min_c, y.contact_prob.minCoeff());
      max_v = std::max(max_v, y.velocity.norm());
    }
  }

  const bool quality = data.desk_metrics.contact_accuracy > 0.95 &&
                       data.desk_metrics.velocity_l1 < 0.05;
  const bool stance_ok = min_c > 0.9 && max_v < 0.05;
  c.pass = quality && stance_ok && data.train_wall < 1800.0;
  c.detail = "accuracy=" + fmt(data.desk_metrics.contact_accuracy) +
             ", vel_l1=" + fmt(data.desk_metrics.velocity_l1) +
             ", stance min_c=" + fmt(min_c) + ", stance max_v=" + fmt(max_v) +
             ", train=" + fmt(data.train_wall) + " s";
  return c;
}

Criterion criterion_trend(const AcceptanceData& data) {
  Criterion c{7, "slippery trend: velocity < kinematics+rejection < kinematics"};
  const double t0 = now_seconds();
  double sum_v = 0.0, sum_rej = 0.0, sum_plain = 0.0;
  const int n_seeds = 5;
  for (int s = 0; s < n_seeds; ++s) {
    TerrainConfig cfg;
    cfg.duration = 60.0;
    cfg.profile = TerrainConfig::Profile::Slippery;
    cfg.slip_probability = 0.05;
    cfg.noise.enabled = true;
    const SimResult sim = generate(default_quadruped(), cfg, 3000 + s);
    const Trajectory gt = gt_trajectory(sim.gt);

    RunConfig rc;
    rc.variant = Variant::VelocityOnly;
    sum_v += ate(align_initial(run_estimator(sim.log, rc, &data.desk_model).trajectory, gt), gt).pos;

    rc.variant = Variant::GrfContact;
    rc.slip_rejection = true;
    sum_rej += ate(align_initial(run_estimator(sim.log, rc).trajectory, gt), gt).pos;

    rc.slip_rejection = false;
    sum_plain += ate(align_initial(run_estimator(sim.log, rc).trajectory, gt), gt).pos;
  }
  const double elapsed = now_seconds() - t0;
  const double a_v = sum_v / n_seeds;
  const double a_rej = sum_rej / n_seeds;
  const double a_plain = sum_plain / n_seeds;

  c.pass = a_rej >= 1.1 * a_v && a_plain >= 1.1 * a_rej && elapsed < 120.0;
  c.detail = "ate_pos: velocity=" + fmt(a_v) + " < rejection=" + fmt(a_rej) +
             " < plain=" + fmt(a_plain) + " (runtime " + fmt(elapsed) + " s)";
  return c;
}

Criterion criterion_smoothness_trend(AcceptanceData& data) {
  Criterion c{8, "smoothness loss lowers velocity-error std on all axes"};
  data.noisy = build_dataset(12, 8.0, true, 2, 300, 0.2, 5000);

  Eigen::Vector3d with_sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d without_sum = Eigen::Vector3d::Zero();
  const int n_seeds = 5;
  for (int s = 0; s < n_seeds; ++s) {
    TrainConfig cfg;
    cfg.max_iters = 60;
    cfg.epochs_per_iter = 2;
    cfg.batch_size = 8;
    cfg.seq_len = 300;
    cfg.seed = 100 + s;
    cfg.noise_randomization = false;  // the logs already carry frozen noise

    cfg.lambda = 50.0;
    with_sum += evaluate_model(train(data.noisy, cfg).model, data.noisy.val).velocity_err_std;
    cfg.lambda = 0.0;
    without_sum += evaluate_model(train(data.noisy, cfg).model, data.noisy.val).velocity_err_std;
  }
  const Eigen::Vector3d with_std = with_sum / n_seeds;
  const Eigen::Vector3d without_std = without_sum / n_seeds;
  c.pass = (with_std.array() < without_std.array()).all();
  c.detail = "std with=[" + fmt(with_std.x()) + "," + fmt(with_std.y()) + "," +
             fmt(with_std.z()) + "] without=[" + fmt(without_std.x()) + "," +
             fmt(without_std.y()) + "," + fmt(without_std.z()) + "]";
  return c;
}

Criterion criterion_contact_smoothness(AcceptanceData& data) {
  Criterion c{9, "contact smoothing does not help; long training overfits"};
  // F1 comparison with and without the contact-head smoothness penalty.
  double f1_with = 0.0, f1_without = 0.0;
  const int n_seeds = 3;
  for (int s = 0; s < n_seeds; ++s) {
    TrainConfig cfg;
    cfg.max_iters = 50;
    cfg.epochs_per_iter = 2;
    cfg.batch_size = 6;
    cfg.seq_len = 300;
    cfg.seed = 300 + s;
    cfg.noise_randomization = false;

    cfg.smooth_target = SmoothTarget::Contact;
    cfg.lambda = 50.0;
    f1_with += evaluate_model(train(data.noisy, cfg).model, data.noisy.val).contact_f1;
    cfg.smooth_target = SmoothTarget::None;
    f1_without += evaluate_model(train(data.noisy, cfg).model, data.noisy.val).contact_f1;
  }
  f1_with /= n_seeds;
  f1_without /= n_seeds;
  const bool f1_ok = f1_with <= f1_without + 1e-6;

  // Early stopping: a small frozen-noise pool, 200 vs 1000 iterations.
  data.overfit = build_dataset(5, 6.0, true, 1, 200, 0.34, 7000);
  TrainConfig cfg;
  cfg.max_iters = 200;
  cfg.epochs_per_iter = 1;
  cfg.batch_size = 4;
  cfg.seq_len = 200;
  cfg.seed = 555;
  cfg.noise_randomization = false;
  cfg.smooth_target = SmoothTarget::None;
  const TrainOutput short_run = train(data.overfit, cfg);
  cfg.max_iters = 1000;
  const TrainOutput long_run = train(data.overfit, cfg);
  const double val_200 = short_run.report.val_loss.back();
  const double val_1000 = long_run.report.val_loss.back();
  const bool overfit_ok = val_1000 >= val_200;

  c.pass = f1_ok && overfit_ok;
  c.detail = "f1 with=" + fmt(f1_with) + " vs without=" + fmt(f1_without) +
             "; val loss 200=" + fmt(val_200) + " vs 1000=" + fmt(val_1000);
  return c;
}

Criterion criterion_metric_analytics() {
  Criterion c{10, "metric analytics: drift RE and LPF step response"};
  // Constant 0.01 m/s drift accumulates 0.1 m per 10 s window.
  Trajectory gt, est;
  const double dt = 1.0 / 500.0;
  for (int k = 0; k <= 15000; ++k) {
    TrajectorySample s;
    s.t = k * dt;
    s.r = Eigen::Matrix3d::Identity();
    s.v = {0.3, 0, 0};
    s.p = {0.3 * s.t, 0, 0};
    gt.push_back(s);
    s.p.x() += 0.01 * s.t;
    s.v.x() += 0.01;
    est.push_back(s);
  }
  const AteResult re = relative_error(est, gt, 10.0, 1.0);
  const bool re_ok = std::abs(re.pos - 0.1) < 0.001;

  // First-order step response reaches 63.2% at tau.
  const double fc = 10.0;
  const double tau = 1.0 / (2.0 * M_PI * fc);
  LowPassFilter lpf(fc);
  Eigen::VectorXd zero(1), one(1);
  zero << 0.0;
  one << 1.0;
  lpf.step(zero, 1e-3);
  double at_tau = 0.0;
  const int n_tau = static_cast<int>(std::round(tau / 1e-3));
  for (int i = 1; i <= n_tau; ++i) at_tau = lpf.step(one, 1e-3)(0);
  const double target = 1.0 - std::exp(-1.0);
  const bool lpf_ok = std::abs(at_tau - target) / target < 0.02;

  c.pass = re_ok && lpf_ok;
  c.detail = "re_pos=" + fmt(re.pos) + " (want 0.1), lpf at tau=" + fmt(at_tau) +
             " (want " + fmt(target) + ")";
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  std::string work_dir = "acceptance_work";
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--work-dir") work_dir = argv[i + 1];
  }
  std::filesystem::create_directories(work_dir);

  AcceptanceData data;
  std::vector<Criterion> results;
  results.push_back(criterion_closure());
  results.push_back(criterion_zero_innovation());
  results.push_back(criterion_covariance_health());
  results.push_back(criterion_lie_suite());
  results.push_back(criterion_jacobian_gradients());
  results.push_back(criterion_forward_oracle());
  results.push_back(criterion_desk_quality(data));  // trains the desk model (11)
  results.push_back(criterion_trend(data));         // 7, uses the desk model
  results.push_back(criterion_smoothness_trend(data));
  results.push_back(criterion_contact_smoothness(data));
  results.push_back(criterion_metric_analytics());

  data.desk_model.save(work_dir + "/desk_model.json");

  std::sort(results.begin(), results.end(),
            [](const Criterion& a, const Criterion& b) { return a.id < b.id; });
  int failures = 0;
  for (const auto& r : results) {
    failures += r.pass ? 0 : 1;
    std::printf("[%s] criterion %2d: %s — %s\n", r.pass ? "PASS" : "FAIL", r.id,
                r.name.c_str(), r.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(results.size()) - failures,
              results.size());
  return failures;
}
