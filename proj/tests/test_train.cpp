// SPDX-License-Identifier: Apache-2.0

#include "legodom/train.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

#include "legodom/sim.hpp"

using namespace legodom;

namespace {

std::mt19937_64 rng(404);

double urand(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::MatrixXd random_matrix(int r, int c, double s) {
  Eigen::MatrixXd m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = urand(-s, s);
  return m;
}

NmnModel random_model(int hidden, int h1, int h2) {
  NmnModel m = NmnModel::zeros(kNmnInputDim, hidden, h1, h2);
  m.gru.w_ih = random_matrix(3 * hidden, kNmnInputDim, 0.3);
  m.gru.w_hh = random_matrix(3 * hidden, hidden, 0.3);
  m.gru.b_ih = random_matrix(3 * hidden, 1, 0.2);
  m.gru.b_hh = random_matrix(3 * hidden, 1, 0.2);
  m.mlp[0].w = random_matrix(h1, hidden + kNmnInputDim, 0.3);
  m.mlp[0].b = random_matrix(h1, 1, 0.2);
  m.mlp[1].w = random_matrix(h2, h1, 0.3);
  m.mlp[1].b = random_matrix(h2, 1, 0.2);
  m.mlp[2].w = random_matrix(kNmnOutputDim, h2, 0.3);
  m.mlp[2].b = random_matrix(kNmnOutputDim, 1, 0.2);
  return m;
}

TrainSequence random_sequence(int t_len) {
  TrainSequence s;
  s.inputs = random_matrix(kNmnInputDim, t_len, 1.0);
  s.contact = Eigen::MatrixXd(4, t_len);
  for (int t = 0; t < t_len; ++t)
    for (int f = 0; f < 4; ++f) s.contact(f, t) = urand(0, 1) < 0.5 ? 0.0 : 1.0;
  s.velocity = random_matrix(3, t_len, 0.8);
  // Keep velocity labels away from zero-init predictions: no L1 kink under
  // the finite-difference probes.
  for (int t = 0; t < t_len; ++t)
    for (int d = 0; d < 3; ++d) {
      if (std::abs(s.velocity(d, t)) < 0.3) s.velocity(d, t) += 0.5;
    }
  return s;
}

}  // namespace

TEST_CASE("supervised loss analytics") {
  SUBCASE("perfect predictions vanish") {
    Eigen::MatrixXd labels(4, 10), logits(4, 10);
    for (int t = 0; t < 10; ++t)
      for (int f = 0; f < 4; ++f) {
        labels(f, t) = (f + t) % 2;
        logits(f, t) = labels(f, t) > 0.5 ? 30.0 : -30.0;
      }
    const Eigen::MatrixXd v = random_matrix(3, 10, 1.0);
    CHECK(loss_supervised(logits, labels, v, v) < 1e-9);
  }
  SUBCASE("zero logits on balanced labels give ln 2") {
    Eigen::MatrixXd labels(4, 50), logits = Eigen::MatrixXd::Zero(4, 50);
    for (int t = 0; t < 50; ++t)
      for (int f = 0; f < 4; ++f) labels(f, t) = (t % 2 == 0) ? 1.0 : 0.0;
    CHECK(loss_bce_logits(logits, labels) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  }
  SUBCASE("random case matches a scalar recomputation") {
    const Eigen::MatrixXd logits = random_matrix(4, 30, 2.0);
    Eigen::MatrixXd labels(4, 30);
    for (int t = 0; t < 30; ++t)
      for (int f = 0; f < 4; ++f) labels(f, t) = urand(0, 1) < 0.5 ? 0.0 : 1.0;
    const Eigen::MatrixXd vp = random_matrix(3, 30, 1.0);
    const Eigen::MatrixXd vl = random_matrix(3, 30, 1.0);

    double bce = 0.0;
    for (int t = 0; t < 30; ++t)
      for (int f = 0; f < 4; ++f) {
        const double p = 1.0 / (1.0 + std::exp(-logits(f, t)));
        bce += -(labels(f, t) * std::log(p) + (1.0 - labels(f, t)) * std::log(1.0 - p));
      }
    bce /= 120.0;
    double l1 = 0.0;
    for (int t = 0; t < 30; ++t)
      for (int d = 0; d < 3; ++d) l1 += std::abs(vp(d, t) - vl(d, t));
    l1 /= 90.0;
    CHECK(loss_supervised(logits, labels, vp, vl) ==
          doctest::Approx(bce + l1).epsilon(1e-12));
  }
}

TEST_CASE("smoothness loss analytics") {
  SUBCASE("constant sequences cost nothing") {
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(3, 40);
    v.colwise() += Eigen::Vector3d(0.4, -0.2, 0.1).eval();
    CHECK(loss_smooth_velocity(v) == 0.0);
  }
  SUBCASE("linear ramp keeps only first differences") {
    const Eigen::Vector3d a(0.03, -0.01, 0.02);
    Eigen::MatrixXd v(3, 25);
    for (int t = 0; t < 25; ++t) v.col(t) = a * t;
    CHECK(loss_smooth_velocity(v) == doctest::Approx(a.squaredNorm()).epsilon(1e-12));
  }
  SUBCASE("random sequence matches a scalar recomputation") {
    const Eigen::MatrixXd v = random_matrix(3, 31, 0.7);
    double sum = 0.0;
    for (int t = 2; t < 31; ++t) {
      sum += (v.col(t) - v.col(t - 1)).squaredNorm() +
             0.5 * (v.col(t) - 2 * v.col(t - 1) + v.col(t - 2)).squaredNorm();
    }
    CHECK(loss_smooth_velocity(v) == doctest::Approx(sum / 29.0).epsilon(1e-12));
  }
  SUBCASE("too-short sequences rejected") {
    CHECK_THROWS_AS(temporal_smoothness(Eigen::MatrixXd::Zero(3, 2)), std::invalid_argument);
  }
}

TEST_CASE("total loss composition") {
  const Eigen::MatrixXd logits = random_matrix(4, 20, 1.5);
  Eigen::MatrixXd labels(4, 20);
  for (int t = 0; t < 20; ++t)
    for (int f = 0; f < 4; ++f) labels(f, t) = urand(0, 1) < 0.5 ? 0.0 : 1.0;
  const Eigen::MatrixXd vp = random_matrix(3, 20, 0.6);
  const Eigen::MatrixXd vl = random_matrix(3, 20, 0.6);

  TrainConfig none;
  none.smooth_target = SmoothTarget::None;
  TrainConfig zero;
  zero.lambda = 0.0;
  TrainConfig vel;
  vel.lambda = 50.0;
  vel.smooth_target = SmoothTarget::Velocity;

  const double sp = loss_supervised(logits, labels, vp, vl);
  CHECK(total_loss_sequence(logits, labels, vp, vl, none) == sp);
  CHECK(total_loss_sequence(logits, labels, vp, vl, zero) == sp);
  CHECK(total_loss_sequence(logits, labels, vp, vl, vel) ==
        doctest::Approx(sp + 50.0 * loss_smooth_velocity(vp)).epsilon(1e-12));
}

TEST_CASE("backward matches central finite differences on a tiny model") {
  NmnModel model = random_model(8, 16, 8);
  std::vector<TrainSequence> batch{random_sequence(5), random_sequence(5)};
  TrainConfig cfg;
  cfg.lambda = 50.0;
  cfg.smooth_target = SmoothTarget::Velocity;

  const double eps = 1e-5;
  auto check_tensor = [&](Eigen::Map<Eigen::VectorXd> param, const Eigen::VectorXd& grad,
                          const char* name) {
    REQUIRE(param.size() == grad.size());
    for (Eigen::Index i = 0; i < param.size(); ++i) {
      const double backup = param(i);
      param(i) = backup + eps;
      const double lp = batch_loss(model, batch, cfg);
      param(i) = backup - eps;
      const double lm = batch_loss(model, batch, cfg);
      param(i) = backup;
      const double fd = (lp - lm) / (2.0 * eps);
      const double rel =
          std::abs(fd - grad(i)) / std::max({std::abs(fd), std::abs(grad(i)), 1e-6});
      if (rel >= 1e-4) {
        CAPTURE(name);
        CAPTURE(i);
        CHECK(rel < 1e-4);
      }
    }
  };

  for (SmoothTarget target : {SmoothTarget::Velocity, SmoothTarget::Contact}) {
    cfg.smooth_target = target;
    const Gradients g = backward(model, batch, cfg);
    check_tensor({model.gru.w_ih.data(), model.gru.w_ih.size()},
                 Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(g.gru_w_ih.data(),
                                                                   g.gru_w_ih.size())),
                 "gru.w_ih");
    check_tensor({model.gru.w_hh.data(), model.gru.w_hh.size()},
                 Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(g.gru_w_hh.data(),
                                                                   g.gru_w_hh.size())),
                 "gru.w_hh");
    check_tensor({model.gru.b_ih.data(), model.gru.b_ih.size()},
                 Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(g.gru_b_ih.data(),
                                                                   g.gru_b_ih.size())),
                 "gru.b_ih");
    check_tensor({model.gru.b_hh.data(), model.gru.b_hh.size()},
                 Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(g.gru_b_hh.data(),
                                                                   g.gru_b_hh.size())),
                 "gru.b_hh");
    for (int l = 0; l < 3; ++l) {
      check_tensor({model.mlp[l].w.data(), model.mlp[l].w.size()},
                   Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(g.mlp[l].w.data(),
                                                                     g.mlp[l].w.size())),
                   "mlp.w");
      check_tensor({model.mlp[l].b.data(), model.mlp[l].b.size()},
                   Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(g.mlp[l].b.data(),
                                                                     g.mlp[l].b.size())),
                   "mlp.b");
    }
  }
}

TEST_CASE("smoothness gradient structure") {
  NmnModel model = random_model(8, 16, 8);
  std::vector<TrainSequence> batch{random_sequence(6)};

  TrainConfig zero;
  zero.lambda = 0.0;
  zero.smooth_target = SmoothTarget::Velocity;
  TrainConfig none;
  none.lambda = 50.0;
  none.smooth_target = SmoothTarget::None;
  TrainConfig vel;
  vel.lambda = 50.0;
  vel.smooth_target = SmoothTarget::Velocity;

  SUBCASE("zero lambda is bitwise the no-smoothing branch") {
    const Gradients a = backward(model, batch, zero);
    const Gradients b = backward(model, batch, none);
    CHECK((a.gru_w_ih - b.gru_w_ih).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.mlp[2].w - b.mlp[2].w).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("velocity smoothing leaves the contact head rows untouched") {
    const Gradients a = backward(model, batch, vel);
    const Gradients b = backward(model, batch, zero);
    CHECK((a.mlp[2].w.topRows(4) - b.mlp[2].w.topRows(4)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.mlp[2].b.head(4) - b.mlp[2].b.head(4)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.mlp[2].w.bottomRows(3) - b.mlp[2].w.bottomRows(3)).cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("adam steps") {
  NmnModel model = random_model(8, 16, 8);
  AdamState state = AdamState::zeros_like(model);

  SUBCASE("zero gradient leaves the model unchanged") {
    const Eigen::MatrixXd before = model.gru.w_ih;
    adam_step(model, Gradients::zeros_like(model), state, 5e-4);
    CHECK((model.gru.w_ih - before).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("first step magnitude is the learning rate") {
    Gradients g = Gradients::zeros_like(model);
    g.gru_w_ih.setConstant(0.37);
    g.mlp[1].b.setConstant(-2.0);
    const Eigen::MatrixXd w_before = model.gru.w_ih;
    const Eigen::VectorXd b_before = model.mlp[1].b;
    adam_step(model, g, state, 5e-4);
    CHECK((model.gru.w_ih - w_before).cwiseAbs().maxCoeff() ==
          doctest::Approx(5e-4).epsilon(1e-4));
    CHECK((model.mlp[1].b - b_before).cwiseAbs().maxCoeff() ==
          doctest::Approx(5e-4).epsilon(1e-4));
    CHECK(model.gru.w_ih(0, 0) < w_before(0, 0));  // descends against the gradient
    CHECK(model.mlp[1].b(0) > b_before(0));
  }
}

TEST_CASE("training is deterministic and makes progress at desk scale") {
  // Tiny dataset from two short walking logs.
  TerrainConfig terrain;
  terrain.duration = 2.0;
  terrain.slip_probability = 0.0;
  std::vector<std::pair<TrajectoryLog, std::vector<GtRecord>>> logs;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    SimResult sim = generate(default_quadruped(), terrain, seed);
    logs.emplace_back(std::move(sim.log), std::move(sim.gt));
  }
  const Dataset ds = make_dataset(logs, 100, 0.34, 9);
  REQUIRE(!ds.train.empty());
  REQUIRE(!ds.val.empty());

  TrainConfig cfg;
  cfg.hidden = 16;
  cfg.mlp1 = 24;
  cfg.mlp2 = 16;
  cfg.max_iters = 30;
  cfg.epochs_per_iter = 3;
  cfg.batch_size = 4;
  cfg.seq_len = 100;
  cfg.seed = 5;
  cfg.lr = 1e-2;  // tiny smoke run; the step budget is 90

  const TrainOutput a = train(ds, cfg);
  const TrainOutput b = train(ds, cfg);
  CHECK((a.model.gru.w_ih - b.model.gru.w_ih).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.model.mlp[2].w - b.model.mlp[2].w).cwiseAbs().maxCoeff() == 0.0);

  CHECK(a.report.train_loss.back() < a.report.train_loss.front());
  CHECK(a.report.stopped_iter == cfg.max_iters);

  const ValMetrics vm = evaluate_model(a.model, ds.val);
  CHECK(vm.contact_accuracy > 0.5);  // should beat chance even at this scale

  CHECK_THROWS_AS(train(Dataset{}, cfg), std::invalid_argument);
}
