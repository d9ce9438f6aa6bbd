// SPDX-License-Identifier: Apache-2.0

#include "legodom/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace legodom {

using nlohmann::json;

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

const char* smooth_target_name(SmoothTarget t) {
  switch (t) {
    case SmoothTarget::Velocity: return "velocity";
    case SmoothTarget::Contact: return "contact";
    case SmoothTarget::None: return "none";
  }
  return "velocity";
}

SmoothTarget smooth_target_from(const std::string& s) {
  if (s == "velocity") return SmoothTarget::Velocity;
  if (s == "contact") return SmoothTarget::Contact;
  if (s == "none") return SmoothTarget::None;
  throw std::runtime_error("train config: unknown smooth_target " + s);
}

}  // namespace

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  TrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.epochs_per_iter = j.value("epochs_per_iter", c.epochs_per_iter);
  c.max_iters = j.value("max_iters", c.max_iters);
  c.lambda = j.value("lambda", c.lambda);
  if (j.contains("smooth_target")) {
    c.smooth_target = smooth_target_from(j["smooth_target"].get<std::string>());
  }
  c.noise_randomization = j.value("noise_randomization", c.noise_randomization);
  c.seed = j.value("seed", c.seed);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seq_len = j.value("seq_len", c.seq_len);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.early_stop = j.value("early_stop", c.early_stop);
  c.hidden = j.value("hidden", c.hidden);
  c.mlp1 = j.value("mlp1", c.mlp1);
  c.mlp2 = j.value("mlp2", c.mlp2);
  c.inj_gyro_std = j.value("inj_gyro_std", c.inj_gyro_std);
  c.inj_accel_std = j.value("inj_accel_std", c.inj_accel_std);
  c.inj_encoder_std = j.value("inj_encoder_std", c.inj_encoder_std);
  c.inj_joint_vel_std = j.value("inj_joint_vel_std", c.inj_joint_vel_std);
  if (!(c.lr > 0) || c.epochs_per_iter <= 0 || c.max_iters <= 0 || c.lambda < 0 ||
      c.batch_size <= 0 || c.seq_len < 3) {
    throw std::runtime_error("train config: values must be positive");
  }
  return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("train config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

std::string TrainConfig::to_json() const {
  return json{{"lr", lr},
              {"epochs_per_iter", epochs_per_iter},
              {"max_iters", max_iters},
              {"lambda", lambda},
              {"smooth_target", smooth_target_name(smooth_target)},
              {"noise_randomization", noise_randomization},
              {"seed", seed},
              {"batch_size", batch_size},
              {"seq_len", seq_len},
              {"val_fraction", val_fraction},
              {"early_stop", early_stop},
              {"hidden", hidden},
              {"mlp1", mlp1},
              {"mlp2", mlp2},
              {"inj_gyro_std", inj_gyro_std},
              {"inj_accel_std", inj_accel_std},
              {"inj_encoder_std", inj_encoder_std},
              {"inj_joint_vel_std", inj_joint_vel_std}}
      .dump(2);
}

Dataset make_dataset(const std::vector<std::pair<TrajectoryLog, std::vector<GtRecord>>>& logs,
                     int seq_len, double val_fraction, std::uint64_t seed) {
  if (seq_len < 3) throw std::invalid_argument("make_dataset: seq_len must be >= 3");
  std::vector<std::vector<TrainSequence>> per_log;
  for (const auto& [log, gt] : logs) {
    if (log.records.size() != gt.size()) {
      throw std::invalid_argument("make_dataset: log and ground truth lengths differ");
    }
    const int n = static_cast<int>(log.records.size());
    std::vector<TrainSequence> seqs;
    for (int start = 0; start + seq_len <= n; start += seq_len) {
      TrainSequence s;
      s.inputs.resize(kNmnInputDim, seq_len);
      s.contact.resize(4, seq_len);
      s.velocity.resize(3, seq_len);
      for (int t = 0; t < seq_len; ++t) {
        s.inputs.col(t) = assemble_nmn_input(log.records, start + t);
        for (int f = 0; f < 4; ++f) s.contact(f, t) = gt[start + t].contact[f] ? 1.0 : 0.0;
        s.velocity.col(t) = gt[start + t].v_body;
      }
      seqs.push_back(std::move(s));
    }
    if (!seqs.empty()) per_log.push_back(std::move(seqs));
  }
  if (per_log.empty()) throw std::invalid_argument("make_dataset: no usable sequences");

  // Hold out whole trajectories.
  std::vector<int> order(per_log.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  int n_val = 0;
  if (val_fraction > 0.0 && per_log.size() > 1) {
    n_val = std::max(1, static_cast<int>(std::lround(val_fraction * per_log.size())));
    n_val = std::min(n_val, static_cast<int>(per_log.size()) - 1);
  }
  Dataset ds;
  for (size_t i = 0; i < order.size(); ++i) {
    auto& dst = (static_cast<int>(i) < n_val) ? ds.val : ds.train;
    for (auto& s : per_log[order[i]]) dst.push_back(std::move(s));
  }
  return ds;
}

Dataset load_dataset_dir(const std::string& dir, int seq_len, double val_fraction,
                         std::uint64_t seed) {
  namespace fs = std::filesystem;
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string p = entry.path().string();
    if (p.size() > 6 && p.ends_with(".jsonl") && !p.ends_with(".gt.jsonl")) {
      paths.push_back(p);
    }
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw std::invalid_argument("load_dataset_dir: no logs in " + dir);
  std::vector<std::pair<TrajectoryLog, std::vector<GtRecord>>> logs;
  for (const auto& p : paths) {
    std::string gt_path = p.substr(0, p.size() - 6) + ".gt.jsonl";
    logs.emplace_back(TrajectoryLog::read(p), read_ground_truth(gt_path));
  }
  return make_dataset(logs, seq_len, val_fraction, seed);
}

// ---------------------------------------------------------------------------
// Losses.

double loss_bce_logits(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& labels) {
  if (logits.rows() != labels.rows() || logits.cols() != labels.cols()) {
    throw std::invalid_argument("loss_bce_logits: shape mismatch");
  }
  double sum = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const double x = logits(r, c);
      const double y = labels(r, c);
      sum += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    }
  }
  return sum / static_cast<double>(logits.size());
}

double loss_l1(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw std::invalid_argument("loss_l1: shape mismatch");
  }
  return (pred - target).cwiseAbs().sum() / static_cast<double>(pred.size());
}

double loss_supervised(const Eigen::MatrixXd& contact_logits,
                       const Eigen::MatrixXd& contact_labels,
                       const Eigen::MatrixXd& velocity_pred,
                       const Eigen::MatrixXd& velocity_labels) {
  return loss_bce_logits(contact_logits, contact_labels) +
         loss_l1(velocity_pred, velocity_labels);
}

double temporal_smoothness(const Eigen::MatrixXd& seq) {
  const Eigen::Index t_len = seq.cols();
  if (t_len < 3) throw std::invalid_argument("temporal_smoothness: need at least 3 steps");
  double sum = 0.0;
  for (Eigen::Index t = 2; t < t_len; ++t) {
    const Eigen::VectorXd d1 = seq.col(t) - seq.col(t - 1);
    const Eigen::VectorXd d2 = seq.col(t) - 2.0 * seq.col(t - 1) + seq.col(t - 2);
    sum += d1.squaredNorm() + 0.5 * d2.squaredNorm();
  }
  return sum / static_cast<double>(t_len - 2);
}

double loss_smooth_velocity(const Eigen::MatrixXd& velocity_seq) {
  return temporal_smoothness(velocity_seq);
}

double loss_smooth_contact(const Eigen::MatrixXd& contact_prob_seq) {
  return temporal_smoothness(contact_prob_seq);
}

double total_loss_sequence(const Eigen::MatrixXd& contact_logits,
                           const Eigen::MatrixXd& contact_labels,
                           const Eigen::MatrixXd& velocity_pred,
                           const Eigen::MatrixXd& velocity_labels,
                           const TrainConfig& cfg) {
  double loss = loss_supervised(contact_logits, contact_labels, velocity_pred, velocity_labels);
  if (cfg.lambda > 0.0 && cfg.smooth_target == SmoothTarget::Velocity) {
    loss += cfg.lambda * loss_smooth_velocity(velocity_pred);
  } else if (cfg.lambda > 0.0 && cfg.smooth_target == SmoothTarget::Contact) {
    loss += cfg.lambda * loss_smooth_contact(contact_logits.unaryExpr(&sigmoid));
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Batched forward/backward. Activations are kept per time step with the
// batch along columns; elu/sigmoid/tanh derivatives are recovered from the
// stored outputs.

namespace {

struct ForwardCache {
  std::vector<Eigen::MatrixXd> x;     // In x B, normalized
  std::vector<Eigen::MatrixXd> z, r, n;
  std::vector<Eigen::MatrixXd> gh_n;  // n rows of W_hh * h_prev
  std::vector<Eigen::MatrixXd> h;     // T+1 entries
  std::vector<Eigen::MatrixXd> e1, e2, y;
};

// Forward over a batch; fills logits/velocity per step and optionally the
// cache. The arithmetic is identical with and without caching.
void forward_batch(const NmnModel& model, const std::vector<TrainSequence>& batch,
                   std::vector<Eigen::MatrixXd>& y_out, ForwardCache* cache) {
  const int b = static_cast<int>(batch.size());
  const int t_len = static_cast<int>(batch[0].inputs.cols());
  const int in = model.input_dim();
  const int hd = model.hidden_dim();

  const Eigen::VectorXd inv_std = model.norm_std.cwiseInverse();

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(hd, b);
  if (cache) {
    cache->x.resize(t_len);
    cache->z.resize(t_len);
    cache->r.resize(t_len);
    cache->n.resize(t_len);
    cache->gh_n.resize(t_len);
    cache->h.assign(1, h);
    cache->e1.resize(t_len);
    cache->e2.resize(t_len);
    cache->y.resize(t_len);
  }
  y_out.resize(t_len);

  Eigen::MatrixXd x(in, b), u(hd + in, b);
  for (int t = 0; t < t_len; ++t) {
    for (int j = 0; j < b; ++j) {
      x.col(j) = (batch[j].inputs.col(t) - model.norm_mean).cwiseProduct(inv_std);
    }
    const Eigen::MatrixXd gi = (model.gru.w_ih * x).colwise() + model.gru.b_ih;
    const Eigen::MatrixXd gh = model.gru.w_hh * h;

    const Eigen::MatrixXd z =
        (((gi.topRows(hd) + gh.topRows(hd)).colwise() + model.gru.b_hh.head(hd)))
            .unaryExpr(&sigmoid);
    const Eigen::MatrixXd r =
        (((gi.middleRows(hd, hd) + gh.middleRows(hd, hd)).colwise() +
          model.gru.b_hh.segment(hd, hd)))
            .unaryExpr(&sigmoid);
    const Eigen::MatrixXd gh_n = gh.bottomRows(hd);
    const Eigen::MatrixXd n =
        (((gi.bottomRows(hd) + r.cwiseProduct(gh_n)).colwise() + model.gru.b_hh.tail(hd)))
            .unaryExpr([](double v) { return std::tanh(v); });
    const Eigen::MatrixXd h_next =
        (1.0 - z.array()).matrix().cwiseProduct(n) + z.cwiseProduct(h);

    u.topRows(hd) = h_next;
    u.bottomRows(in) = x;
    const Eigen::MatrixXd e1 = ((model.mlp[0].w * u).colwise() + model.mlp[0].b).unaryExpr(&elu);
    const Eigen::MatrixXd e2 = ((model.mlp[1].w * e1).colwise() + model.mlp[1].b).unaryExpr(&elu);
    Eigen::MatrixXd y = (model.mlp[2].w * e2).colwise() + model.mlp[2].b;

    if (cache) {
      cache->x[t] = x;
      cache->z[t] = z;
      cache->r[t] = r;
      cache->n[t] = n;
      cache->gh_n[t] = gh_n;
      cache->h.push_back(h_next);
      cache->e1[t] = e1;
      cache->e2[t] = e2;
      cache->y[t] = y;
    }
    y_out[t] = std::move(y);
    h = h_next;
  }
}

// Loss of already-computed head outputs, matching total_loss_sequence
// averaged over the batch.
double loss_from_outputs(const std::vector<Eigen::MatrixXd>& y,
                         const std::vector<TrainSequence>& batch, const TrainConfig& cfg) {
  const int b = static_cast<int>(batch.size());
  const int t_len = static_cast<int>(y.size());
  double bce = 0.0, l1 = 0.0;
  for (int t = 0; t < t_len; ++t) {
    for (int j = 0; j < b; ++j) {
      for (int f = 0; f < 4; ++f) {
        const double xl = y[t](f, j);
        const double lab = batch[j].contact(f, t);
        bce += std::max(xl, 0.0) - xl * lab + std::log1p(std::exp(-std::abs(xl)));
      }
      for (int d = 0; d < 3; ++d) {
        l1 += std::abs(y[t](4 + d, j) - batch[j].velocity(d, t));
      }
    }
  }
  double loss = bce / (4.0 * b * t_len) + l1 / (3.0 * b * t_len);

  if (cfg.lambda > 0.0 && cfg.smooth_target != SmoothTarget::None && t_len >= 3) {
    double sm = 0.0;
    for (int j = 0; j < b; ++j) {
      for (int t = 2; t < t_len; ++t) {
        Eigen::VectorXd a0, a1, a2;
        if (cfg.smooth_target == SmoothTarget::Velocity) {
          a0 = y[t].col(j).tail(3);
          a1 = y[t - 1].col(j).tail(3);
          a2 = y[t - 2].col(j).tail(3);
        } else {
          a0 = y[t].col(j).head(4).unaryExpr(&sigmoid);
          a1 = y[t - 1].col(j).head(4).unaryExpr(&sigmoid);
          a2 = y[t - 2].col(j).head(4).unaryExpr(&sigmoid);
        }
        sm += (a0 - a1).squaredNorm() + 0.5 * (a0 - 2.0 * a1 + a2).squaredNorm();
      }
    }
    loss += cfg.lambda * sm / (static_cast<double>(b) * (t_len - 2));
  }
  return loss;
}

void check_batch(const std::vector<TrainSequence>& batch) {
  if (batch.empty()) throw std::invalid_argument("train: empty batch");
  const Eigen::Index t_len = batch[0].inputs.cols();
  if (t_len < 1) throw std::invalid_argument("train: empty sequence");
  for (const auto& s : batch) {
    if (s.inputs.cols() != t_len || s.contact.cols() != t_len || s.velocity.cols() != t_len) {
      throw std::invalid_argument("train: batch sequences must share one length");
    }
  }
}

}  // namespace

double batch_loss(const NmnModel& model, const std::vector<TrainSequence>& batch,
                  const TrainConfig& cfg) {
  check_batch(batch);
  std::vector<Eigen::MatrixXd> y;
  forward_batch(model, batch, y, nullptr);
  return loss_from_outputs(y, batch, cfg);
}

Gradients Gradients::zeros_like(const NmnModel& m) {
  Gradients g;
  g.gru_w_ih = Eigen::MatrixXd::Zero(m.gru.w_ih.rows(), m.gru.w_ih.cols());
  g.gru_w_hh = Eigen::MatrixXd::Zero(m.gru.w_hh.rows(), m.gru.w_hh.cols());
  g.gru_b_ih = Eigen::VectorXd::Zero(m.gru.b_ih.size());
  g.gru_b_hh = Eigen::VectorXd::Zero(m.gru.b_hh.size());
  for (int i = 0; i < 3; ++i) {
    g.mlp[i].w = Eigen::MatrixXd::Zero(m.mlp[i].w.rows(), m.mlp[i].w.cols());
    g.mlp[i].b = Eigen::VectorXd::Zero(m.mlp[i].b.size());
  }
  return g;
}

double Gradients::max_abs() const {
  double m = std::max({gru_w_ih.cwiseAbs().maxCoeff(), gru_w_hh.cwiseAbs().maxCoeff(),
                       gru_b_ih.cwiseAbs().maxCoeff(), gru_b_hh.cwiseAbs().maxCoeff()});
  for (const auto& l : mlp) {
    m = std::max({m, l.w.cwiseAbs().maxCoeff(), l.b.cwiseAbs().maxCoeff()});
  }
  return m;
}

Gradients backward(const NmnModel& model, const std::vector<TrainSequence>& batch,
                   const TrainConfig& cfg) {
  check_batch(batch);
  const int b = static_cast<int>(batch.size());
  const int t_len = static_cast<int>(batch[0].inputs.cols());
  const int hd = model.hidden_dim();

  ForwardCache cache;
  std::vector<Eigen::MatrixXd> y;
  forward_batch(model, batch, y, &cache);

  // Head gradients per step.
  std::vector<Eigen::MatrixXd> dy(t_len, Eigen::MatrixXd::Zero(kNmnOutputDim, b));
  const double c_bce = 1.0 / (4.0 * b * t_len);
  const double c_l1 = 1.0 / (3.0 * b * t_len);
  for (int t = 0; t < t_len; ++t) {
    for (int j = 0; j < b; ++j) {
      for (int f = 0; f < 4; ++f) {
        dy[t](f, j) = c_bce * (sigmoid(y[t](f, j)) - batch[j].contact(f, t));
      }
      for (int d = 0; d < 3; ++d) {
        const double diff = y[t](4 + d, j) - batch[j].velocity(d, t);
        dy[t](4 + d, j) = c_l1 * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0));
      }
    }
  }

  if (cfg.lambda > 0.0 && cfg.smooth_target != SmoothTarget::None && t_len >= 3) {
    const double c_sm = cfg.lambda / (static_cast<double>(b) * (t_len - 2));
    if (cfg.smooth_target == SmoothTarget::Velocity) {
      for (int t = 2; t < t_len; ++t) {
        const Eigen::MatrixXd v0 = y[t].bottomRows(3);
        const Eigen::MatrixXd v1 = y[t - 1].bottomRows(3);
        const Eigen::MatrixXd v2 = y[t - 2].bottomRows(3);
        const Eigen::MatrixXd d1 = v0 - v1;
        const Eigen::MatrixXd d2 = v0 - 2.0 * v1 + v2;
        dy[t].bottomRows(3) += c_sm * (2.0 * d1 + d2);
        dy[t - 1].bottomRows(3) += c_sm * (-2.0 * d1 - 2.0 * d2);
        dy[t - 2].bottomRows(3) += c_sm * d2;
      }
    } else {
      std::vector<Eigen::MatrixXd> prob(t_len);
      for (int t = 0; t < t_len; ++t) prob[t] = y[t].topRows(4).unaryExpr(&sigmoid);
      for (int t = 2; t < t_len; ++t) {
        const Eigen::MatrixXd d1 = prob[t] - prob[t - 1];
        const Eigen::MatrixXd d2 = prob[t] - 2.0 * prob[t - 1] + prob[t - 2];
        auto through_sigmoid = [&](int tt, const Eigen::MatrixXd& dc) {
          dy[tt].topRows(4) +=
              dc.cwiseProduct(prob[tt].cwiseProduct((1.0 - prob[tt].array()).matrix()));
        };
        through_sigmoid(t, c_sm * (2.0 * d1 + d2));
        through_sigmoid(t - 1, c_sm * (-2.0 * d1 - 2.0 * d2));
        through_sigmoid(t - 2, c_sm * d2);
      }
    }
  }

  Gradients g = Gradients::zeros_like(model);
  Eigen::MatrixXd carry = Eigen::MatrixXd::Zero(hd, b);  // dL/dh_{t+1} recurrent part

  for (int t = t_len - 1; t >= 0; --t) {
    // MLP backward.
    const Eigen::MatrixXd de2 = model.mlp[2].w.transpose() * dy[t];
    const Eigen::MatrixXd da2 =
        de2.cwiseProduct(cache.e2[t].unaryExpr(&elu_grad_from_output));
    const Eigen::MatrixXd de1 = model.mlp[1].w.transpose() * da2;
    const Eigen::MatrixXd da1 =
        de1.cwiseProduct(cache.e1[t].unaryExpr(&elu_grad_from_output));

    Eigen::MatrixXd u(hd + model.input_dim(), b);
    u.topRows(hd) = cache.h[t + 1];
    u.bottomRows(model.input_dim()) = cache.x[t];
    g.mlp[2].w += dy[t] * cache.e2[t].transpose();
    g.mlp[2].b += dy[t].rowwise().sum();
    g.mlp[1].w += da2 * cache.e1[t].transpose();
    g.mlp[1].b += da2.rowwise().sum();
    g.mlp[0].w += da1 * u.transpose();
    g.mlp[0].b += da1.rowwise().sum();

    // GRU backward.
    const Eigen::MatrixXd dh1 = (model.mlp[0].w.transpose() * da1).topRows(hd) + carry;
    const Eigen::MatrixXd& z = cache.z[t];
    const Eigen::MatrixXd& r = cache.r[t];
    const Eigen::MatrixXd& n = cache.n[t];
    const Eigen::MatrixXd& h_prev = cache.h[t];

    const Eigen::MatrixXd dz = dh1.cwiseProduct(h_prev - n);
    const Eigen::MatrixXd dn = dh1.cwiseProduct((1.0 - z.array()).matrix());
    Eigen::MatrixXd dh_prev = dh1.cwiseProduct(z);

    const Eigen::MatrixXd dan = dn.cwiseProduct((1.0 - n.array().square()).matrix());
    const Eigen::MatrixXd dr = dan.cwiseProduct(cache.gh_n[t]);
    const Eigen::MatrixXd dghn = dan.cwiseProduct(r);
    const Eigen::MatrixXd daz = dz.cwiseProduct(z.cwiseProduct((1.0 - z.array()).matrix()));
    const Eigen::MatrixXd dar = dr.cwiseProduct(r.cwiseProduct((1.0 - r.array()).matrix()));

    const Eigen::MatrixXd& x = cache.x[t];
    g.gru_w_ih.topRows(hd) += daz * x.transpose();
    g.gru_w_ih.middleRows(hd, hd) += dar * x.transpose();
    g.gru_w_ih.bottomRows(hd) += dan * x.transpose();
    g.gru_w_hh.topRows(hd) += daz * h_prev.transpose();
    g.gru_w_hh.middleRows(hd, hd) += dar * h_prev.transpose();
    g.gru_w_hh.bottomRows(hd) += dghn * h_prev.transpose();

    g.gru_b_ih.head(hd) += daz.rowwise().sum();
    g.gru_b_ih.segment(hd, hd) += dar.rowwise().sum();
    g.gru_b_ih.tail(hd) += dan.rowwise().sum();
    g.gru_b_hh.head(hd) += daz.rowwise().sum();
    g.gru_b_hh.segment(hd, hd) += dar.rowwise().sum();
    g.gru_b_hh.tail(hd) += dan.rowwise().sum();

    dh_prev += model.gru.w_hh.topRows(hd).transpose() * daz;
    dh_prev += model.gru.w_hh.middleRows(hd, hd).transpose() * dar;
    dh_prev += model.gru.w_hh.bottomRows(hd).transpose() * dghn;
    carry = std::move(dh_prev);
  }
  return g;
}

AdamState AdamState::zeros_like(const NmnModel& model) {
  return {Gradients::zeros_like(model), Gradients::zeros_like(model), 0};
}

namespace {

void adam_tensor(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad,
                 Eigen::MatrixXd& m, Eigen::MatrixXd& v, double lr, double bc1, double bc2) {
  m = kBeta1 * m + (1.0 - kBeta1) * grad;
  v = kBeta2 * v.array().matrix() + (1.0 - kBeta2) * grad.cwiseProduct(grad);
  param -= (lr * (m / bc1).array() / ((v / bc2).array().sqrt() + kAdamEps)).matrix();
}

void adam_vector(Eigen::Ref<Eigen::VectorXd> param, const Eigen::VectorXd& grad,
                 Eigen::VectorXd& m, Eigen::VectorXd& v, double lr, double bc1, double bc2) {
  m = kBeta1 * m + (1.0 - kBeta1) * grad;
  v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
  param -= (lr * (m / bc1).array() / ((v / bc2).array().sqrt() + kAdamEps)).matrix();
}

}  // namespace

void adam_step(NmnModel& model, const Gradients& grads, AdamState& state, double lr) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  adam_tensor(model.gru.w_ih, grads.gru_w_ih, state.m.gru_w_ih, state.v.gru_w_ih, lr, bc1, bc2);
  adam_tensor(model.gru.w_hh, grads.gru_w_hh, state.m.gru_w_hh, state.v.gru_w_hh, lr, bc1, bc2);
  adam_vector(model.gru.b_ih, grads.gru_b_ih, state.m.gru_b_ih, state.v.gru_b_ih, lr, bc1, bc2);
  adam_vector(model.gru.b_hh, grads.gru_b_hh, state.m.gru_b_hh, state.v.gru_b_hh, lr, bc1, bc2);
  for (int i = 0; i < 3; ++i) {
    adam_tensor(model.mlp[i].w, grads.mlp[i].w, state.m.mlp[i].w, state.v.mlp[i].w, lr, bc1, bc2);
    adam_vector(model.mlp[i].b, grads.mlp[i].b, state.m.mlp[i].b, state.v.mlp[i].b, lr, bc1, bc2);
  }
}

ValMetrics evaluate_model(const NmnModel& model, const std::vector<TrainSequence>& seqs) {
  ValMetrics out;
  if (seqs.empty()) return out;
  check_batch(seqs);
  long correct = 0, total = 0;
  long tp = 0, fp = 0, fn = 0;
  double l1_sum = 0.0;
  long l1_count = 0;
  Eigen::Vector3d err_sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d err_sq = Eigen::Vector3d::Zero();

  std::vector<Eigen::MatrixXd> y;
  forward_batch(model, seqs, y, nullptr);
  const int t_len = static_cast<int>(y.size());
  for (size_t j = 0; j < seqs.size(); ++j) {
    const auto& s = seqs[j];
    for (int t = 0; t < t_len; ++t) {
      for (int f = 0; f < 4; ++f) {
        const bool pred = sigmoid(y[t](f, j)) >= 0.5;
        const bool lab = s.contact(f, t) > 0.5;
        correct += (pred == lab);
        ++total;
        tp += (pred && lab);
        fp += (pred && !lab);
        fn += (!pred && lab);
      }
      const Eigen::Vector3d err = y[t].col(j).tail(3) - s.velocity.col(t);
      l1_sum += err.cwiseAbs().sum();
      l1_count += 3;
      err_sum += err;
      err_sq += err.cwiseProduct(err);
    }
  }
  out.contact_accuracy = static_cast<double>(correct) / total;
  const double denom = 2.0 * tp + fp + fn;
  out.contact_f1 = denom > 0.0 ? 2.0 * tp / denom : 1.0;
  out.velocity_l1 = l1_sum / l1_count;
  const double n = static_cast<double>(l1_count / 3);
  const Eigen::Vector3d mean = err_sum / n;
  out.velocity_err_std = (err_sq / n - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
  return out;
}

std::string TrainReport::to_json() const {
  return json{{"train_loss", train_loss},
              {"val_loss", val_loss},
              {"val_contact_accuracy", val_contact_accuracy},
              {"val_velocity_l1", val_velocity_l1},
              {"stopped_iter", stopped_iter},
              {"wall_seconds", wall_seconds}}
      .dump(2);
}

namespace {

NmnModel random_init(const TrainConfig& cfg, std::mt19937_64& rng) {
  NmnModel m = NmnModel::zeros(kNmnInputDim, cfg.hidden, cfg.mlp1, cfg.mlp2);
  auto fill = [&rng](Eigen::Ref<Eigen::MatrixXd> w, int fan_in) {
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
    }
  };
  fill(m.gru.w_ih, kNmnInputDim);
  fill(m.gru.w_hh, cfg.hidden);
  for (int i = 0; i < 3; ++i) fill(m.mlp[i].w, static_cast<int>(m.mlp[i].w.cols()));
  return m;
}

void set_normalization(NmnModel& model, const std::vector<TrainSequence>& seqs) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kNmnInputDim);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(kNmnInputDim);
  long count = 0;
  for (const auto& s : seqs) {
    sum += s.inputs.rowwise().sum();
    sq += s.inputs.cwiseProduct(s.inputs).rowwise().sum();
    count += s.inputs.cols();
  }
  model.norm_mean = sum / count;
  const Eigen::VectorXd var =
      (sq / count - model.norm_mean.cwiseProduct(model.norm_mean)).cwiseMax(0.0);
  model.norm_std = var.cwiseSqrt().cwiseMax(1e-6);
}

void inject_noise(std::vector<TrainSequence>& batch, const TrainConfig& cfg,
                  std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& s : batch) {
    for (Eigen::Index t = 0; t < s.inputs.cols(); ++t) {
      for (int i = 0; i < 3; ++i) s.inputs(i, t) += cfg.inj_accel_std * gauss(rng);
      for (int i = 3; i < 6; ++i) s.inputs(i, t) += cfg.inj_gyro_std * gauss(rng);
      for (int i = 6; i < 18; ++i) s.inputs(i, t) += cfg.inj_encoder_std * gauss(rng);
      for (int i = 18; i < 30; ++i) s.inputs(i, t) += cfg.inj_joint_vel_std * gauss(rng);
      // Joint targets are commands, not sensors: left clean.
    }
  }
}

}  // namespace

TrainOutput train(const Dataset& dataset, const TrainConfig& cfg) {
  if (dataset.train.empty()) throw std::invalid_argument("train: empty dataset");
  const auto t_start = std::chrono::steady_clock::now();

  std::mt19937_64 rng(cfg.seed);
  NmnModel model = random_init(cfg, rng);
  set_normalization(model, dataset.train);
  AdamState adam = AdamState::zeros_like(model);

  TrainOutput out;
  out.report.stopped_iter = cfg.max_iters;
  double best_val = std::numeric_limits<double>::infinity();
  NmnModel best_model = model;
  int best_iter = 0;

  std::uniform_int_distribution<size_t> pick(0, dataset.train.size() - 1);
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    std::vector<TrainSequence> batch;
    batch.reserve(cfg.batch_size);
    for (int i = 0; i < cfg.batch_size; ++i) batch.push_back(dataset.train[pick(rng)]);
    if (cfg.noise_randomization) inject_noise(batch, cfg, rng);

    double last_loss = 0.0;
    for (int epoch = 0; epoch < cfg.epochs_per_iter; ++epoch) {
      const Gradients g = backward(model, batch, cfg);
      adam_step(model, g, adam, cfg.lr);
      if (epoch == cfg.epochs_per_iter - 1) last_loss = batch_loss(model, batch, cfg);
    }
    out.report.train_loss.push_back(last_loss);

    if (!dataset.val.empty()) {
      const double val_loss = batch_loss(model, dataset.val, cfg);
      const ValMetrics vm = evaluate_model(model, dataset.val);
      out.report.val_loss.push_back(val_loss);
      out.report.val_contact_accuracy.push_back(vm.contact_accuracy);
      out.report.val_velocity_l1.push_back(vm.velocity_l1);
      if (val_loss < best_val) {
        best_val = val_loss;
        best_model = model;
        best_iter = iter;
      }
    }
  }

  if (cfg.early_stop && !dataset.val.empty()) {
    out.model = std::move(best_model);
    out.report.stopped_iter = best_iter;
  } else {
    out.model = std::move(model);
  }
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

}  // namespace legodom
