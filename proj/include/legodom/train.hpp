// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale supervised training of the measurement network on synthetic
// trajectories: binary cross entropy on the contact head plus L1 on the
// velocity head, an optional temporal smoothness penalty on either head,
// exact reverse-mode gradients through the GRU (full backpropagation
// through time) and Adam.

#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "legodom/log.hpp"
#include "legodom/nmn.hpp"

namespace legodom {

/// One training window: raw (unnormalized) inputs and labels, time along
/// columns.
struct TrainSequence {
  Eigen::MatrixXd inputs;    // 42 x T
  Eigen::MatrixXd contact;   // 4 x T in {0,1}
  Eigen::MatrixXd velocity;  // 3 x T, body frame, m/s
};

struct Dataset {
  std::vector<TrainSequence> train;
  std::vector<TrainSequence> val;
};

/// Slices logs + sidecars into non-overlapping windows of seq_len and holds
/// out a fraction of whole trajectories for validation.
Dataset make_dataset(const std::vector<std::pair<TrajectoryLog, std::vector<GtRecord>>>& logs,
                     int seq_len, double val_fraction, std::uint64_t seed);

/// Reads every "*.jsonl" log (skipping sidecars) with its ".gt.jsonl" twin.
Dataset load_dataset_dir(const std::string& dir, int seq_len, double val_fraction,
                         std::uint64_t seed);

enum class SmoothTarget { Velocity, Contact, None };

struct TrainConfig {
  double lr = 5e-4;
  int epochs_per_iter = 32;  // gradient steps on each iteration's sample
  int max_iters = 200;
  double lambda = 50.0;
  SmoothTarget smooth_target = SmoothTarget::Velocity;
  bool noise_randomization = true;  // fresh sensor noise on inputs each iteration
  std::uint64_t seed = 0;
  int batch_size = 32;
  int seq_len = 400;
  double val_fraction = 0.1;
  bool early_stop = false;  // keep the best-validation weights instead of the last

  int hidden = kNmnHiddenDefault;
  int mlp1 = 256;
  int mlp2 = 128;

  // Injected sensor noise (standard deviations per channel group).
  double inj_gyro_std = 0.01;
  double inj_accel_std = 0.1;
  double inj_encoder_std = 0.001;
  double inj_joint_vel_std = 0.05;

  static TrainConfig from_json(const std::string& text);
  static TrainConfig load(const std::string& path);
  std::string to_json() const;
};

// ---------------------------------------------------------------------------
// Loss functions. Sequence matrices carry time along columns.

/// Mean binary cross entropy evaluated on logits.
double loss_bce_logits(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& labels);

/// Mean absolute error.
double loss_l1(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

/// BCE(contact) + L1(velocity).
double loss_supervised(const Eigen::MatrixXd& contact_logits,
                       const Eigen::MatrixXd& contact_labels,
                       const Eigen::MatrixXd& velocity_pred,
                       const Eigen::MatrixXd& velocity_labels);

/// Mean over t >= 2 of ||x_t - x_{t-1}||^2 + 1/2 ||x_t - 2 x_{t-1} + x_{t-2}||^2.
/// Throws std::invalid_argument for sequences shorter than 3.
double temporal_smoothness(const Eigen::MatrixXd& seq);

double loss_smooth_velocity(const Eigen::MatrixXd& velocity_seq);  // 3 x T
double loss_smooth_contact(const Eigen::MatrixXd& contact_prob_seq);  // 4 x T

/// Supervised plus lambda-weighted smoothness on the configured head, for
/// one sequence. Contact smoothness is taken on probabilities.
double total_loss_sequence(const Eigen::MatrixXd& contact_logits,
                           const Eigen::MatrixXd& contact_labels,
                           const Eigen::MatrixXd& velocity_pred,
                           const Eigen::MatrixXd& velocity_labels,
                           const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Gradients, optimizer, loop.

struct Gradients {
  Eigen::MatrixXd gru_w_ih, gru_w_hh;
  Eigen::VectorXd gru_b_ih, gru_b_hh;
  std::array<DenseLayer, 3> mlp;  // reused as (w grad, b grad)

  static Gradients zeros_like(const NmnModel& m);
  double max_abs() const;
};

/// Mean total loss of a batch (uniform T), forward only.
double batch_loss(const NmnModel& model, const std::vector<TrainSequence>& batch,
                  const TrainConfig& cfg);

/// Exact gradients of batch_loss with respect to every model tensor.
Gradients backward(const NmnModel& model, const std::vector<TrainSequence>& batch,
                   const TrainConfig& cfg);

struct AdamState {
  Gradients m, v;
  std::int64_t step = 0;

  static AdamState zeros_like(const NmnModel& model);
};

/// Standard Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8 and
/// bias-corrected moments; updates the model in place.
void adam_step(NmnModel& model, const Gradients& grads, AdamState& state, double lr);

struct ValMetrics {
  double contact_accuracy = 0.0;
  double contact_f1 = 0.0;
  double velocity_l1 = 0.0;
  Eigen::Vector3d velocity_err_std{Eigen::Vector3d::Zero()};
};

/// Forward evaluation over whole sequences (hidden state reset per sequence).
ValMetrics evaluate_model(const NmnModel& model, const std::vector<TrainSequence>& seqs);

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_contact_accuracy;
  std::vector<double> val_velocity_l1;
  int stopped_iter = 0;
  double wall_seconds = 0.0;

  std::string to_json() const;
};

struct TrainOutput {
  NmnModel model;
  TrainReport report;
};

/// Runs max_iters iterations of fresh batch sampling (with fresh injected
/// sensor noise when enabled) and epochs_per_iter Adam steps each.
/// Normalization constants come from the training split. Deterministic for
/// a fixed seed. Throws std::invalid_argument on an empty dataset.
TrainOutput train(const Dataset& dataset, const TrainConfig& cfg);

}  // namespace legodom
