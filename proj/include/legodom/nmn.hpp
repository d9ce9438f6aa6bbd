// SPDX-License-Identifier: Apache-2.0
//
// Forward inference of the neural measurement network: a GRU followed by a
// two-hidden-layer MLP mapping one proprioceptive frame to four contact
// probabilities and the body-frame linear velocity. The weight-file layout
// and the gate convention below are the contract shared with the trainer.
//
// Gate convention (gate order z, r, n in the stacked weight rows):
//   z = sigmoid(W_z x + U_z h + bz)
//   r = sigmoid(W_r x + U_r h + br)
//   n = tanh   (W_n x + r .* (U_n h) + bn)
//   h' = (1 - z) .* n + z .* h
// where each gate bias is the sum of its input-side and hidden-side rows
// (the hidden-side bias of n is added outside the reset gating).

#pragma once

#include <Eigen/Core>
#include <array>
#include <string>

namespace legodom {

/// Input layout of one frame m_t, 42 channels in this exact order:
/// accel(3), gyro(3), q(12), dq(12), previous joint targets(12).
inline constexpr int kNmnInputDim = 42;
inline constexpr int kNmnOutputDim = 7;  // 4 contact logits + 3 velocity
inline constexpr int kNmnHiddenDefault = 128;

struct GruWeights {
  Eigen::MatrixXd w_ih;  // (3H) x In, gate rows stacked z, r, n
  Eigen::MatrixXd w_hh;  // (3H) x H
  Eigen::VectorXd b_ih;  // 3H
  Eigen::VectorXd b_hh;  // 3H
};

struct DenseLayer {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

struct NmnModel {
  Eigen::VectorXd norm_mean;  // per input channel
  Eigen::VectorXd norm_std;   // per input channel, > 0
  GruWeights gru;
  std::array<DenseLayer, 3> mlp;  // (H+In)->h1, h1->h2, h2->7

  int input_dim() const { return static_cast<int>(norm_mean.size()); }
  int hidden_dim() const { return static_cast<int>(gru.w_hh.cols()); }

  /// Throws std::invalid_argument naming the offending tensor on any
  /// dimension inconsistency, non-finite value or non-positive std.
  void validate() const;

  /// Zero-weight model of the given sizes with unit normalization.
  static NmnModel zeros(int input, int hidden, int h1, int h2);

  static NmnModel from_json(const std::string& text);
  static NmnModel load(const std::string& path);
  std::string to_json() const;
  void save(const std::string& path) const;
};

struct NmnOutput {
  Eigen::Vector4d contact_prob;  // in (0, 1)
  Eigen::Vector3d velocity;      // m/s, body frame
  Eigen::VectorXd hidden;        // updated GRU state
};

/// One GRU step on an already-normalized input.
Eigen::VectorXd gru_step(const NmnModel& model, const Eigen::VectorXd& x_norm,
                         const Eigen::VectorXd& h);

/// Full forward pass: normalize, GRU, MLP on [h'; x_norm], sigmoid contact
/// head and linear velocity head. Throws std::invalid_argument on non-finite
/// input or dimension mismatch.
NmnOutput nmn_forward(const NmnModel& model, const Eigen::VectorXd& m,
                      const Eigen::VectorXd& h);

/// Exponential linear unit, the hidden activation of the MLP.
double elu(double x);
/// Derivative of elu expressed from its output value.
double elu_grad_from_output(double y);

}  // namespace legodom
