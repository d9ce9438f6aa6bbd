// SPDX-License-Identifier: Apache-2.0

#include "legodom/nmn.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace legodom {

using nlohmann::json;

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument("NmnModel: " + what);
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows, const std::string& name) {
  if (!rows.is_array() || rows.empty() || !rows[0].is_array()) {
    throw std::invalid_argument("NmnModel: tensor " + name + " is not a 2-d array");
  }
  const Eigen::Index nr = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index nc = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd m(nr, nc);
  for (Eigen::Index r = 0; r < nr; ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != nc) {
      throw std::invalid_argument("NmnModel: ragged rows in tensor " + name);
    }
    for (Eigen::Index c = 0; c < nc; ++c) m(r, c) = rows[r][c].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vector_from_json(const json& a, const std::string& name) {
  if (!a.is_array()) throw std::invalid_argument("NmnModel: tensor " + name + " is not an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = a[i].get<double>();
  return v;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

double elu_grad_from_output(double y) { return y > 0.0 ? 1.0 : y + 1.0; }

void NmnModel::validate() const {
  const int in = input_dim();
  const int h = hidden_dim();
  require(in > 0, "empty normalization");
  require(norm_std.size() == in, "norm.std shape");
  require((norm_std.array() > 0.0).all(), "norm.std must be positive");
  require(norm_mean.allFinite() && norm_std.allFinite(), "non-finite normalization");

  require(gru.w_ih.rows() == 3 * h && gru.w_ih.cols() == in, "gru.w_ih shape");
  require(gru.w_hh.rows() == 3 * h && gru.w_hh.cols() == h, "gru.w_hh shape");
  require(gru.b_ih.size() == 3 * h, "gru.b_ih shape");
  require(gru.b_hh.size() == 3 * h, "gru.b_hh shape");
  require(gru.w_ih.allFinite() && gru.w_hh.allFinite() && gru.b_ih.allFinite() &&
              gru.b_hh.allFinite(),
          "non-finite gru weights");

  require(mlp[0].w.cols() == h + in, "mlp.layers[0].w shape");
  require(mlp[1].w.cols() == mlp[0].w.rows(), "mlp.layers[1].w shape");
  require(mlp[2].w.cols() == mlp[1].w.rows(), "mlp.layers[2].w shape");
  require(mlp[2].w.rows() == kNmnOutputDim, "mlp.layers[2].w output rows");
  for (int i = 0; i < 3; ++i) {
    require(mlp[i].b.size() == mlp[i].w.rows(), "mlp.layers[" + std::to_string(i) + "].b shape");
    require(mlp[i].w.allFinite() && mlp[i].b.allFinite(),
            "non-finite mlp.layers[" + std::to_string(i) + "]");
  }
}

NmnModel NmnModel::zeros(int input, int hidden, int h1, int h2) {
  NmnModel m;
  m.norm_mean = Eigen::VectorXd::Zero(input);
  m.norm_std = Eigen::VectorXd::Ones(input);
  m.gru.w_ih = Eigen::MatrixXd::Zero(3 * hidden, input);
  m.gru.w_hh = Eigen::MatrixXd::Zero(3 * hidden, hidden);
  m.gru.b_ih = Eigen::VectorXd::Zero(3 * hidden);
  m.gru.b_hh = Eigen::VectorXd::Zero(3 * hidden);
  m.mlp[0] = {Eigen::MatrixXd::Zero(h1, hidden + input), Eigen::VectorXd::Zero(h1)};
  m.mlp[1] = {Eigen::MatrixXd::Zero(h2, h1), Eigen::VectorXd::Zero(h2)};
  m.mlp[2] = {Eigen::MatrixXd::Zero(kNmnOutputDim, h2), Eigen::VectorXd::Zero(kNmnOutputDim)};
  return m;
}

NmnModel NmnModel::from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("NmnModel: parse error: ") + e.what());
  }
  if (root.value("format_version", 0) != 1) {
    throw std::runtime_error("NmnModel: unsupported format_version");
  }
  NmnModel m;
  m.norm_mean = vector_from_json(root.at("norm").at("mean"), "norm.mean");
  m.norm_std = vector_from_json(root.at("norm").at("std"), "norm.std");
  const auto& gru = root.at("gru");
  if (gru.value("gate_order", "") != "z,r,n") {
    throw std::runtime_error("NmnModel: unsupported gate_order");
  }
  m.gru.w_ih = matrix_from_json(gru.at("w_ih"), "gru.w_ih");
  m.gru.w_hh = matrix_from_json(gru.at("w_hh"), "gru.w_hh");
  m.gru.b_ih = vector_from_json(gru.at("b_ih"), "gru.b_ih");
  m.gru.b_hh = vector_from_json(gru.at("b_hh"), "gru.b_hh");
  const auto& layers = root.at("mlp").at("layers");
  if (!layers.is_array() || layers.size() != 3) {
    throw std::runtime_error("NmnModel: mlp.layers must have 3 entries");
  }
  for (int i = 0; i < 3; ++i) {
    m.mlp[i].w = matrix_from_json(layers[i].at("w"), "mlp.layers[" + std::to_string(i) + "].w");
    m.mlp[i].b = vector_from_json(layers[i].at("b"), "mlp.layers[" + std::to_string(i) + "].b");
  }
  m.validate();
  return m;
}

NmnModel NmnModel::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("NmnModel: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

std::string NmnModel::to_json() const {
  json root = {
      {"format_version", 1},
      {"norm", {{"mean", vector_to_json(norm_mean)}, {"std", vector_to_json(norm_std)}}},
      {"gru",
       {{"w_ih", matrix_to_json(gru.w_ih)},
        {"w_hh", matrix_to_json(gru.w_hh)},
        {"b_ih", vector_to_json(gru.b_ih)},
        {"b_hh", vector_to_json(gru.b_hh)},
        {"gate_order", "z,r,n"}}},
      {"mlp",
       {{"layers",
         json::array({json{{"w", matrix_to_json(mlp[0].w)}, {"b", vector_to_json(mlp[0].b)}},
                      json{{"w", matrix_to_json(mlp[1].w)}, {"b", vector_to_json(mlp[1].b)}},
                      json{{"w", matrix_to_json(mlp[2].w)}, {"b", vector_to_json(mlp[2].b)}}})}}},
  };
  return root.dump();
}

void NmnModel::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("NmnModel: cannot write " + path);
  f << to_json() << "\n";
}

Eigen::VectorXd gru_step(const NmnModel& model, const Eigen::VectorXd& x_norm,
                         const Eigen::VectorXd& h) {
  const int hd = model.hidden_dim();
  if (x_norm.size() != model.input_dim() || h.size() != hd) {
    throw std::invalid_argument("gru_step: dimension mismatch");
  }
  const Eigen::VectorXd gi = model.gru.w_ih * x_norm + model.gru.b_ih;
  const Eigen::VectorXd gh = model.gru.w_hh * h;  // hidden path, bias kept separate

  Eigen::VectorXd out(hd);
  for (int i = 0; i < hd; ++i) {
    const double z = sigmoid(gi(i) + gh(i) + model.gru.b_hh(i));
    const double r = sigmoid(gi(hd + i) + gh(hd + i) + model.gru.b_hh(hd + i));
    // Hidden-side bias of n sits outside the reset gating (see header).
    const double n =
        std::tanh(gi(2 * hd + i) + r * gh(2 * hd + i) + model.gru.b_hh(2 * hd + i));
    out(i) = (1.0 - z) * n + z * h(i);
  }
  return out;
}

NmnOutput nmn_forward(const NmnModel& model, const Eigen::VectorXd& m,
                      const Eigen::VectorXd& h) {
  if (!m.allFinite()) throw std::invalid_argument("nmn_forward: non-finite input");
  if (m.size() != model.input_dim()) {
    throw std::invalid_argument("nmn_forward: input dimension mismatch");
  }
  const Eigen::VectorXd x = (m - model.norm_mean).cwiseQuotient(model.norm_std);
  Eigen::VectorXd h_next = gru_step(model, x, h);

  Eigen::VectorXd u(h_next.size() + x.size());
  u << h_next, x;
  Eigen::VectorXd a1 = (model.mlp[0].w * u + model.mlp[0].b).unaryExpr(&elu);
  Eigen::VectorXd a2 = (model.mlp[1].w * a1 + model.mlp[1].b).unaryExpr(&elu);
  const Eigen::VectorXd y = model.mlp[2].w * a2 + model.mlp[2].b;

  NmnOutput out;
  for (int i = 0; i < 4; ++i) out.contact_prob(i) = sigmoid(y(i));
  out.velocity = y.tail<3>();
  out.hidden = std::move(h_next);
  return out;
}

}  // namespace legodom
