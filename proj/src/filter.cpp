// SPDX-License-Identifier: Apache-2.0

#include "legodom/filter.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace legodom {

using nlohmann::json;

void NoiseConfig::validate() const {
  const double covs[] = {gyro_cov,      accel_cov,        contact_cov,
                         encoder_cov,   nmn_cov,          gyro_bias_cov,
                         accel_bias_cov, init_rot_cov,    init_vel_cov,
                         init_pos_cov,  init_gyro_bias_cov, init_accel_bias_cov};
  for (double c : covs) {
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw std::invalid_argument("NoiseConfig: covariances must be positive");
    }
  }
  if (!gravity.allFinite()) throw std::invalid_argument("NoiseConfig: bad gravity");
}

NoiseConfig NoiseConfig::from_json(const std::string& text) {
  json root = json::parse(text);
  NoiseConfig n;
  n.gyro_cov = root.value("gyro", n.gyro_cov);
  n.accel_cov = root.value("accel", n.accel_cov);
  n.contact_cov = root.value("contact", n.contact_cov);
  n.encoder_cov = root.value("encoder", n.encoder_cov);
  n.nmn_cov = root.value("nmn", n.nmn_cov);
  n.gyro_bias_cov = root.value("gyro_bias", n.gyro_bias_cov);
  n.accel_bias_cov = root.value("accel_bias", n.accel_bias_cov);
  if (root.contains("init")) {
    const auto& init = root["init"];
    n.init_rot_cov = init.value("rot", n.init_rot_cov);
    n.init_vel_cov = init.value("vel", n.init_vel_cov);
    n.init_pos_cov = init.value("pos", n.init_pos_cov);
    n.init_gyro_bias_cov = init.value("gyro_bias", n.init_gyro_bias_cov);
    n.init_accel_bias_cov = init.value("accel_bias", n.init_accel_bias_cov);
  }
  if (root.contains("gravity")) {
    const auto& g = root["gravity"];
    n.gravity = {g[0].get<double>(), g[1].get<double>(), g[2].get<double>()};
  }
  n.validate();
  return n;
}

NoiseConfig NoiseConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("noise config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

std::string NoiseConfig::to_json() const {
  json root = {
      {"gyro", gyro_cov},
      {"accel", accel_cov},
      {"contact", contact_cov},
      {"encoder", encoder_cov},
      {"nmn", nmn_cov},
      {"gyro_bias", gyro_bias_cov},
      {"accel_bias", accel_bias_cov},
      {"init",
       {{"rot", init_rot_cov},
        {"vel", init_vel_cov},
        {"pos", init_pos_cov},
        {"gyro_bias", init_gyro_bias_cov},
        {"accel_bias", init_accel_bias_cov}}},
      {"gravity", {gravity.x(), gravity.y(), gravity.z()}},
  };
  return root.dump(2);
}

Eigen::Vector3d FilterState::contact_point(int foot) const {
  const auto it = contact_map.find(foot);
  if (it == contact_map.end()) {
    throw std::invalid_argument("FilterState: foot not tracked");
  }
  return x.column(2 + it->second);
}

int FilterState::contact_error_offset(int foot) const {
  const auto it = contact_map.find(foot);
  if (it == contact_map.end()) {
    throw std::invalid_argument("FilterState: foot not tracked");
  }
  return 9 + 3 * it->second;
}

FilterState filter_init(const NoiseConfig& noise, const Eigen::Matrix3d& r0,
                        const Eigen::Vector3d& v0, const Eigen::Vector3d& p0) {
  noise.validate();
  FilterState s;
  Eigen::Matrix3Xd cols(3, 2);
  cols.col(0) = v0;
  cols.col(1) = p0;
  s.x = GroupElement(r0, cols);
  s.p_cov = Eigen::MatrixXd::Zero(15, 15);
  s.p_cov.diagonal().segment<3>(0).setConstant(noise.init_rot_cov);
  s.p_cov.diagonal().segment<3>(3).setConstant(noise.init_vel_cov);
  s.p_cov.diagonal().segment<3>(6).setConstant(noise.init_pos_cov);
  s.p_cov.diagonal().segment<3>(9).setConstant(noise.init_gyro_bias_cov);
  s.p_cov.diagonal().segment<3>(12).setConstant(noise.init_accel_bias_cov);
  return s;
}

Eigen::MatrixXd error_dynamics_matrix(const FilterState& s, const NoiseConfig& noise) {
  const int dim = s.error_dim();
  const int nc = s.x.num_cols();        // v, p, contacts
  const int bias_off = 3 + 3 * nc;      // start of bias rows/cols
  const Eigen::Matrix3d r = s.rotation();

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  a.block<3, 3>(3, 0) = skew(noise.gravity);          // gravity into velocity error
  a.block<3, 3>(6, 3) = Eigen::Matrix3d::Identity();  // velocity into position error
  // Bias columns: gyro bias enters every group block through -skew(col) R,
  // accel bias enters velocity only.
  a.block<3, 3>(0, bias_off) = -r;
  for (int i = 0; i < nc; ++i) {
    a.block<3, 3>(3 + 3 * i, bias_off) = -skew(s.x.column(i)) * r;
  }
  a.block<3, 3>(3, bias_off + 3) = -r;
  return a;
}

Eigen::MatrixXd propagation_phi(const FilterState& s, double dt, const NoiseConfig& noise) {
  // A is nilpotent (A^4 = 0): the exponential series terminates at the cubic
  // term, so Phi is exact.
  const Eigen::MatrixXd a = error_dynamics_matrix(s, noise);
  const Eigen::MatrixXd a2 = a * a;
  const Eigen::MatrixXd a3 = a2 * a;
  const int dim = s.error_dim();
  return Eigen::MatrixXd::Identity(dim, dim) + dt * a + (dt * dt / 2.0) * a2 +
         (dt * dt * dt / 6.0) * a3;
}

FilterState propagate(const FilterState& s, const ImuSample& imu, double dt,
                      const NoiseConfig& noise,
                      const std::map<int, double>& contact_cov_scale) {
  if (!(dt > 0.0)) throw std::invalid_argument("propagate: dt must be positive");
  if (dt > 0.05) throw std::invalid_argument("propagate: dt above 0.05 s guard");

  const Eigen::Vector3d w = imu.gyro - s.bias_gyro;
  const Eigen::Vector3d a_body = imu.accel - s.bias_accel;
  const Eigen::Matrix3d r = s.rotation();
  const Eigen::Vector3d g = noise.gravity;

  // Exact solution with the IMU sample held constant over [t, t+dt].
  const Eigen::Vector3d w_dt = w * dt;
  const Eigen::Matrix3d gamma1 = so3_left_jacobian(w_dt);
  const Eigen::Matrix3d gamma2 = so3_gamma2(w_dt);

  FilterState out = s;
  out.t = s.t + dt;
  out.x.set_rotation(r * so3_exp(w_dt));
  out.x.set_column(0, s.velocity() + (r * gamma1 * a_body + g) * dt);
  out.x.set_column(1, s.position() + s.velocity() * dt +
                          (r * gamma2 * a_body + 0.5 * g) * dt * dt);
  // Contact columns are stationary in the mean.

  const Eigen::MatrixXd phi = propagation_phi(s, dt, noise);

  const int dim = s.error_dim();
  const int nc = s.x.num_cols();
  const int bias_off = 3 + 3 * nc;
  Eigen::MatrixXd q_cont = Eigen::MatrixXd::Zero(dim, dim);
  q_cont.block<3, 3>(0, 0) = noise.gyro_cov * Eigen::Matrix3d::Identity();
  q_cont.block<3, 3>(3, 3) = noise.accel_cov * Eigen::Matrix3d::Identity();
  for (const auto& [foot, slot] : s.contact_map) {
    double scale = 1.0;
    if (const auto it = contact_cov_scale.find(foot); it != contact_cov_scale.end()) {
      scale = it->second;
    }
    q_cont.block<3, 3>(9 + 3 * slot, 9 + 3 * slot) =
        scale * noise.contact_cov * Eigen::Matrix3d::Identity();
  }
  q_cont.block<3, 3>(bias_off, bias_off) = noise.gyro_bias_cov * Eigen::Matrix3d::Identity();
  q_cont.block<3, 3>(bias_off + 3, bias_off + 3) =
      noise.accel_bias_cov * Eigen::Matrix3d::Identity();

  // Noise enters the right-invariant error through the adjoint of the state
  // (identity on the bias block); first-order discretization.
  Eigen::MatrixXd adj = Eigen::MatrixXd::Identity(dim, dim);
  adj.topLeftCorner(s.x.dof(), s.x.dof()) = adjoint(s.x);
  const Eigen::MatrixXd phi_adj = phi * adj;
  const Eigen::MatrixXd q_d = phi_adj * q_cont * phi_adj.transpose() * dt;

  out.p_cov = phi * s.p_cov * phi.transpose() + q_d;
  return out;
}

FilterState add_contact(const FilterState& s, int foot, const RobotModel& robot,
                        const Vector12d& q, const NoiseConfig& noise) {
  if (s.contact_map.count(foot) != 0) {
    throw std::invalid_argument("add_contact: foot already tracked");
  }
  const Eigen::Matrix3d r = s.rotation();
  const Eigen::Vector3d d = s.position() + r * fk_position(robot, q, foot);

  FilterState out = s;
  const int slot = s.x.num_cols() - 2;  // next free contact slot
  Eigen::Matrix3Xd cols(3, s.x.num_cols() + 1);
  cols.leftCols(s.x.num_cols()) = s.x.columns();
  cols.col(s.x.num_cols()) = d;
  out.x = GroupElement(r, std::move(cols));
  out.contact_map[foot] = slot;

  // New error block equals the position error block plus encoder noise
  // mapped through the leg Jacobian: insert a copy of the p rows.
  const int old_dim = s.error_dim();
  const int new_dim = old_dim + 3;
  const int ins = 9 + 3 * slot;  // insertion offset (end of contact blocks)
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(new_dim, old_dim);
  f.topLeftCorner(ins, ins).setIdentity();
  f.block<3, 3>(ins, 6) = Eigen::Matrix3d::Identity();
  f.bottomRightCorner(old_dim - ins, old_dim - ins).setIdentity();

  const Matrix3x12d jac = jacobian(robot, q, foot);
  const Eigen::Matrix3d meas_cov =
      r * jac * (noise.encoder_cov * jac.transpose()) * r.transpose();

  out.p_cov = Eigen::MatrixXd(f * s.p_cov * f.transpose());
  out.p_cov.block<3, 3>(ins, ins) += meas_cov;
  return out;
}

FilterState remove_contact(const FilterState& s, int foot) {
  const auto it = s.contact_map.find(foot);
  if (it == s.contact_map.end()) {
    throw std::invalid_argument("remove_contact: foot not tracked");
  }
  const int slot = it->second;
  const int col = 2 + slot;
  const int off = 9 + 3 * slot;

  FilterState out = s;
  Eigen::Matrix3Xd cols(3, s.x.num_cols() - 1);
  cols.leftCols(col) = s.x.columns().leftCols(col);
  cols.rightCols(s.x.num_cols() - col - 1) = s.x.columns().rightCols(s.x.num_cols() - col - 1);
  out.x = GroupElement(s.rotation(), std::move(cols));

  out.contact_map.erase(foot);
  for (auto& [f, sl] : out.contact_map) {
    if (sl > slot) --sl;
  }

  const int old_dim = s.error_dim();
  const int new_dim = old_dim - 3;
  Eigen::MatrixXd keep = Eigen::MatrixXd::Zero(new_dim, old_dim);
  keep.topLeftCorner(off, off).setIdentity();
  keep.bottomRightCorner(new_dim - off, old_dim - off - 3).setIdentity();
  out.p_cov = keep * s.p_cov * keep.transpose();
  return out;
}

namespace {

// Innovation of one right-invariant observation: the top three rows of
// X_est * Y (the selection Pi generalizes to the first three rows for any
// column count).
Eigen::Vector3d selected_innovation(const GroupElement& x, const Eigen::VectorXd& y) {
  return x.rotation() * y.head<3>() + x.columns() * y.tail(y.size() - 3);
}

}  // namespace

UpdateResult stacked_update(const FilterState& s, const RobotModel& robot,
                            const std::vector<KinematicObs>& kin_obs,
                            const std::optional<Eigen::Vector3d>& velocity_obs,
                            const NoiseConfig& noise) {
  const int n_obs = static_cast<int>(kin_obs.size()) + (velocity_obs ? 1 : 0);
  if (n_obs == 0) throw std::invalid_argument("stacked_update: no observation");

  const int dim = s.error_dim();
  const int rows = 3 * n_obs;
  const int cols_x = s.x.num_cols();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(rows, dim);
  Eigen::MatrixXd n_bar = Eigen::MatrixXd::Zero(rows, rows);
  Eigen::VectorXd z(rows);

  const Eigen::Matrix3d r = s.rotation();
  int row = 0;
  for (const auto& obs : kin_obs) {
    const int d_off = s.contact_error_offset(obs.foot);  // throws if untracked
    const int slot = s.contact_map.at(obs.foot);

    // Y = [h_p; 0; 1; 0.. -1 ..0] so that Y = X^-1 b at the true state.
    Eigen::VectorXd y = Eigen::VectorXd::Zero(3 + cols_x);
    y.head<3>() = fk_position(robot, obs.q, obs.foot);
    y(3 + 1) = 1.0;         // position column
    y(3 + 2 + slot) = -1.0;  // this contact's column
    z.segment<3>(row) = selected_innovation(s.x, y);

    h.block<3, 3>(row, 6) = -Eigen::Matrix3d::Identity();
    h.block<3, 3>(row, d_off) = Eigen::Matrix3d::Identity();

    const Matrix3x12d jac = jacobian(robot, obs.q, obs.foot);
    n_bar.block<3, 3>(row, row) =
        r * jac * (noise.encoder_cov * jac.transpose()) * r.transpose();
    row += 3;
  }
  if (velocity_obs) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(3 + cols_x);
    y.head<3>() = *velocity_obs;
    y(3 + 0) = -1.0;  // velocity column
    z.segment<3>(row) = selected_innovation(s.x, y);

    h.block<3, 3>(row, 3) = Eigen::Matrix3d::Identity();
    n_bar.block<3, 3>(row, row) = noise.nmn_cov * r * r.transpose();
  }

  const Eigen::MatrixXd s_innov = h * s.p_cov * h.transpose() + n_bar;

  // Near-singular innovation covariance: skip rather than blow up.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s_innov);
  const double ev_min = eig.eigenvalues().minCoeff();
  const double ev_max = eig.eigenvalues().maxCoeff();
  if (!(ev_min > 0.0) || ev_max / ev_min > 1e12) {
    return {s, false};
  }

  const Eigen::MatrixXd k = s.p_cov * h.transpose() * s_innov.inverse();
  const Eigen::VectorXd delta = k * z;

  UpdateResult out{s, true};
  const GroupElement correction = sek3_exp(delta.head(s.x.dof()));
  out.state.x = compose(correction, s.x);
  out.state.bias_gyro += delta.segment<3>(s.x.dof());
  out.state.bias_accel += delta.segment<3>(s.x.dof() + 3);

  const Eigen::MatrixXd i_kh = Eigen::MatrixXd::Identity(dim, dim) - k * h;
  out.state.p_cov = i_kh * s.p_cov * i_kh.transpose() + k * n_bar * k.transpose();
  return out;
}

UpdateResult update_kinematics(const FilterState& s, const RobotModel& robot, int foot,
                               const Vector12d& q, const NoiseConfig& noise) {
  return stacked_update(s, robot, {{foot, q}}, std::nullopt, noise);
}

UpdateResult update_velocity(const FilterState& s, const Eigen::Vector3d& v_meas,
                             const NoiseConfig& noise) {
  if (!v_meas.allFinite()) throw std::invalid_argument("update_velocity: non-finite input");
  static const RobotModel dummy;  // unused by the velocity path
  return stacked_update(s, dummy, {}, v_meas, noise);
}

}  // namespace legodom
