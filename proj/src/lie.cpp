// SPDX-License-Identifier: Apache-2.0

#include "legodom/lie.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace legodom {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  // clang-format off
  s <<     0, -v.z(),  v.y(),
       v.z(),      0, -v.x(),
      -v.y(),  v.x(),      0;
  // clang-format on
  return s;
}

Eigen::Vector3d unskew(const Eigen::Matrix3d& m) {
  return {m(2, 1), m(0, 2), m(1, 0)};
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  const Eigen::Matrix3d wx = skew(w);
  if (theta < kSmallAngle) {
    // Second-order Taylor: coefficients of wx and wx^2 at theta -> 0.
    return Eigen::Matrix3d::Identity() + wx + 0.5 * wx * wx;
  }
  const double s = std::sin(theta) / theta;
  const double c = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + s * wx + c * wx * wx;
}

bool is_rotation(const Eigen::Matrix3d& r, double tol) {
  const Eigen::Matrix3d err = r.transpose() * r - Eigen::Matrix3d::Identity();
  return err.cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d& r) {
  if (!is_rotation(r, 1e-6)) {
    throw std::invalid_argument("so3_log: input is not orthonormal within 1e-6");
  }
  const double cos_theta = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  const Eigen::Vector3d axis_sin = unskew(r - r.transpose()) * 0.5;  // sin(theta) * axis

  if (theta < kSmallAngle) {
    return axis_sin;  // theta/sin(theta) -> 1
  }
  if (theta < M_PI - 1e-4) {
    return axis_sin * (theta / std::sin(theta));
  }
  // Near pi the antisymmetric part vanishes; recover the axis from the
  // symmetric part R + R' = 2 cos(theta) I + 2 (1 - cos(theta)) a a'.
  const Eigen::Matrix3d aat =
      (r + r.transpose() - 2.0 * cos_theta * Eigen::Matrix3d::Identity()) /
      (2.0 * (1.0 - cos_theta));
  int k = 0;
  aat.diagonal().maxCoeff(&k);
  Eigen::Vector3d axis = aat.col(k) / std::sqrt(std::max(aat(k, k), 1e-300));
  axis.normalize();
  // Pick the sign consistent with the (possibly tiny) antisymmetric part.
  if (axis.dot(axis_sin) < 0.0) axis = -axis;
  return theta * axis;
}

Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  const Eigen::Matrix3d wx = skew(w);
  if (theta < 1e-4) {
    // 1/2 - t^2/24, 1/6 - t^2/120
    const double t2 = theta * theta;
    return Eigen::Matrix3d::Identity() + (0.5 - t2 / 24.0) * wx +
           (1.0 / 6.0 - t2 / 120.0) * wx * wx;
  }
  const double t2 = theta * theta;
  const double a = (1.0 - std::cos(theta)) / t2;
  const double b = (theta - std::sin(theta)) / (t2 * theta);
  return Eigen::Matrix3d::Identity() + a * wx + b * wx * wx;
}

Eigen::Matrix3d so3_left_jacobian_inv(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  const Eigen::Matrix3d wx = skew(w);
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    return Eigen::Matrix3d::Identity() - 0.5 * wx +
           (1.0 / 12.0 + t2 / 720.0) * wx * wx;
  }
  const double c = 1.0 / (theta * theta) -
                   (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Eigen::Matrix3d::Identity() - 0.5 * wx + c * wx * wx;
}

Eigen::Matrix3d so3_gamma2(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  const Eigen::Matrix3d wx = skew(w);
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    return 0.5 * Eigen::Matrix3d::Identity() + (1.0 / 6.0 - t2 / 120.0) * wx +
           (1.0 / 24.0 - t2 / 720.0) * wx * wx;
  }
  const double t2 = theta * theta;
  const double a = (theta - std::sin(theta)) / (t2 * theta);
  const double b = (t2 + 2.0 * std::cos(theta) - 2.0) / (2.0 * t2 * t2);
  return 0.5 * Eigen::Matrix3d::Identity() + a * wx + b * wx * wx;
}

Eigen::Matrix3d renormalize_rotation(const Eigen::Matrix3d& r) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

GroupElement GroupElement::identity(int num_cols) {
  return GroupElement(Eigen::Matrix3d::Identity(),
                      Eigen::Matrix3Xd::Zero(3, num_cols));
}

Eigen::MatrixXd GroupElement::matrix() const {
  const int n = matrix_size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  m.topLeftCorner<3, 3>() = rot_;
  m.topRightCorner(3, num_cols()) = cols_;
  return m;
}

GroupElement GroupElement::from_matrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() < 3) {
    throw std::invalid_argument("GroupElement::from_matrix: bad shape");
  }
  const int k = static_cast<int>(m.cols()) - 3;
  return GroupElement(m.topLeftCorner<3, 3>(), m.topRightCorner(3, k));
}

bool GroupElement::has_valid_structure(double tol) const {
  return is_rotation(rot_, tol) && cols_.allFinite();
}

GroupElement sek3_exp(const Eigen::VectorXd& xi) {
  if (xi.size() % 3 != 0 || xi.size() < 3) {
    throw std::invalid_argument("sek3_exp: dimension must be a positive multiple of 3");
  }
  const Eigen::Vector3d w = xi.head<3>();
  const Eigen::Matrix3d jl = so3_left_jacobian(w);
  const int k = static_cast<int>(xi.size() / 3) - 1;
  Eigen::Matrix3Xd cols(3, k);
  for (int i = 0; i < k; ++i) {
    cols.col(i) = jl * xi.segment<3>(3 + 3 * i);
  }
  return GroupElement(so3_exp(w), std::move(cols));
}

Eigen::MatrixXd sek3_wedge(const Eigen::VectorXd& xi) {
  if (xi.size() % 3 != 0 || xi.size() < 3) {
    throw std::invalid_argument("sek3_wedge: dimension must be a positive multiple of 3");
  }
  const int k = static_cast<int>(xi.size() / 3) - 1;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3 + k, 3 + k);
  m.topLeftCorner<3, 3>() = skew(xi.head<3>());
  for (int i = 0; i < k; ++i) {
    m.block<3, 1>(0, 3 + i) = xi.segment<3>(3 + 3 * i);
  }
  return m;
}

GroupElement compose(const GroupElement& a, const GroupElement& b) {
  if (a.num_cols() != b.num_cols()) {
    throw std::invalid_argument("compose: column count mismatch");
  }
  return GroupElement(a.rotation() * b.rotation(),
                      a.rotation() * b.columns() + a.columns());
}

GroupElement inverse(const GroupElement& a) {
  const Eigen::Matrix3d rt = a.rotation().transpose();
  return GroupElement(rt, -(rt * a.columns()));
}

Eigen::MatrixXd adjoint(const GroupElement& a) {
  const int k = a.num_cols();
  const int n = a.dof();
  Eigen::MatrixXd ad = Eigen::MatrixXd::Zero(n, n);
  ad.topLeftCorner<3, 3>() = a.rotation();
  for (int i = 0; i < k; ++i) {
    ad.block<3, 3>(3 + 3 * i, 0) = skew(a.column(i)) * a.rotation();
    ad.block<3, 3>(3 + 3 * i, 3 + 3 * i) = a.rotation();
  }
  return ad;
}

}  // namespace legodom
