// SPDX-License-Identifier: Apache-2.0
//
// Matrix Lie-group primitives for SO(3) and SE_K(3): the extended pose
// group whose element carries one rotation plus K translational columns
// (velocity, position, contact points). Everything is double precision;
// all functions are pure.

#pragma once

#include <Eigen/Core>
#include <vector>

namespace legodom {

/// Small-angle threshold below which exp/log switch to Taylor series.
inline constexpr double kSmallAngle = 1e-8;

/// Skew-symmetric matrix S with S*w == v x w.
Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// Inverse of skew for an antisymmetric matrix (no symmetry check).
Eigen::Vector3d unskew(const Eigen::Matrix3d& m);

/// Rodrigues exponential so(3) -> SO(3).
Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w);

/// Principal logarithm SO(3) -> so(3), norm <= pi. Stable near 0 and pi.
/// Throws std::invalid_argument if R is not orthonormal within 1e-6.
Eigen::Vector3d so3_log(const Eigen::Matrix3d& r);

/// Left Jacobian of SO(3): integral of exp over the unit interval.
Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& w);

/// Inverse of the left Jacobian.
Eigen::Matrix3d so3_left_jacobian_inv(const Eigen::Vector3d& w);

/// Second-order integral Gamma_2 = sum_n skew(w)^n / (n+2)!.
/// Appears in the closed-form double integration of a rotating frame.
Eigen::Matrix3d so3_gamma2(const Eigen::Vector3d& w);

/// Projects a near-rotation onto SO(3) (polar factor, det +1). Idempotent.
Eigen::Matrix3d renormalize_rotation(const Eigen::Matrix3d& r);

/// True if R'R = I within tol and det(R) = 1 within tol.
bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9);

/// Element of SE_K(3): rotation block plus K translational columns laid out
///
///   [ R  c_0  c_1 ... c_{K-1} ]
///   [ 0   I_K                 ]
///
/// K is a runtime property (contact columns come and go).
class GroupElement {
 public:
  GroupElement() = default;
  GroupElement(const Eigen::Matrix3d& rot, Eigen::Matrix3Xd cols)
      : rot_(rot), cols_(std::move(cols)) {}

  /// Identity element with n translational columns.
  static GroupElement identity(int num_cols);

  const Eigen::Matrix3d& rotation() const { return rot_; }
  const Eigen::Matrix3Xd& columns() const { return cols_; }
  Eigen::Vector3d column(int i) const { return cols_.col(i); }
  void set_rotation(const Eigen::Matrix3d& r) { rot_ = r; }
  void set_column(int i, const Eigen::Vector3d& c) { cols_.col(i) = c; }

  int num_cols() const { return static_cast<int>(cols_.cols()); }
  /// Dimension of the tangent space: 3 + 3 * num_cols().
  int dof() const { return 3 + 3 * num_cols(); }
  /// Side length of the embedding matrix: 3 + num_cols().
  int matrix_size() const { return 3 + num_cols(); }

  /// Dense embedding matrix (see class comment).
  Eigen::MatrixXd matrix() const;
  static GroupElement from_matrix(const Eigen::MatrixXd& m);

  bool has_valid_structure(double tol = 1e-9) const;

 private:
  Eigen::Matrix3d rot_{Eigen::Matrix3d::Identity()};
  Eigen::Matrix3Xd cols_{3, 0};
};

/// Exponential map of SE_K(3). xi = [w; u_0; u_1; ...] with 3 entries per
/// column; each column maps through the left Jacobian of w.
/// Throws std::invalid_argument on a dimension that is not a multiple of 3.
GroupElement sek3_exp(const Eigen::VectorXd& xi);

/// Lie-algebra embedding of a tangent vector (the "wedge" matrix).
Eigen::MatrixXd sek3_wedge(const Eigen::VectorXd& xi);

/// Group composition a * b. Throws on mismatched column counts.
GroupElement compose(const GroupElement& a, const GroupElement& b);

/// Group inverse.
GroupElement inverse(const GroupElement& a);

/// Adjoint matrix satisfying exp(Ad_a xi) * a == a * exp(xi).
Eigen::MatrixXd adjoint(const GroupElement& a);

}  // namespace legodom
