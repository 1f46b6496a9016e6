#pragma once

// Matrix Lie groups used by the estimator: SO(3), SE(3) and the extended
// pose group SE2(3) (rotation + velocity + position, 5x5 matrices).
//
// Algebra coordinate conventions, used everywhere in this codebase:
//   so3  vector: [w]          (rad)
//   se3  vector: [w, p]       (rotation first, then translation)
//   se23 vector: [w, nu, rho] (rotation, velocity slot, position slot)

#include <Eigen/Dense>

#include "lio/errors.hpp"

namespace lio {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat5 = Eigen::Matrix<double, 5, 5>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Mat32 = Eigen::Matrix<double, 3, 2>;

// Angles below this use Taylor expansions of the trigonometric coefficients.
inline constexpr double kSmallAngle = 1e-6;
// log() refuses rotations closer to pi than this (principal branch boundary).
inline constexpr double kPiGuard = 1e-6;

Mat3 skew(const Vec3& v);
Vec3 unskew(const Mat3& m);

// Closed-form left Jacobian of SO(3) and its inverse.
Mat3 so3_left_jacobian(const Vec3& w);
Mat3 so3_left_jacobian_inv(const Vec3& w);

// --------------------------------------------------------------------------
// SO(3)

class Rot3 {
 public:
  Rot3() : m_(Mat3::Identity()) {}
  explicit Rot3(const Mat3& m) : m_(m) {}

  static Rot3 identity() { return Rot3(); }
  static Rot3 exp(const Vec3& w);

  Vec3 log() const;

  Rot3 operator*(const Rot3& o) const { return Rot3(m_ * o.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  Rot3 inverse() const { return Rot3(m_.transpose()); }

  const Mat3& matrix() const { return m_; }
  Mat3 adjoint_matrix() const { return m_; }

  // Frobenius distance of R^T R from identity; used by the drift guard.
  double orthogonality_error() const;
  // Projects back onto SO(3) via the polar factor.
  void reorthonormalize();

 private:
  Mat3 m_;
};

// --------------------------------------------------------------------------
// SE(3): rotation + translation, used for the LiDAR-IMU extrinsic.

class Pose {
 public:
  Pose() : t_(Vec3::Zero()) {}
  Pose(const Rot3& r, const Vec3& t) : r_(r), t_(t) {}

  static Pose identity() { return Pose(); }
  static Pose exp(const Vec6& v);
  static Mat4 hat(const Vec6& v);

  Vec6 log() const;

  Pose operator*(const Pose& o) const { return Pose(r_ * o.r_, t_ + r_ * o.t_); }
  Vec3 operator*(const Vec3& p) const { return r_ * p + t_; }
  Pose inverse() const {
    Rot3 ri = r_.inverse();
    return Pose(ri, -(ri * t_));
  }

  const Rot3& rotation() const { return r_; }
  const Vec3& translation() const { return t_; }
  Mat4 matrix() const;

  Mat6 adjoint_matrix() const;

  void reorthonormalize() { r_.reorthonormalize(); }

 private:
  Rot3 r_;
  Vec3 t_;
};

// Little adjoint ad_u on se(3): ad_u v = [u, v].
Mat6 se3_ad(const Vec6& u);

// --------------------------------------------------------------------------
// SE2(3): rotation + velocity + position (navigation state).

class ExtendedPose {
 public:
  ExtendedPose() : v_(Vec3::Zero()), p_(Vec3::Zero()) {}
  ExtendedPose(const Rot3& r, const Vec3& v, const Vec3& p) : r_(r), v_(v), p_(p) {}

  static ExtendedPose identity() { return ExtendedPose(); }
  static ExtendedPose exp(const Vec9& u);
  static Mat5 hat(const Vec9& u);

  Vec9 log() const;

  ExtendedPose operator*(const ExtendedPose& o) const {
    return ExtendedPose(r_ * o.r_, v_ + r_ * o.v_, p_ + r_ * o.p_);
  }
  ExtendedPose inverse() const {
    Rot3 ri = r_.inverse();
    return ExtendedPose(ri, -(ri * v_), -(ri * p_));
  }

  const Rot3& rotation() const { return r_; }
  const Vec3& velocity() const { return v_; }
  const Vec3& position() const { return p_; }
  Mat5 matrix() const;

  // Pose part (rotation, position); drops the velocity column.
  Pose pose() const { return Pose(r_, p_); }

  Mat9 adjoint_matrix() const;

  void reorthonormalize() { r_.reorthonormalize(); }

 private:
  Rot3 r_;
  Vec3 v_;
  Vec3 p_;
};

// Little adjoint ad_u on se2(3).
Mat9 se23_ad(const Vec9& u);

// Left Jacobian of SE2(3) as a 9x9 series in ad_u: sum_k ad_u^k / (k+1)!.
// Used by the symmetry-group exponential (semi-direct factor).
Mat9 se23_left_jacobian(const Vec9& u);

void throw_if_not_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* who);

}  // namespace lio
