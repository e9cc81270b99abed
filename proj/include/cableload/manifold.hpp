#pragma once

// SO(3) and S^2 kernel: hat/vee, exponential and logarithm maps, projection
// back onto the group, and the attitude error functions used by the
// controller and the stability diagnostics.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cableload/errors.hpp"

namespace cableload {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kOrthTol = 1e-9;
inline constexpr double kUnitTol = 1e-9;
inline constexpr double kTangentTol = 1e-9;
inline constexpr double kSkewTol = 1e-9;
inline constexpr double kUnitNormalizeTol = 1e-6;

inline Vec3 e1() { return Vec3::UnitX(); }
inline Vec3 e2() { return Vec3::UnitY(); }
inline Vec3 e3() { return Vec3::UnitZ(); }

inline Mat3 hat(const Vec3& v) {
  Mat3 S;
  S << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return S;
}

namespace detail {
// Vee of the skew part; exact inverse of hat() in floating point.
inline Vec3 vee_unchecked(const Mat3& S) {
  return Vec3(0.5 * (S(2, 1) - S(1, 2)), 0.5 * (S(0, 2) - S(2, 0)), 0.5 * (S(1, 0) - S(0, 1)));
}
}  // namespace detail

inline Vec3 vee(const Mat3& S) {
  const double asym = (S + S.transpose()).norm();
  if (!(asym < kSkewTol)) {
    throw Error(ErrorCode::NonSkewInput, "||S + S^T|| = " + std::to_string(asym));
  }
  return detail::vee_unchecked(S);
}

/// Element of SO(3). Construction from a raw matrix checks R^T R = I and
/// det R = 1 to within kOrthTol (max-norm); no silent projection.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  static Rotation from_matrix(const Mat3& m, double tol = kOrthTol) {
    const double orth = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
    const double det = m.determinant();
    if (!(orth <= tol) || !(std::abs(det - 1.0) <= tol)) {
      throw Error(ErrorCode::InvalidRotation,
                  "orthogonality residual " + std::to_string(orth) + ", det " + std::to_string(det));
    }
    return Rotation(m);
  }

  /// Caller guarantees the matrix is already a rotation (e.g. freshly projected).
  static Rotation unchecked(const Mat3& m) { return Rotation(m); }

  static Rotation identity() { return Rotation(); }

  const Mat3& matrix() const { return m_; }
  Rotation transpose() const { return Rotation(m_.transpose()); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  Rotation operator*(const Rotation& other) const { return Rotation(m_ * other.m_); }

 private:
  explicit Rotation(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

/// Element of S^2. Inputs within kUnitNormalizeTol of unit length are
/// renormalized; anything farther away is rejected.
class UnitVector {
 public:
  UnitVector() : v_(Vec3::UnitZ()) {}

  static UnitVector from_vector(const Vec3& v) {
    const double n = v.norm();
    if (!(std::abs(n - 1.0) <= kUnitNormalizeTol)) {
      throw Error(ErrorCode::InvalidUnitVector, "norm " + std::to_string(n));
    }
    return UnitVector(v / n);
  }

  /// Normalizes any nonzero vector.
  static UnitVector normalized(const Vec3& v) {
    const double n = v.norm();
    if (!(n > 1e-12)) throw Error(ErrorCode::InvalidUnitVector, "zero vector");
    return UnitVector(v / n);
  }

  static UnitVector unchecked(const Vec3& v) { return UnitVector(v); }

  const Vec3& vector() const { return v_; }
  double operator[](int i) const { return v_[i]; }

 private:
  explicit UnitVector(const Vec3& v) : v_(v) {}
  Vec3 v_;
};

/// Rodrigues formula; series coefficients below 1e-8 rad.
inline Rotation exp_so3(const Vec3& v) {
  const double theta = v.norm();
  const Mat3 V = hat(v);
  double a, b;
  if (theta < 1e-8) {
    const double t2 = theta * theta;
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
  }
  return Rotation::unchecked(Mat3::Identity() + a * V + b * V * V);
}

/// Principal logarithm, returned as a rotation vector with norm in [0, pi].
inline Vec3 log_so3(const Mat3& R) {
  const Vec3 w = detail::vee_unchecked(R);  // sin(theta) * axis
  const double s = w.norm();
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(s, c);
  if (theta < 1e-8) return w;
  if (c > -0.9) return (theta / s) * w;
  // Near pi: recover the axis from the symmetric part.
  const Mat3 K = (0.5 * (R + R.transpose()) - c * Mat3::Identity()) / (1.0 - c);
  int k = 0;
  K.diagonal().maxCoeff(&k);
  Vec3 axis = K.col(k) / std::sqrt(std::max(K(k, k), 1e-300));
  axis.normalize();
  if (axis.dot(w) < 0.0) axis = -axis;
  return theta * axis;
}

inline Vec3 log_so3(const Rotation& R) { return log_so3(R.matrix()); }

enum class Axis { X, Y, Z };

inline Rotation rot_axis(Axis axis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 m;
  switch (axis) {
    case Axis::X: m << 1, 0, 0, 0, c, -s, 0, s, c; break;
    case Axis::Y: m << c, 0, s, 0, 1, 0, -s, 0, c; break;
    case Axis::Z: m << c, -s, 0, s, c, 0, 0, 0, 1; break;
  }
  return Rotation::unchecked(m);
}

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Nearest rotation in the Frobenius sense (polar factor with det correction).
inline Rotation project_rotation(const Mat3& m) {
  if (!(m.determinant() > 0.0)) {
    throw Error(ErrorCode::DegenerateMatrix, "determinant not positive");
  }
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (!(svd.singularValues().minCoeff() >= 1e-12)) {
    throw Error(ErrorCode::DegenerateMatrix, "singular value below 1e-12");
  }
  const Mat3& U = svd.matrixU();
  const Mat3& V = svd.matrixV();
  Mat3 D = Mat3::Identity();
  D(2, 2) = (U * V.transpose()).determinant() > 0.0 ? 1.0 : -1.0;
  return Rotation::unchecked(U * D * V.transpose());
}

/// e_R = 1/2 (Rc^T R - R^T Rc)^vee
inline Vec3 attitude_error(const Rotation& R, const Rotation& Rc) {
  const Mat3 X = Rc.matrix().transpose() * R.matrix();
  return 0.5 * detail::vee_unchecked(X - X.transpose());
}

/// Psi = 1/2 tr[I - Rc^T R], in [0, 2].
inline double config_error_psi(const Rotation& R, const Rotation& Rc) {
  const double tr = (Rc.matrix().transpose() * R.matrix()).trace();
  return std::clamp(0.5 * (3.0 - tr), 0.0, 2.0);
}

/// e_Omega = Omega - R^T Rc Omega_c
inline Vec3 angular_velocity_error(const Rotation& R, const Rotation& Rc, const Vec3& Omega,
                                   const Vec3& Omega_c) {
  return Omega - R.matrix().transpose() * (Rc.matrix() * Omega_c);
}

}  // namespace cableload
