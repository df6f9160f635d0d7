#pragma once

#include "lumisplat/common.h"

namespace lumisplat {

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

/// Rodrigues formula. Returns the exact identity for a zero vector.
inline Mat3 axisAngleToMatrix(const Vec3& axisAngle) {
  const double angle = axisAngle.norm();
  if (angle == 0.0) {
    return Mat3::Identity();
  }
  return Eigen::AngleAxisd(angle, axisAngle / angle).toRotationMatrix();
}

/// Jacobian d(R(a) x)/da for the axis-angle vector a (3x3). Uses the closed form
/// -R [x]_x (a a^T + (R^T - I)[a]_x) / |a|^2, and -[x]_x at a = 0.
inline Mat3 rotatedPointJacobian(const Vec3& axisAngle, const Vec3& x) {
  const double sq = axisAngle.squaredNorm();
  if (sq < 1e-20) {
    return -skew(x);
  }
  const Mat3 r = axisAngleToMatrix(axisAngle);
  const Mat3 inner = (axisAngle * axisAngle.transpose() + (r.transpose() - Mat3::Identity()) * skew(axisAngle)) / sq;
  return -r * skew(x) * inner;
}

inline Mat3 quaternionToMatrix(const Quat& q) {
  return q.normalized().toRotationMatrix();
}

}  // namespace lumisplat
