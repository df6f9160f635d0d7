#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lumisplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Quat = Eigen::Quaterniond;

using Vec3List = std::vector<Vec3, Eigen::aligned_allocator<Vec3>>;
using Vec2List = std::vector<Vec2, Eigen::aligned_allocator<Vec2>>;

// Error taxonomy. The CLI maps these onto exit codes (3 data, 4 numeric).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs with the wrong shape, out-of-range values, or violated preconditions.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed or missing files.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or optimizer failure.
class NumericError : public Error {
 public:
  using Error::Error;
};

#define LS_CHECK(cond, ExceptionType, msg)                \
  do {                                                    \
    if (!(cond)) {                                        \
      throw ExceptionType(std::string(__func__) + ": " + (msg)); \
    }                                                     \
  } while (0)

/// Rigid transform x -> R x + t.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform fromMatrix(const Mat4& m) {
    return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
  }

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  RigidTransform operator*(const RigidTransform& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
  RigidTransform inverse() const {
    const Mat3 rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }
  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
  bool isRigid(double tol = 1e-4) const {
    return std::abs(rotation.determinant() - 1.0) <= tol &&
           (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol;
  }
};

/// Warning sink shared by the library. Defaults to stderr; tests can silence it.
void warn(const std::string& message);
void setWarningsEnabled(bool enabled);
std::size_t warningCount();

inline bool allFinite(const VecX& v) {
  return v.allFinite();
}

}  // namespace lumisplat
