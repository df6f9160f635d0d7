#pragma once

#include "lumisplat/common.h"

namespace lumisplat {

/// Unit dual quaternion q = real + eps * dual encoding a rigid transform.
struct DualQuaternion {
  Quat real{1.0, 0.0, 0.0, 0.0};
  Quat dual{0.0, 0.0, 0.0, 0.0};

  static DualQuaternion fromRigid(const RigidTransform& transform);
  RigidTransform toRigid() const;

  double dotReal(const DualQuaternion& other) const { return real.coeffs().dot(other.real.coeffs()); }
  void accumulate(const DualQuaternion& q, double weight) {
    real.coeffs() += weight * q.real.coeffs();
    dual.coeffs() += weight * q.dual.coeffs();
  }
  void normalize();
};

}  // namespace lumisplat
