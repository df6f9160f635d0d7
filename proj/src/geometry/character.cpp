#include "lumisplat/geometry/character.h"
#include "lumisplat/geometry/dual_quaternion.h"
#include "lumisplat/parallel.h"
#include "lumisplat/rotation.h"

#include <algorithm>
#include <numeric>

namespace lumisplat {

void SparseWeights::appendRow(const std::vector<std::pair<std::uint32_t, double>>& entries) {
  for (const auto& [index, weight] : entries) {
    indices.push_back(index);
    weights.push_back(weight);
  }
  offsets.push_back(static_cast<std::uint32_t>(indices.size()));
}

void SparseWeights::validatePartitionOfUnity(const std::string& what, double tol) const {
  for (std::size_t r = 0; r < rows(); ++r) {
    double sum = 0.0;
    for (std::size_t k = rowBegin(r); k < rowEnd(r); ++k) {
      LS_CHECK(weights[k] >= 0.0, ParameterError, what + " row " + std::to_string(r) + " has a negative weight");
      LS_CHECK(indices[k] < columns, ParameterError, what + " row " + std::to_string(r) + " index out of range");
      sum += weights[k];
    }
    LS_CHECK(std::abs(sum - 1.0) <= tol, ParameterError,
             what + " row " + std::to_string(r) + " sums to " + std::to_string(sum));
  }
}

VecX TemplateCharacter::meanPose() const {
  VecX v(dofs.size());
  for (std::size_t d = 0; d < dofs.size(); ++d) {
    v[d] = dofs[d].mean;
  }
  return v;
}

VecX TemplateCharacter::lowerLimits() const {
  VecX v(dofs.size());
  for (std::size_t d = 0; d < dofs.size(); ++d) {
    v[d] = dofs[d].lower;
  }
  return v;
}

VecX TemplateCharacter::upperLimits() const {
  VecX v(dofs.size());
  for (std::size_t d = 0; d < dofs.size(); ++d) {
    v[d] = dofs[d].upper;
  }
  return v;
}

std::vector<int> TemplateCharacter::rootDofs() const {
  std::vector<int> out;
  for (std::size_t d = 0; d < dofs.size(); ++d) {
    if (jointParents[dofs[d].joint] < 0) {
      out.push_back(static_cast<int>(d));
    }
  }
  return out;
}

void TemplateCharacter::validate() const {
  const auto nv = vertices.size();
  LS_CHECK(faceUvs.size() == faces.size(), ParameterError, "faceUvs must have one entry per face");
  for (const auto& f : faces) {
    for (int idx : f) {
      LS_CHECK(idx >= 0 && static_cast<std::size_t>(idx) < nv, ParameterError, "face index out of range");
    }
  }
  LS_CHECK(jointParents.size() == jointRest.size(), ParameterError, "joint parent list size mismatch");
  for (std::size_t j = 0; j < jointParents.size(); ++j) {
    LS_CHECK(jointParents[j] < static_cast<int>(j), ParameterError,
             "joint " + std::to_string(j) + " parent must precede it");
  }
  for (const auto& dof : dofs) {
    LS_CHECK(dof.joint >= 0 && static_cast<std::size_t>(dof.joint) < jointRest.size(), ParameterError,
             "dof " + dof.name + " joint out of range");
    LS_CHECK(std::abs(dof.axis.norm() - 1.0) < 1e-6, ParameterError, "dof " + dof.name + " axis must be unit");
    LS_CHECK(dof.lower <= dof.upper, ParameterError, "dof " + dof.name + " has lower > upper");
  }
  for (int j : boneJoints) {
    LS_CHECK(j >= 0 && static_cast<std::size_t>(j) < jointRest.size(), ParameterError, "bone joint out of range");
  }
  LS_CHECK(skinning.rows() == nv, ParameterError, "skinning weights need one row per vertex");
  LS_CHECK(skinning.columns == boneJoints.size(), ParameterError, "skinning weights column count != bone count");
  skinning.validatePartitionOfUnity("skinning weights");
  for (int v : graphNodes) {
    LS_CHECK(v >= 0 && static_cast<std::size_t>(v) < nv, ParameterError, "graph node vertex out of range");
  }
  if (!graphNodes.empty()) {
    LS_CHECK(nodeWeights.rows() == nv, ParameterError, "node weights need one row per vertex");
    LS_CHECK(nodeWeights.columns == graphNodes.size(), ParameterError, "node weight column count != node count");
    nodeWeights.validatePartitionOfUnity("node weights");
  }
  for (const auto& e : nodeEdges) {
    for (int n : e) {
      LS_CHECK(n >= 0 && static_cast<std::size_t>(n) < graphNodes.size(), ParameterError, "graph edge out of range");
    }
  }
  for (const auto& hand : handDofs) {
    for (int d : hand) {
      LS_CHECK(d >= 0 && static_cast<std::size_t>(d) < dofs.size(), ParameterError, "hand dof out of range");
    }
  }
  for (int j : keypointJoints) {
    LS_CHECK(j >= 0 && static_cast<std::size_t>(j) < jointRest.size(), ParameterError, "keypoint joint out of range");
  }
}

DeformParams DeformParams::zero(const TemplateCharacter& character) {
  DeformParams p;
  p.nodeRotations.assign(character.nodeCount(), Vec3::Zero());
  p.nodeTranslations.assign(character.nodeCount(), Vec3::Zero());
  p.vertexOffsets.assign(character.vertexCount(), Vec3::Zero());
  return p;
}

void checkPose(const TemplateCharacter& character, const SkeletonPose& pose) {
  LS_CHECK(static_cast<std::size_t>(pose.dofValues.size()) == character.dofCount(), ParameterError,
           "pose has " + std::to_string(pose.dofValues.size()) + " values, character has " +
               std::to_string(character.dofCount()) + " DoF");
  LS_CHECK(pose.dofValues.allFinite(), NumericError, "pose contains non-finite values");
}

void checkDeform(const TemplateCharacter& character, const DeformParams& params) {
  LS_CHECK(params.nodeRotations.size() == character.nodeCount() &&
               params.nodeTranslations.size() == character.nodeCount(),
           ParameterError, "node parameter count does not match graph node count");
  LS_CHECK(params.vertexOffsets.size() == character.vertexCount(), ParameterError,
           "vertex offset count does not match vertex count");
  auto finite = [](const Vec3List& list) {
    return std::all_of(list.begin(), list.end(), [](const Vec3& v) { return v.allFinite(); });
  };
  LS_CHECK(finite(params.nodeRotations) && finite(params.nodeTranslations) && finite(params.vertexOffsets),
           NumericError, "deformation parameters contain non-finite values");
}

KinematicsResult forwardKinematics(const TemplateCharacter& character, const SkeletonPose& pose) {
  checkPose(character, pose);
  const std::size_t nj = character.jointCount();

  // DoFs grouped per joint, preserving declaration order.
  std::vector<std::vector<int>> jointDofs(nj);
  for (std::size_t d = 0; d < character.dofCount(); ++d) {
    jointDofs[character.dofs[d].joint].push_back(static_cast<int>(d));
  }

  KinematicsResult out;
  out.globalFrames.resize(nj);
  out.skinningTransforms.resize(nj);
  out.jointPositions.resize(nj);
  out.dofMotion.resize(character.dofCount());

  for (std::size_t j = 0; j < nj; ++j) {
    const int parent = character.jointParents[j];
    RigidTransform frame;
    if (parent < 0) {
      frame.translation = character.jointRest[j];
    } else {
      const RigidTransform& pf = out.globalFrames[parent];
      frame.rotation = pf.rotation;
      frame.translation = pf.apply(character.jointRest[j] - character.jointRest[parent]);
    }
    for (int d : jointDofs[j]) {
      const DofSpec& spec = character.dofs[d];
      const double value = pose.dofValues[d];
      DofMotion& motion = out.dofMotion[d];
      motion.type = spec.type;
      motion.axis = frame.rotation * spec.axis;
      motion.pivot = frame.translation;
      if (spec.type == DofType::kTranslation) {
        frame.translation += value * motion.axis;
      } else if (value != 0.0) {
        frame.rotation = frame.rotation * Eigen::AngleAxisd(value, spec.axis).toRotationMatrix();
      }
    }
    out.globalFrames[j] = frame;
    out.jointPositions[j] = frame.translation;
    // Rest frames carry no rotation, so the inverse rest transform is a pure translation.
    out.skinningTransforms[j] = {frame.rotation, frame.translation - frame.rotation * character.jointRest[j]};
  }
  return out;
}

std::vector<std::vector<bool>> dofInfluence(const TemplateCharacter& character) {
  const std::size_t nj = character.jointCount();
  std::vector<std::vector<bool>> out(character.dofCount(), std::vector<bool>(nj, false));
  for (std::size_t d = 0; d < character.dofCount(); ++d) {
    const int owner = character.dofs[d].joint;
    for (std::size_t j = 0; j < nj; ++j) {
      for (int k = static_cast<int>(j); k >= 0; k = character.jointParents[k]) {
        if (k == owner) {
          out[d][j] = true;
          break;
        }
      }
    }
  }
  return out;
}

std::vector<RigidTransform> boneTransforms(const TemplateCharacter& character, const KinematicsResult& fk) {
  std::vector<RigidTransform> bones;
  bones.reserve(character.boneCount());
  for (int j : character.boneJoints) {
    bones.push_back(fk.skinningTransforms[j]);
  }
  return bones;
}

DualQuaternion DualQuaternion::fromRigid(const RigidTransform& transform) {
  DualQuaternion q;
  q.real = Quat(transform.rotation);
  q.real.normalize();
  const Quat t(0.0, transform.translation.x(), transform.translation.y(), transform.translation.z());
  q.dual = t * q.real;
  q.dual.coeffs() *= 0.5;
  return q;
}

void DualQuaternion::normalize() {
  const double n = real.norm();
  LS_CHECK(n > 1e-12, NumericError, "blended dual quaternion has zero rotation part");
  real.coeffs() /= n;
  dual.coeffs() /= n;
}

RigidTransform DualQuaternion::toRigid() const {
  RigidTransform out;
  out.rotation = real.toRotationMatrix();
  const Quat t = dual * real.conjugate();
  out.translation = 2.0 * t.vec();
  return out;
}

std::vector<RigidTransform> dqsVertexTransforms(const SparseWeights& weights,
                                                const std::vector<RigidTransform>& bones) {
  LS_CHECK(weights.columns == bones.size(), ParameterError, "bone transform count does not match skinning weights");
  std::vector<DualQuaternion> dq(bones.size());
  for (std::size_t b = 0; b < bones.size(); ++b) {
    LS_CHECK(bones[b].isRigid(1e-4), ParameterError, "bone " + std::to_string(b) + " transform is not rigid");
    dq[b] = DualQuaternion::fromRigid(bones[b]);
  }
  std::vector<RigidTransform> out(weights.rows());
  parallelFor(0, weights.rows(), [&](std::size_t v) {
    const std::size_t begin = weights.rowBegin(v);
    const std::size_t end = weights.rowEnd(v);
    if (begin == end) {
      out[v] = RigidTransform::identity();
      return;
    }
    std::size_t heaviest = begin;
    for (std::size_t k = begin + 1; k < end; ++k) {
      if (weights.weights[k] > weights.weights[heaviest]) {
        heaviest = k;
      }
    }
    const DualQuaternion& pivot = dq[weights.indices[heaviest]];
    if (end - begin == 1) {
      out[v] = bones[weights.indices[begin]];
      return;
    }
    DualQuaternion blend;
    blend.real.coeffs().setZero();
    for (std::size_t k = begin; k < end; ++k) {
      const DualQuaternion& q = dq[weights.indices[k]];
      const double sign = pivot.dotReal(q) < 0.0 ? -1.0 : 1.0;
      blend.accumulate(q, sign * weights.weights[k]);
    }
    blend.normalize();
    out[v] = blend.toRigid();
  });
  return out;
}

Vec3List skinDqs(const TemplateCharacter& character,
                 const Vec3List& canonicalVertices,
                 const std::vector<RigidTransform>& bones) {
  LS_CHECK(canonicalVertices.size() == character.skinning.rows(), ParameterError,
           "vertex count does not match skinning weights");
  const auto transforms = dqsVertexTransforms(character.skinning, bones);
  Vec3List out(canonicalVertices.size());
  for (std::size_t v = 0; v < out.size(); ++v) {
    out[v] = transforms[v].apply(canonicalVertices[v]);
  }
  return out;
}

Vec3List deformEmbeddedGraph(const TemplateCharacter& character, const DeformParams& params) {
  checkDeform(character, params);
  const std::size_t nn = character.nodeCount();
  std::vector<Mat3> rotations(nn);
  for (std::size_t n = 0; n < nn; ++n) {
    rotations[n] = axisAngleToMatrix(params.nodeRotations[n]);
  }
  Vec3List out(character.vertexCount());
  for (std::size_t v = 0; v < out.size(); ++v) {
    const Vec3& rest = character.vertices[v];
    Vec3 delta = Vec3::Zero();
    if (nn > 0) {
      const auto& w = character.nodeWeights;
      for (std::size_t k = w.rowBegin(v); k < w.rowEnd(v); ++k) {
        const std::size_t n = w.indices[k];
        const Vec3 local = rest - character.nodeRestPosition(n);
        // sum_n w (R_n (v - g_n) + g_n + b_n) written relative to v, using sum_n w = 1.
        delta += w.weights[k] * (rotations[n] * local - local + params.nodeTranslations[n]);
      }
    }
    out[v] = rest + delta + params.vertexOffsets[v];
  }
  return out;
}

Vec3List vertexNormals(const Vec3List& vertices, const std::vector<Face>& faces) {
  Vec3List normals(vertices.size(), Vec3::Zero());
  for (const auto& f : faces) {
    const Vec3 n = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
    for (int idx : f) {
      normals[idx] += n;
    }
  }
  std::size_t isolated = 0;
  for (auto& n : normals) {
    const double len = n.norm();
    if (len > 0.0) {
      n /= len;
    } else {
      n = Vec3::UnitZ();
      ++isolated;
    }
  }
  if (isolated > 0) {
    warn(std::to_string(isolated) + " vertices without incident area; normal set to +z");
  }
  return normals;
}

PosedMesh poseCharacter(const TemplateCharacter& character, const SkeletonPose& pose, const DeformParams& deform) {
  const Vec3List canonical = deformEmbeddedGraph(character, deform);
  const KinematicsResult fk = forwardKinematics(character, pose);
  PosedMesh mesh;
  mesh.vertices = skinDqs(character, canonical, boneTransforms(character, fk));
  mesh.normals = vertexNormals(mesh.vertices, character.faces);
  mesh.faces = character.faces;
  mesh.faceUvs = character.faceUvs;
  return mesh;
}

}  // namespace lumisplat
