#pragma once

#include "lumisplat/common.h"

#include <array>
#include <string>
#include <vector>

namespace lumisplat {

using Face = std::array<int, 3>;
using FaceUv = std::array<Vec2, 3>;

/// Row-compressed sparse matrix with nonnegative weights (CSR layout).
struct SparseWeights {
  std::size_t columns = 0;
  std::vector<std::uint32_t> offsets{0};  // size rows + 1
  std::vector<std::uint32_t> indices;
  std::vector<double> weights;

  std::size_t rows() const { return offsets.size() - 1; }
  std::size_t rowBegin(std::size_t r) const { return offsets[r]; }
  std::size_t rowEnd(std::size_t r) const { return offsets[r + 1]; }
  void appendRow(const std::vector<std::pair<std::uint32_t, double>>& entries);
  /// Throws ParameterError unless every row is nonnegative and sums to 1 within tol.
  void validatePartitionOfUnity(const std::string& what, double tol = 1e-6) const;
};

enum class DofType { kRotation, kTranslation };

struct DofSpec {
  std::string name;
  int joint = 0;
  Vec3 axis = Vec3::UnitX();  // in the joint's local frame
  DofType type = DofType::kRotation;
  double lower = -M_PI;
  double upper = M_PI;
  double mean = 0.0;
};

/// Person-specific character: template mesh, skeleton, skinning and embedded graph.
/// Sizes are data; nothing here assumes a particular vertex or joint count.
struct TemplateCharacter {
  Vec3List vertices;
  std::vector<Face> faces;
  std::vector<FaceUv> faceUvs;  // per-corner texture coordinates

  std::vector<std::string> jointNames;
  Vec3List jointRest;  // rest-pose world positions
  std::vector<int> jointParents;  // -1 for the root; parent < child
  std::vector<DofSpec> dofs;

  std::vector<int> boneJoints;  // transform-carrying bone -> joint index
  SparseWeights skinning;  // vertices x bones

  std::vector<int> graphNodes;  // vertex index of each embedded-graph node
  SparseWeights nodeWeights;  // vertices x nodes
  std::vector<std::array<int, 2>> nodeEdges;

  // Optional hand DoF groups (left, right), each mapped through a PCA model by the IK solver.
  std::array<std::vector<int>, 2> handDofs;

  // Joint observed by each detected keypoint; empty means keypoint k is joint k.
  std::vector<int> keypointJoints;

  std::size_t vertexCount() const { return vertices.size(); }
  std::size_t jointCount() const { return jointRest.size(); }
  std::size_t dofCount() const { return dofs.size(); }
  std::size_t boneCount() const { return boneJoints.size(); }
  std::size_t nodeCount() const { return graphNodes.size(); }

  Vec3 nodeRestPosition(std::size_t node) const { return vertices[graphNodes[node]]; }
  VecX meanPose() const;
  VecX lowerLimits() const;
  VecX upperLimits() const;
  /// DoF indices belonging to the root joint.
  std::vector<int> rootDofs() const;

  /// Checks every structural invariant; throws ParameterError.
  void validate() const;
};

struct SkeletonPose {
  VecX dofValues;
};

struct DeformParams {
  Vec3List nodeRotations;  // axis-angle
  Vec3List nodeTranslations;
  Vec3List vertexOffsets;

  static DeformParams zero(const TemplateCharacter& character);
};

struct PosedMesh {
  Vec3List vertices;
  Vec3List normals;
  std::vector<Face> faces;
  std::vector<FaceUv> faceUvs;
};

/// Per-DoF derivative data for joint positions: a rotation DoF moves a downstream
/// point p by axis x (p - pivot), a translation DoF by axis.
struct DofMotion {
  Vec3 axis;
  Vec3 pivot;
  DofType type = DofType::kRotation;
};

struct KinematicsResult {
  std::vector<RigidTransform> globalFrames;  // joint frame in world
  std::vector<RigidTransform> skinningTransforms;  // rest space -> posed space, per joint
  Vec3List jointPositions;
  std::vector<DofMotion> dofMotion;
};

KinematicsResult forwardKinematics(const TemplateCharacter& character, const SkeletonPose& pose);

/// ancestry[d][j] is true when DoF d moves joint j.
std::vector<std::vector<bool>> dofInfluence(const TemplateCharacter& character);

/// Per-bone transforms picked out of the per-joint skinning transforms.
std::vector<RigidTransform> boneTransforms(const TemplateCharacter& character, const KinematicsResult& fk);

/// Blended per-vertex rigid transform from dual quaternion skinning.
std::vector<RigidTransform> dqsVertexTransforms(const SparseWeights& weights,
                                                const std::vector<RigidTransform>& bones);

Vec3List skinDqs(const TemplateCharacter& character,
                 const Vec3List& canonicalVertices,
                 const std::vector<RigidTransform>& bones);

Vec3List deformEmbeddedGraph(const TemplateCharacter& character, const DeformParams& params);

/// Embedded-graph deformation followed by DQS, with recomputed normals.
PosedMesh poseCharacter(const TemplateCharacter& character, const SkeletonPose& pose, const DeformParams& deform);

/// Area-weighted vertex normals.
Vec3List vertexNormals(const Vec3List& vertices, const std::vector<Face>& faces);

void checkPose(const TemplateCharacter& character, const SkeletonPose& pose);
void checkDeform(const TemplateCharacter& character, const DeformParams& params);

}  // namespace lumisplat
