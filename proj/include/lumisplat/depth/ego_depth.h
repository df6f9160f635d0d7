#pragma once

#include "lumisplat/depth/kdtree.h"
#include "lumisplat/geometry/character.h"

#include <filesystem>
#include <optional>
#include <vector>

namespace lumisplat {

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// Metric depth along the optical axis (0 = invalid). Pixel (u, v) is column u, row v.
/// World -> camera is handEye * headPose.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> depth;
  Intrinsics K;
  RigidTransform handEye;
  RigidTransform headPose;

  float at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
  RigidTransform cameraFromWorld() const { return handEye * headPose; }
};

Vec3List unprojectDepth(const DepthMap& depth);
/// World point -> (u, v, d) under the same conventions.
Vec3 projectToDepthPixel(const DepthMap& depth, const Vec3& world);

struct OrientedPointCloud {
  Vec3List points;
  Vec3List normals;
  std::vector<std::uint8_t> valid;  // normal could be estimated

  std::size_t size() const { return points.size(); }
};

/// PCA plane fit over the k nearest neighbours (the point itself included). Normals face
/// the viewpoint when given; otherwise the component with the largest magnitude is made
/// positive. Neighbourhoods of rank < 2 get a zero normal and valid = 0.
OrientedPointCloud estimateNormals(const Vec3List& points, std::size_t k,
                                   const std::optional<Vec3>& viewpoint = std::nullopt);

/// Concatenates both clouds, then keeps `target` points at a uniform index stride.
Vec3List fuseStereo(const Vec3List& left, const Vec3List& right, std::size_t target);

struct CorrespondenceFilter {
  double epsN = 0.5;  // cosine threshold: accept when n_v . n_z > epsN
  double epsD = 0.05;  // metres: accept when |z - v| < epsD
  bool literalNormalTest = false;  // accept when |n_v . n_z| < epsN instead

  bool normalsAgree(const Vec3& nv, const Vec3& nz) const {
    const double c = nv.dot(nz);
    return literalNormalTest ? std::abs(c) < epsN : c > epsN;
  }
};

struct DepthCondition {
  Vec3List xi;  // canonical-space displacement per vertex
  std::vector<std::uint8_t> accepted;
  std::vector<int> match;  // nearest cloud point, -1 when the cloud is empty
};

/// xi_i = R_i^T (z_j - v_i) for the nearest cloud point z_j when the filter accepts, else 0.
/// `skinRotations` are the per-vertex blended skinning rotations.
DepthCondition encodeDepthCondition(const Vec3List& posedVertices, const Vec3List& vertexNormals,
                                    const OrientedPointCloud& cloud, const KdTree& cloudTree,
                                    const CorrespondenceFilter& filter, const std::vector<Mat3>& skinRotations);

struct DeformWeights {
  double eg = 1.0;
  double delta = 1.0;
  double arap = 0.5;
  double spatial = 0.1;
  double iso = 0.1;
};

struct FitOptions {
  DeformWeights weights;
  double chamferNormalCos = 0.5;  // correspondences with n . n' <= this are dropped
  int iterations = 200;
};

/// Symmetric point-to-vertex Chamfer: mean over vertices of the squared distance to the
/// nearest cloud point plus mean over cloud points of the squared distance to the nearest
/// vertex. Pairs whose normals disagree are dropped (they still count in the mean's
/// denominator, so filtering can only lower the value).
struct ChamferResult {
  double value = 0.0;
  std::size_t pairs = 0;
  Vec3List gradient;  // d value / d vertex, when requested
};
ChamferResult chamfer(const Vec3List& vertices, const Vec3List& vertexNormals, const OrientedPointCloud& cloud,
                      const KdTree& cloudTree, std::optional<double> normalCos, bool withGradient);

/// Embedded-deformation rigidity over graph edges, both directions:
/// sum ||R_j (g_k - g_j) + g_j + b_j - (g_k + b_k)||^2.
double arapEnergy(const TemplateCharacter& character, const DeformParams& params, DeformParams* gradient = nullptr);

struct DeformObjectiveTerms {
  double chamferEg = 0, chamferDelta = 0, arap = 0, spatial = 0, iso = 0, total = 0;
};

struct FitResult {
  DeformParams params;
  std::vector<double> objective;  // after each accepted iteration, initial value first
  DeformObjectiveTerms initialTerms;
  DeformObjectiveTerms finalTerms;
};

/// Fits (alpha, beta, o) with the pose held fixed.
FitResult fitDeformation(const TemplateCharacter& character, const SkeletonPose& pose,
                         const OrientedPointCloud& cloud, const DeformParams& init, const FitOptions& options = {});

/// Evaluates the fitting objective (and its gradient packed like the optimizer's vector).
DeformObjectiveTerms deformObjective(const TemplateCharacter& character, const SkeletonPose& pose,
                                     const OrientedPointCloud& cloud, const DeformParams& params,
                                     const FitOptions& options, DeformParams* gradient = nullptr);

namespace io {
/// Depth map from a single-channel PFM plus JSON sidecar {K, Pi, H}.
DepthMap loadDepthMap(const std::filesystem::path& pfm, const std::filesystem::path& sidecar);
void saveDepthMap(const std::filesystem::path& pfm, const std::filesystem::path& sidecar, const DepthMap& depth);
void writePly(const std::filesystem::path& path, const OrientedPointCloud& cloud);
OrientedPointCloud readPly(const std::filesystem::path& path);
}  // namespace io

}  // namespace lumisplat
