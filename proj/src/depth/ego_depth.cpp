#include "lumisplat/depth/ego_depth.h"

#include "lumisplat/optim.h"
#include "lumisplat/parallel.h"
#include "lumisplat/rotation.h"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <set>

namespace lumisplat {

namespace {

void checkCamera(const DepthMap& depth) {
  LS_CHECK(depth.K.fx != 0.0 && depth.K.fy != 0.0, ParameterError, "zero focal length");
  LS_CHECK(depth.handEye.isRigid(1e-6), ParameterError, "hand-eye transform is not rigid");
  LS_CHECK(depth.headPose.isRigid(1e-6), ParameterError, "head pose is not rigid");
}

}  // namespace

Vec3List unprojectDepth(const DepthMap& depth) {
  checkCamera(depth);
  LS_CHECK(depth.depth.size() == static_cast<std::size_t>(depth.width) * depth.height, DataError,
           "depth buffer size does not match width x height");
  const RigidTransform worldFromCamera = depth.cameraFromWorld().inverse();
  Vec3List out;
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const double d = depth.at(u, v);
      LS_CHECK(std::isfinite(d) && d >= 0.0, DataError, "invalid depth value at pixel " + std::to_string(u) + "," + std::to_string(v));
      if (d == 0.0) continue;
      const Vec3 cam(d * (u - depth.K.cx) / depth.K.fx, d * (v - depth.K.cy) / depth.K.fy, d);
      out.push_back(worldFromCamera.apply(cam));
    }
  }
  return out;
}

Vec3 projectToDepthPixel(const DepthMap& depth, const Vec3& world) {
  checkCamera(depth);
  const Vec3 cam = depth.cameraFromWorld().apply(world);
  LS_CHECK(cam.z() > 0.0, ParameterError, "point is behind the camera");
  return Vec3(depth.K.fx * cam.x() / cam.z() + depth.K.cx, depth.K.fy * cam.y() / cam.z() + depth.K.cy, cam.z());
}

OrientedPointCloud estimateNormals(const Vec3List& points, std::size_t k, const std::optional<Vec3>& viewpoint) {
  LS_CHECK(k >= 3, ParameterError, "neighbourhood size must be >= 3");
  LS_CHECK(points.size() >= k, ParameterError, "fewer points than the neighbourhood size");
  const KdTree tree(points);
  OrientedPointCloud cloud;
  cloud.points = points;
  cloud.normals.assign(points.size(), Vec3::Zero());
  cloud.valid.assign(points.size(), 0);
  parallelFor(0, points.size(), [&](std::size_t i) {
    const auto nbrs = tree.kNearest(points[i], k);
    Vec3 mean = Vec3::Zero();
    for (int j : nbrs) mean += points[j];
    mean /= static_cast<double>(nbrs.size());
    Mat3 cov = Mat3::Zero();
    for (int j : nbrs) {
      const Vec3 d = points[j] - mean;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 lambda = eig.eigenvalues();
    if (!(lambda[1] > 1e-12 * std::max(lambda[2], 1e-300))) return;  // collinear or coincident
    Vec3 n = eig.eigenvectors().col(0).normalized();
    if (viewpoint) {
      if (n.dot(*viewpoint - points[i]) < 0.0) n = -n;
    } else {
      Eigen::Index big = 0;
      n.cwiseAbs().maxCoeff(&big);
      if (n[big] < 0.0) n = -n;
    }
    cloud.normals[i] = n;
    cloud.valid[i] = 1;
  });
  return cloud;
}

Vec3List fuseStereo(const Vec3List& left, const Vec3List& right, std::size_t target) {
  Vec3List all = left;
  all.insert(all.end(), right.begin(), right.end());
  if (target == 0 || all.size() <= target) return all;
  Vec3List out(target);
  for (std::size_t i = 0; i < target; ++i) out[i] = all[i * all.size() / target];
  return out;
}

DepthCondition encodeDepthCondition(const Vec3List& posedVertices, const Vec3List& vertexNormals,
                                    const OrientedPointCloud& cloud, const KdTree& cloudTree,
                                    const CorrespondenceFilter& filter, const std::vector<Mat3>& skinRotations) {
  const std::size_t nv = posedVertices.size();
  LS_CHECK(vertexNormals.size() == nv && skinRotations.size() == nv, ParameterError,
           "vertices, normals and skinning rotations must have equal counts");
  LS_CHECK(cloudTree.size() == cloud.size(), ParameterError, "KD-tree was not built over this cloud");
  DepthCondition out;
  out.xi.assign(nv, Vec3::Zero());
  out.accepted.assign(nv, 0);
  out.match.assign(nv, -1);
  if (cloud.size() == 0) {
    warn("empty point cloud: depth condition is all zero");
    return out;
  }
  parallelFor(0, nv, [&](std::size_t i) {
    const int j = cloudTree.nearest(posedVertices[i]);
    out.match[i] = j;
    const Vec3 d = cloud.points[j] - posedVertices[i];
    const bool normalOk = cloud.valid.empty() || cloud.valid[j] != 0;
    if (normalOk && filter.normalsAgree(vertexNormals[i], cloud.normals[j]) && d.norm() < filter.epsD) {
      out.xi[i] = skinRotations[i].transpose() * d;
      out.accepted[i] = 1;
    }
  });
  return out;
}

ChamferResult chamfer(const Vec3List& vertices, const Vec3List& vertexNormals, const OrientedPointCloud& cloud,
                      const KdTree& cloudTree, std::optional<double> normalCos, bool withGradient) {
  LS_CHECK(!vertices.empty() && cloud.size() > 0, ParameterError, "chamfer needs non-empty point sets");
  const std::size_t nv = vertices.size();
  const std::size_t nz = cloud.size();
  auto agree = [&](std::size_t v, std::size_t z) {
    if (!normalCos) return true;
    if (!cloud.valid.empty() && cloud.valid[z] == 0) return false;
    return vertexNormals[v].dot(cloud.normals[z]) > *normalCos;
  };

  std::vector<double> vTerm(nv, 0.0), zTerm(nz, 0.0);
  std::vector<int> vMatch(nv, -1), zMatch(nz, -1);
  parallelFor(0, nv, [&](std::size_t i) {
    const int j = cloudTree.nearest(vertices[i]);
    if (agree(i, j)) {
      vMatch[i] = j;
      vTerm[i] = (vertices[i] - cloud.points[j]).squaredNorm();
    }
  });
  const KdTree vertexTree(vertices);
  parallelFor(0, nz, [&](std::size_t j) {
    const int i = vertexTree.nearest(cloud.points[j]);
    if (agree(i, j)) {
      zMatch[j] = i;
      zTerm[j] = (cloud.points[j] - vertices[i]).squaredNorm();
    }
  });

  ChamferResult r;
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < nv; ++i) {
    a += vTerm[i];
    r.pairs += vMatch[i] >= 0;
  }
  for (std::size_t j = 0; j < nz; ++j) {
    b += zTerm[j];
    r.pairs += zMatch[j] >= 0;
  }
  r.value = a / nv + b / nz;
  if (withGradient) {
    r.gradient.assign(nv, Vec3::Zero());
    for (std::size_t i = 0; i < nv; ++i) {
      if (vMatch[i] >= 0) r.gradient[i] += 2.0 * (vertices[i] - cloud.points[vMatch[i]]) / nv;
    }
    for (std::size_t j = 0; j < nz; ++j) {
      if (zMatch[j] >= 0) r.gradient[zMatch[j]] += 2.0 * (vertices[zMatch[j]] - cloud.points[j]) / nz;
    }
  }
  return r;
}

double arapEnergy(const TemplateCharacter& character, const DeformParams& params, DeformParams* gradient) {
  checkDeform(character, params);
  double e = 0.0;
  auto term = [&](int j, int k) {
    const Vec3 gj = character.nodeRestPosition(j);
    const Vec3 gk = character.nodeRestPosition(k);
    const Vec3 d = gk - gj;
    const Vec3 r = axisAngleToMatrix(params.nodeRotations[j]) * d + gj + params.nodeTranslations[j] - gk -
                   params.nodeTranslations[k];
    e += r.squaredNorm();
    if (gradient != nullptr) {
      gradient->nodeTranslations[j] += 2.0 * r;
      gradient->nodeTranslations[k] -= 2.0 * r;
      gradient->nodeRotations[j] += rotatedPointJacobian(params.nodeRotations[j], d).transpose() * (2.0 * r);
    }
  };
  for (const auto& edge : character.nodeEdges) {
    term(edge[0], edge[1]);
    term(edge[1], edge[0]);
  }
  return e;
}

namespace {

// Everything that stays fixed while the deformation parameters move.
struct DeformProblem {
  const TemplateCharacter& character;
  const OrientedPointCloud& cloud;
  FitOptions options;
  KdTree cloudTree;
  std::vector<RigidTransform> vertexTransforms;
  std::vector<std::vector<int>> neighbours;
  std::vector<std::array<int, 2>> edges;
  std::vector<double> restLengths;

  DeformProblem(const TemplateCharacter& c, const SkeletonPose& pose, const OrientedPointCloud& z,
                const FitOptions& opts)
      : character(c), cloud(z), options(opts), cloudTree(z.points) {
    LS_CHECK(z.size() > 0, ParameterError, "point cloud is empty");
    LS_CHECK(z.normals.size() == z.size(), ParameterError, "point cloud needs one normal per point");
    const auto fk = forwardKinematics(c, pose);
    vertexTransforms = dqsVertexTransforms(c.skinning, boneTransforms(c, fk));
    std::set<std::array<int, 2>> unique;
    for (const auto& f : c.faces) {
      for (int a = 0; a < 3; ++a) {
        const int i = f[a];
        const int j = f[(a + 1) % 3];
        unique.insert({std::min(i, j), std::max(i, j)});
      }
    }
    edges.assign(unique.begin(), unique.end());
    neighbours.assign(c.vertexCount(), {});
    for (const auto& e : edges) {
      neighbours[e[0]].push_back(e[1]);
      neighbours[e[1]].push_back(e[0]);
    }
    const Vec3List rest = skin(c.vertices);
    for (const auto& e : edges) restLengths.push_back((rest[e[0]] - rest[e[1]]).norm());
  }

  Vec3List skin(const Vec3List& canonical) const {
    Vec3List out(canonical.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = vertexTransforms[i].apply(canonical[i]);
    return out;
  }

  DeformObjectiveTerms evaluate(const DeformParams& p, DeformParams* grad) const {
    const auto& w = options.weights;
    const std::size_t nv = character.vertexCount();
    DeformParams egOnly = p;
    std::fill(egOnly.vertexOffsets.begin(), egOnly.vertexOffsets.end(), Vec3::Zero());
    const Vec3List cEg = deformEmbeddedGraph(character, egOnly);
    Vec3List cDelta(nv);
    for (std::size_t i = 0; i < nv; ++i) cDelta[i] = cEg[i] + p.vertexOffsets[i];
    const Vec3List vEg = skin(cEg);
    const Vec3List vDelta = skin(cDelta);
    const bool g = grad != nullptr;

    DeformObjectiveTerms t;
    const auto chEg = chamfer(vEg, vertexNormals(vEg, character.faces), cloud, cloudTree, options.chamferNormalCos, g);
    const auto chDelta =
        chamfer(vDelta, vertexNormals(vDelta, character.faces), cloud, cloudTree, options.chamferNormalCos, g);
    t.chamferEg = chEg.value;
    t.chamferDelta = chDelta.value;
    t.arap = arapEnergy(character, p, grad);
    if (g) {
      for (auto& r : grad->nodeRotations) r *= w.arap;
      for (auto& b : grad->nodeTranslations) b *= w.arap;
    }

    // Uniform Laplacian of the offsets.
    Vec3List lap(nv, Vec3::Zero());
    for (std::size_t i = 0; i < nv; ++i) {
      if (neighbours[i].empty()) continue;
      Vec3 mean = Vec3::Zero();
      for (int j : neighbours[i]) mean += p.vertexOffsets[j];
      lap[i] = p.vertexOffsets[i] - mean / static_cast<double>(neighbours[i].size());
      t.spatial += lap[i].squaredNorm();
    }
    t.spatial /= nv;

    // Edge lengths of the output against the undeformed posed template.
    Vec3List isoGrad(nv, Vec3::Zero());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const Vec3 d = vDelta[edges[e][0]] - vDelta[edges[e][1]];
      const double len = d.norm();
      const double r = len - restLengths[e];
      t.iso += r * r;
      if (g && len > 0.0) {
        const Vec3 gd = 2.0 * r * d / len / static_cast<double>(edges.size());
        isoGrad[edges[e][0]] += gd;
        isoGrad[edges[e][1]] -= gd;
      }
    }
    if (!edges.empty()) t.iso /= static_cast<double>(edges.size());

    t.total = w.eg * t.chamferEg + w.delta * t.chamferDelta + w.arap * t.arap + w.spatial * t.spatial + w.iso * t.iso;
    if (!g) return t;

    for (std::size_t i = 0; i < nv; ++i) {
      const Mat3 rt = vertexTransforms[i].rotation.transpose();
      const Vec3 gDelta = rt * (w.delta * chDelta.gradient[i] + w.iso * isoGrad[i]);
      const Vec3 gCanon = rt * (w.eg * chEg.gradient[i]) + gDelta;
      grad->vertexOffsets[i] = gDelta;
      if (!neighbours[i].empty()) {
        const double s = 2.0 * w.spatial / nv;
        grad->vertexOffsets[i] += s * lap[i];
        for (int j : neighbours[i]) {
          grad->vertexOffsets[j] -= s * lap[i] / static_cast<double>(neighbours[i].size());
        }
      }
      const auto& nw = character.nodeWeights;
      if (character.nodeCount() == 0) continue;
      for (std::size_t k = nw.rowBegin(i); k < nw.rowEnd(i); ++k) {
        const std::size_t n = nw.indices[k];
        const double wk = nw.weights[k];
        grad->nodeTranslations[n] += wk * gCanon;
        const Vec3 local = character.vertices[i] - character.nodeRestPosition(n);
        grad->nodeRotations[n] += wk * rotatedPointJacobian(p.nodeRotations[n], local).transpose() * gCanon;
      }
    }
    return t;
  }
};

VecX pack(const DeformParams& p) {
  const std::size_t nn = p.nodeRotations.size();
  const std::size_t nv = p.vertexOffsets.size();
  VecX x(3 * (2 * nn + nv));
  for (std::size_t n = 0; n < nn; ++n) {
    x.segment<3>(3 * n) = p.nodeRotations[n];
    x.segment<3>(3 * (nn + n)) = p.nodeTranslations[n];
  }
  for (std::size_t i = 0; i < nv; ++i) x.segment<3>(3 * (2 * nn + i)) = p.vertexOffsets[i];
  return x;
}

void unpack(const VecX& x, DeformParams& p) {
  const std::size_t nn = p.nodeRotations.size();
  const std::size_t nv = p.vertexOffsets.size();
  for (std::size_t n = 0; n < nn; ++n) {
    p.nodeRotations[n] = x.segment<3>(3 * n);
    p.nodeTranslations[n] = x.segment<3>(3 * (nn + n));
  }
  for (std::size_t i = 0; i < nv; ++i) p.vertexOffsets[i] = x.segment<3>(3 * (2 * nn + i));
}

}  // namespace

DeformObjectiveTerms deformObjective(const TemplateCharacter& character, const SkeletonPose& pose,
                                     const OrientedPointCloud& cloud, const DeformParams& params,
                                     const FitOptions& options, DeformParams* gradient) {
  checkDeform(character, params);
  const DeformProblem problem(character, pose, cloud, options);
  if (gradient != nullptr) *gradient = DeformParams::zero(character);
  return problem.evaluate(params, gradient);
}

FitResult fitDeformation(const TemplateCharacter& character, const SkeletonPose& pose,
                         const OrientedPointCloud& cloud, const DeformParams& init, const FitOptions& options) {
  checkDeform(character, init);
  LS_CHECK(options.iterations >= 1, ParameterError, "iterations must be >= 1");
  const DeformProblem problem(character, pose, cloud, options);
  FitResult result;
  result.params = init;
  result.initialTerms = problem.evaluate(init, nullptr);

  DeformParams scratch = init;
  DeformParams grad = DeformParams::zero(character);
  const Objective objective = [&](const VecX& x, VecX& g) {
    unpack(x, scratch);
    grad = DeformParams::zero(character);
    const auto t = problem.evaluate(scratch, &grad);
    g = pack(grad);
    return t.total;
  };
  VecX x = pack(init);
  LbfgsOptions opts;
  opts.maxIterations = options.iterations;
  const auto res = minimizeLbfgs(objective, x, opts);

  int rising = 0;
  for (std::size_t i = 1; i < res.costs.size(); ++i) {
    rising = res.costs[i] > res.costs[i - 1] ? rising + 1 : 0;
    LS_CHECK(rising < 10, NumericError, "deformation fit diverged: objective rose for 10 consecutive steps");
  }
  unpack(x, result.params);
  result.objective = res.costs;
  result.finalTerms = problem.evaluate(result.params, nullptr);
  return result;
}

}  // namespace lumisplat
