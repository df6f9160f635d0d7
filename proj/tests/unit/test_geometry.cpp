#include <doctest.h>

#include "lumisplat/geometry/character.h"
#include "lumisplat/geometry/character_io.h"
#include "lumisplat/geometry/primitives.h"
#include "lumisplat/geometry/uv_maps.h"
#include "lumisplat/rotation.h"

#include <array>
#include <filesystem>
#include <random>

using namespace lumisplat;

namespace {

// Independent dual-quaternion arithmetic on plain arrays (w, x, y, z).
using Q = std::array<double, 4>;

Q qmul(const Q& a, const Q& b) {
  return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
          a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
          a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
          a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

Q qconj(const Q& a) {
  return {a[0], -a[1], -a[2], -a[3]};
}

Q axisAngleQ(const Vec3& axis, double angle) {
  const Vec3 n = axis.normalized();
  return {std::cos(angle / 2), std::sin(angle / 2) * n.x(), std::sin(angle / 2) * n.y(), std::sin(angle / 2) * n.z()};
}

// Blend two rigid transforms given as (rotation quaternion, translation) and apply to p.
Vec3 oracleDqsBlend(const std::vector<std::pair<Q, Vec3>>& bones, const std::vector<double>& weights, const Vec3& p) {
  std::size_t heavy = 0;
  for (std::size_t i = 1; i < weights.size(); ++i) {
    if (weights[i] > weights[heavy]) heavy = i;
  }
  Q real{0, 0, 0, 0};
  Q dual{0, 0, 0, 0};
  for (std::size_t i = 0; i < bones.size(); ++i) {
    const Q& r = bones[i].first;
    const Vec3& t = bones[i].second;
    Q d = qmul({0, t.x(), t.y(), t.z()}, r);
    for (auto& c : d) c *= 0.5;
    double dot = 0;
    for (int k = 0; k < 4; ++k) dot += r[k] * bones[heavy].first[k];
    const double s = dot < 0 ? -weights[i] : weights[i];
    for (int k = 0; k < 4; ++k) {
      real[k] += s * r[k];
      dual[k] += s * d[k];
    }
  }
  double n = 0;
  for (double c : real) n += c * c;
  n = std::sqrt(n);
  for (int k = 0; k < 4; ++k) {
    real[k] /= n;
    dual[k] /= n;
  }
  const Q rotated = qmul(qmul(real, {0, p.x(), p.y(), p.z()}), qconj(real));
  const Q tq = qmul(dual, qconj(real));
  return Vec3(rotated[1] + 2 * tq[1], rotated[2] + 2 * tq[2], rotated[3] + 2 * tq[3]);
}

TemplateCharacter twoJointCharacter() {
  TemplateCharacter c;
  c.vertices = {Vec3(0.5, 0, 0), Vec3(1.5, 0, 0), Vec3(1.0, 0.2, 0)};
  c.faces = {Face{0, 1, 2}};
  c.faceUvs = {FaceUv{Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)}};
  c.jointRest = {Vec3::Zero(), Vec3(1, 0, 0)};
  c.jointParents = {-1, 0};
  c.jointNames = {"root", "child"};
  DofSpec rz;
  rz.name = "rz";
  rz.joint = 0;
  rz.axis = Vec3::UnitZ();
  DofSpec cz = rz;
  cz.name = "child_rz";
  cz.joint = 1;
  c.dofs = {rz, cz};
  c.boneJoints = {0, 1};
  c.skinning.columns = 2;
  c.skinning.appendRow({{0u, 1.0}});
  c.skinning.appendRow({{1u, 1.0}});
  c.skinning.appendRow({{0u, 0.5}, {1u, 0.5}});
  c.validate();
  return c;
}

RigidTransform randomRigid(std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return {q.toRotationMatrix(), Vec3(n(rng), n(rng), n(rng))};
}

}  // namespace

TEST_CASE("forward kinematics: zero pose is the rest configuration") {
  const auto c = makeChainCharacter(20, 0.2);
  SkeletonPose pose{VecX::Zero(c.dofCount())};
  const auto fk = forwardKinematics(c, pose);
  for (std::size_t j = 0; j < c.jointCount(); ++j) {
    CHECK((fk.jointPositions[j] - c.jointRest[j]).norm() < 1e-12);
    CHECK((fk.skinningTransforms[j].rotation - Mat3::Identity()).norm() < 1e-15);
    CHECK(fk.skinningTransforms[j].translation.norm() < 1e-12);
  }
}

TEST_CASE("forward kinematics: root rotation of 90 degrees about z moves the child to (0,1,0)") {
  const auto c = twoJointCharacter();
  SkeletonPose pose{VecX::Zero(2)};
  pose.dofValues[0] = M_PI / 2;
  const auto fk = forwardKinematics(c, pose);
  CHECK((fk.jointPositions[1] - Vec3(0, 1, 0)).norm() < 1e-9);
}

TEST_CASE("forward kinematics: reference-sized skeleton from data") {
  TemplateCharacter c;
  c.vertices = {Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY()};
  c.faces = {Face{0, 1, 2}};
  c.faceUvs = {FaceUv{Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)}};
  for (int j = 0; j < 173; ++j) {
    c.jointParents.push_back(j == 0 ? -1 : (j - 1) / 2);
    c.jointRest.push_back(Vec3(0.01 * j, 0.02 * (j % 7), 0.0));
    c.jointNames.push_back("j" + std::to_string(j));
  }
  for (int d = 0; d < 107; ++d) {
    DofSpec dof;
    dof.joint = d < 6 ? 0 : 1 + (d - 6);
    dof.type = d < 3 ? DofType::kTranslation : DofType::kRotation;
    dof.axis = Vec3::Unit(d % 3);
    c.dofs.push_back(dof);
  }
  for (int b = 0; b < 69; ++b) c.boneJoints.push_back(b);
  c.skinning.columns = 69;
  for (int v = 0; v < 3; ++v) c.skinning.appendRow({{static_cast<std::uint32_t>(v), 1.0}});
  c.validate();
  SkeletonPose pose{VecX::Constant(107, 0.01)};
  const auto fk = forwardKinematics(c, pose);
  CHECK(fk.jointPositions.size() == 173);
  CHECK(boneTransforms(c, fk).size() == 69);
}

TEST_CASE("forward kinematics: errors") {
  const auto c = twoJointCharacter();
  CHECK_THROWS_AS(forwardKinematics(c, SkeletonPose{VecX::Zero(3)}), ParameterError);
  SkeletonPose bad{VecX::Zero(2)};
  bad.dofValues[1] = std::nan("");
  CHECK_THROWS_AS(forwardKinematics(c, bad), NumericError);
}

TEST_CASE("skin_dqs: single weight applies that bone exactly") {
  const auto c = twoJointCharacter();
  std::mt19937 rng(7);
  const std::vector<RigidTransform> bones = {randomRigid(rng), randomRigid(rng)};
  const auto out = skinDqs(c, c.vertices, bones);
  CHECK((out[0] - bones[0].apply(c.vertices[0])).norm() < 1e-12);
  CHECK((out[1] - bones[1].apply(c.vertices[1])).norm() < 1e-12);
}

TEST_CASE("skin_dqs: identical bone transforms act as that transform") {
  const auto c = twoJointCharacter();
  std::mt19937 rng(11);
  const auto t = randomRigid(rng);
  const auto out = skinDqs(c, c.vertices, {t, t});
  for (std::size_t v = 0; v < out.size(); ++v) {
    CHECK((out[v] - t.apply(c.vertices[v])).norm() < 1e-9);
  }
}

TEST_CASE("skin_dqs: 50/50 blend of identity and a half turn keeps the axis distance") {
  TemplateCharacter c = twoJointCharacter();
  c.vertices[2] = Vec3(1, 0, 0);
  RigidTransform halfTurn{Eigen::AngleAxisd(M_PI, Vec3::UnitZ()).toRotationMatrix(), Vec3::Zero()};
  const auto out = skinDqs(c, c.vertices, {RigidTransform::identity(), halfTurn});
  const Vec3 expected = oracleDqsBlend({{Q{1, 0, 0, 0}, Vec3::Zero()}, {axisAngleQ(Vec3::UnitZ(), M_PI), Vec3::Zero()}},
                                       {0.5, 0.5}, Vec3(1, 0, 0));
  CHECK((out[2] - expected).norm() < 1e-12);
  CHECK(std::abs(out[2].head<2>().norm() - 1.0) < 1e-9);
  CHECK((out[2] - Vec3(0, 1, 0)).norm() < 1e-9);
}

TEST_CASE("skin_dqs: random blends agree with the array-based oracle") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  TemplateCharacter c = twoJointCharacter();
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = randomRigid(rng);
    const auto b = randomRigid(rng);
    const double wa = u(rng);
    c.skinning = SparseWeights{};
    c.skinning.columns = 2;
    c.skinning.appendRow({{0u, 1.0}});
    c.skinning.appendRow({{1u, 1.0}});
    c.skinning.appendRow({{0u, wa / (wa + 0.5)}, {1u, 0.5 / (wa + 0.5)}});
    const Vec3 p(u(rng), -u(rng), u(rng));
    c.vertices[2] = p;
    const auto out = skinDqs(c, c.vertices, {a, b});
    const Vec3 expected = oracleDqsBlend({{Q{Quat(a.rotation).w(), Quat(a.rotation).x(), Quat(a.rotation).y(), Quat(a.rotation).z()}, a.translation},
                                          {Q{Quat(b.rotation).w(), Quat(b.rotation).x(), Quat(b.rotation).y(), Quat(b.rotation).z()}, b.translation}},
                                         {wa / (wa + 0.5), 0.5 / (wa + 0.5)}, p);
    CHECK((out[2] - expected).norm() < 1e-9);
  }
}

TEST_CASE("skin_dqs: rejects non-rigid transforms") {
  const auto c = twoJointCharacter();
  RigidTransform scaled;
  scaled.rotation = 1.1 * Mat3::Identity();
  CHECK_THROWS_AS(skinDqs(c, c.vertices, {RigidTransform::identity(), scaled}), ParameterError);
}

TEST_CASE("skin_dqs: same-axis bones preserve the distance to the axis") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  TemplateCharacter c = twoJointCharacter();
  const Vec3 axis = Vec3(0.3, -0.2, 0.9).normalized();
  const Vec3 pointOnAxis(0.1, 0.2, -0.3);
  for (int trial = 0; trial < 500; ++trial) {
    auto rot = [&](double a) {
      RigidTransform t;
      t.rotation = Eigen::AngleAxisd(a, axis).toRotationMatrix();
      t.translation = pointOnAxis - t.rotation * pointOnAxis + ang(rng) * 0.1 * axis;
      return t;
    };
    const double wa = w(rng);
    c.skinning = SparseWeights{};
    c.skinning.columns = 2;
    c.skinning.appendRow({{0u, 1.0}});
    c.skinning.appendRow({{1u, 1.0}});
    c.skinning.appendRow({{0u, wa}, {1u, 1.0 - wa}});
    const Vec3 p(w(rng), w(rng), w(rng));
    c.vertices[2] = p;
    const auto out = skinDqs(c, c.vertices, {rot(ang(rng)), rot(ang(rng))});
    auto axisDistance = [&](const Vec3& x) {
      const Vec3 d = x - pointOnAxis;
      return (d - d.dot(axis) * axis).norm();
    };
    CHECK(std::abs(axisDistance(out[2]) - axisDistance(p)) < 1e-6);
  }
}

TEST_CASE("embedded graph: zero parameters return the template bit-identically") {
  const auto c = makeChainCharacter(10, 0.3, 12);
  const auto out = deformEmbeddedGraph(c, DeformParams::zero(c));
  for (std::size_t v = 0; v < out.size(); ++v) {
    CHECK(out[v].x() == c.vertices[v].x());
    CHECK(out[v].y() == c.vertices[v].y());
    CHECK(out[v].z() == c.vertices[v].z());
  }
}

TEST_CASE("embedded graph: uniform node translation translates the mesh") {
  const auto c = makeChainCharacter(10, 0.3, 12);
  auto p = DeformParams::zero(c);
  const Vec3 t(0.01, -0.02, 0.03);
  for (auto& b : p.nodeTranslations) b = t;
  const auto out = deformEmbeddedGraph(c, p);
  for (std::size_t v = 0; v < out.size(); ++v) {
    CHECK((out[v] - c.vertices[v] - t).norm() < 1e-12);
  }
}

TEST_CASE("embedded graph: single owning node rotates about its rest position") {
  TemplateCharacter c = twoJointCharacter();
  c.graphNodes = {0, 1};
  c.nodeWeights.columns = 2;
  c.nodeWeights.appendRow({{0u, 1.0}});
  c.nodeWeights.appendRow({{1u, 1.0}});
  c.nodeWeights.appendRow({{1u, 1.0}});
  c.nodeEdges = {{0, 1}};
  c.validate();
  auto p = DeformParams::zero(c);
  p.nodeRotations[1] = Vec3(0, 0, M_PI / 2);
  const auto out = deformEmbeddedGraph(c, p);
  // node 1 rests at (1.5, 0, 0); vertex 2 is at (1.0, 0.2, 0): local (-0.5, 0.2, 0) -> (-0.2, -0.5, 0).
  CHECK((out[2] - Vec3(1.3, -0.5, 0.0)).norm() < 1e-12);
  CHECK((out[1] - c.vertices[1]).norm() < 1e-15);
  CHECK_THROWS_AS(deformEmbeddedGraph(c, DeformParams{}), ParameterError);
}

TEST_CASE("pose_character: identity, rigid root motion, determinism") {
  const auto sphere = makeUvSphere(12, 16, 0.5);
  const auto c = makeRigidCharacter(sphere, 20);
  SkeletonPose rest{VecX::Zero(6)};
  const auto mesh = poseCharacter(c, rest, DeformParams::zero(c));
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    CHECK((mesh.vertices[v] - c.vertices[v]).norm() < 1e-12);
    CHECK(std::abs(mesh.normals[v].norm() - 1.0) < 1e-6);
    CHECK(mesh.normals[v].dot(c.vertices[v].normalized()) > 0.95);
  }

  SkeletonPose moved{VecX::Zero(6)};
  moved.dofValues << 0.1, -0.2, 0.3, 0.0, 0.0, 0.7;
  const auto posed = poseCharacter(c, moved, DeformParams::zero(c));
  const Mat3 r = Eigen::AngleAxisd(0.7, Vec3::UnitZ()).toRotationMatrix();
  for (std::size_t v = 0; v < posed.vertices.size(); ++v) {
    CHECK((posed.vertices[v] - (r * c.vertices[v] + Vec3(0.1, -0.2, 0.3))).norm() < 1e-12);
  }
  const auto again = poseCharacter(c, moved, DeformParams::zero(c));
  for (std::size_t v = 0; v < posed.vertices.size(); ++v) {
    CHECK(again.vertices[v] == posed.vertices[v]);
    CHECK(again.normals[v] == posed.normals[v]);
  }
}

TEST_CASE("pose_character: a pose sequence keeps topology constant") {
  const auto c = makeChainCharacter(12, 0.2, 10);
  for (int t = 0; t < 5; ++t) {
    SkeletonPose pose{VecX::Constant(c.dofCount(), 0.05 * t)};
    const auto mesh = poseCharacter(c, pose, DeformParams::zero(c));
    CHECK(mesh.vertices.size() == c.vertexCount());
    CHECK(mesh.faces == c.faces);
  }
}

TEST_CASE("partition of unity: translating bones and nodes translates every vertex") {
  const auto c = makeChainCharacter(12, 0.25, 10);
  std::mt19937 rng(2);
  SkeletonPose pose{VecX::Zero(c.dofCount())};
  std::normal_distribution<double> n(0.0, 0.2);
  for (Eigen::Index d = 3; d < pose.dofValues.size(); ++d) pose.dofValues[d] = n(rng);
  auto deform = DeformParams::zero(c);
  for (auto& a : deform.nodeRotations) a = Vec3(n(rng), n(rng), n(rng)) * 0.2;
  const auto fk = forwardKinematics(c, pose);
  auto bones = boneTransforms(c, fk);
  const auto base = skinDqs(c, deformEmbeddedGraph(c, deform), bones);
  const Vec3 t(0.3, -0.1, 0.2);
  for (auto& b : bones) b.translation += t;
  const auto shifted = skinDqs(c, deformEmbeddedGraph(c, deform), bones);
  for (std::size_t v = 0; v < base.size(); ++v) {
    CHECK((shifted[v] - base[v] - t).norm() < 1e-9);
  }
}

TEST_CASE("rasterize_uv_maps: full-square triangle with identical vertices") {
  PosedMesh mesh;
  const Vec3 q(0.1, 0.2, 0.3);
  mesh.vertices = {q, q, q};
  mesh.normals = {Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY()};
  mesh.faces = {Face{0, 1, 2}};
  mesh.faceUvs = {FaceUv{Vec2(0, 0), Vec2(2, 0), Vec2(0, 2)}};
  const auto maps = rasterizeUvMaps(mesh, 8);
  CHECK(maps.coveredCount() == 64);
  for (std::size_t t = 0; t < maps.texelCount(); ++t) {
    CHECK((maps.positions[t] - q).norm() < 1e-15);
    CHECK(std::abs(maps.normals[t].norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("rasterize_uv_maps: centroid texel is the vertex mean; degenerate UVs skipped") {
  PosedMesh mesh;
  mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0.5), Vec3(0, 2, 1)};
  mesh.normals = vertexNormals(mesh.vertices, {Face{0, 1, 2}});
  mesh.faces = {Face{0, 1, 2}, Face{0, 1, 2}};
  // Texel (2, 2) of a 6x6 grid has center (5/12, 5/12); these UVs put the centroid there.
  mesh.faceUvs = {FaceUv{Vec2(0.5, 0.5), Vec2(0.5, 0.5), Vec2(0.5, 0.5)},
                  FaceUv{Vec2(1.0 / 6, 1.0 / 6), Vec2(0.75, 1.0 / 6), Vec2(1.0 / 3, 11.0 / 12)}};
  setWarningsEnabled(false);
  const auto maps = rasterizeUvMaps(mesh, 6);
  setWarningsEnabled(true);
  CHECK(maps.skippedDegenerate == 1);
  const std::size_t texel = 2 * 6 + 2;
  REQUIRE(maps.covered(texel));
  const Vec3 mean = (mesh.vertices[0] + mesh.vertices[1] + mesh.vertices[2]) / 3.0;
  CHECK((maps.positions[texel] - mean).norm() < 1e-6);
  CHECK_THROWS_AS(rasterizeUvMaps(mesh, 0), ParameterError);
}

TEST_CASE("primitives have outward winding") {
  for (const auto& mesh : {makeUvSphere(8, 12, 1.0), makeOctahedron(1.0), makeBox(Vec3(-1, -1, -1), Vec3(1, 1, 1))}) {
    for (const auto& f : mesh.faces) {
      const Vec3 n = (mesh.vertices[f[1]] - mesh.vertices[f[0]]).cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
      const Vec3 centroid = (mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0;
      CHECK(n.dot(centroid) > 0.0);
    }
  }
  const auto octa = makeOctahedron(1.0);
  PosedMesh m{octa.vertices, vertexNormals(octa.vertices, octa.faces), octa.faces, octa.faceUvs};
  const auto maps = rasterizeUvMaps(m, 16);
  CHECK(maps.coveredCount() == 256);
}

TEST_CASE("character container round trip") {
  const auto c = makeChainCharacter(14, 0.2, 8);
  const auto dir = std::filesystem::temp_directory_path() / "lumisplat_char_roundtrip";
  std::filesystem::remove_all(dir);
  io::saveCharacter(c, dir);
  const auto loaded = io::loadCharacter(dir);
  REQUIRE(loaded.vertexCount() == c.vertexCount());
  for (std::size_t v = 0; v < c.vertexCount(); ++v) {
    CHECK(loaded.vertices[v] == c.vertices[v]);
  }
  CHECK(loaded.faces == c.faces);
  CHECK(loaded.jointParents == c.jointParents);
  CHECK(loaded.dofCount() == c.dofCount());
  CHECK(loaded.boneJoints == c.boneJoints);
  CHECK(loaded.graphNodes == c.graphNodes);
  CHECK(loaded.nodeEdges == c.nodeEdges);
  for (std::size_t k = 0; k < c.skinning.weights.size(); ++k) {
    CHECK(std::abs(loaded.skinning.weights[k] - c.skinning.weights[k]) < 1e-7);
  }
  SkeletonPose pose{VecX::Constant(c.dofCount(), 0.1)};
  const auto a = poseCharacter(c, pose, DeformParams::zero(c));
  const auto b = poseCharacter(loaded, pose, DeformParams::zero(loaded));
  for (std::size_t v = 0; v < a.vertices.size(); ++v) {
    CHECK((a.vertices[v] - b.vertices[v]).norm() < 1e-6);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("skinning container rejects bad magic") {
  std::vector<std::uint8_t> bytes = {'X', 'S', 'K', 'W', '1', 0, 0, 0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(io::decodeSkinning(bytes), DataError);
}
