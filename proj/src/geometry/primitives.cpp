#include "lumisplat/geometry/primitives.h"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

namespace lumisplat {

TriangleMesh makeUvSphere(int rings, int segments, double radius) {
  LS_CHECK(rings >= 2 && segments >= 3, ParameterError, "sphere needs rings >= 2 and segments >= 3");
  TriangleMesh mesh;
  // vertex 0: north pole (+y), then (rings - 1) latitude circles, then south pole.
  mesh.vertices.push_back(Vec3(0.0, radius, 0.0));
  for (int r = 1; r < rings; ++r) {
    const double theta = M_PI * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * M_PI * s / segments - M_PI;
      mesh.vertices.push_back(radius * Vec3(std::sin(theta) * std::sin(phi), std::cos(theta),
                                            std::sin(theta) * std::cos(phi)));
    }
  }
  const int south = static_cast<int>(mesh.vertices.size());
  mesh.vertices.push_back(Vec3(0.0, -radius, 0.0));

  auto ringVertex = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
  auto uvAt = [&](int r, double s) { return Vec2(s / segments, static_cast<double>(r) / rings); };

  for (int s = 0; s < segments; ++s) {
    mesh.faces.push_back({0, ringVertex(1, s), ringVertex(1, s + 1)});
    mesh.faceUvs.push_back({uvAt(0, s + 0.5), uvAt(1, s), uvAt(1, s + 1)});
  }
  for (int r = 1; r < rings - 1; ++r) {
    for (int s = 0; s < segments; ++s) {
      const int a = ringVertex(r, s);
      const int b = ringVertex(r, s + 1);
      const int c = ringVertex(r + 1, s);
      const int d = ringVertex(r + 1, s + 1);
      mesh.faces.push_back({a, d, b});
      mesh.faceUvs.push_back({uvAt(r, s), uvAt(r + 1, s + 1), uvAt(r, s + 1)});
      mesh.faces.push_back({a, c, d});
      mesh.faceUvs.push_back({uvAt(r, s), uvAt(r + 1, s), uvAt(r + 1, s + 1)});
    }
  }
  for (int s = 0; s < segments; ++s) {
    mesh.faces.push_back({ringVertex(rings - 1, s + 1), ringVertex(rings - 1, s), south});
    mesh.faceUvs.push_back({uvAt(rings - 1, s + 1), uvAt(rings - 1, s), uvAt(rings, s + 0.5)});
  }
  return mesh;
}

TriangleMesh makePlane(int cells, double half) {
  LS_CHECK(cells >= 1, ParameterError, "plane needs at least one cell");
  TriangleMesh mesh;
  const int n = cells + 1;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      mesh.vertices.push_back(Vec3(-half + 2.0 * half * x / cells, -half + 2.0 * half * y / cells, 0.0));
    }
  }
  auto uv = [&](int x, int y) { return Vec2(static_cast<double>(x) / cells, static_cast<double>(y) / cells); };
  for (int y = 0; y < cells; ++y) {
    for (int x = 0; x < cells; ++x) {
      const int a = y * n + x;
      const int b = a + 1;
      const int c = a + n;
      const int d = c + 1;
      mesh.faces.push_back({a, b, d});
      mesh.faceUvs.push_back({uv(x, y), uv(x + 1, y), uv(x + 1, y + 1)});
      mesh.faces.push_back({a, d, c});
      mesh.faceUvs.push_back({uv(x, y), uv(x + 1, y + 1), uv(x, y + 1)});
    }
  }
  return mesh;
}

TriangleMesh makeOctahedron(double radius) {
  TriangleMesh mesh;
  mesh.vertices = {radius * Vec3::UnitX(), -radius * Vec3::UnitX(), radius * Vec3::UnitY(),
                   -radius * Vec3::UnitY(), radius * Vec3::UnitZ(), -radius * Vec3::UnitZ()};
  auto toUv = [](double x, double y) { return Vec2(0.5 * x + 0.5, 0.5 * y + 0.5); };
  for (int sx : {1, -1}) {
    for (int sy : {1, -1}) {
      const int vx = sx > 0 ? 0 : 1;
      const int vy = sy > 0 ? 2 : 3;
      // Outward winding depends on the octant's handedness.
      const bool flip = sx * sy < 0;
      Face upper = flip ? Face{vy, vx, 4} : Face{vx, vy, 4};
      FaceUv upperUv = flip ? FaceUv{toUv(0, sy), toUv(sx, 0), toUv(0, 0)}
                            : FaceUv{toUv(sx, 0), toUv(0, sy), toUv(0, 0)};
      Face lower = flip ? Face{vx, vy, 5} : Face{vy, vx, 5};
      FaceUv lowerUv = flip ? FaceUv{toUv(sx, 0), toUv(0, sy), toUv(sx, sy)}
                            : FaceUv{toUv(0, sy), toUv(sx, 0), toUv(sx, sy)};
      mesh.faces.push_back(upper);
      mesh.faceUvs.push_back(upperUv);
      mesh.faces.push_back(lower);
      mesh.faceUvs.push_back(lowerUv);
    }
  }
  return mesh;
}

TriangleMesh makeBox(const Vec3& lo, const Vec3& hi, int openFace) {
  const Vec3 d = hi - lo;
  struct Side {
    Vec3 origin;
    Vec3 a;
    Vec3 b;
  };
  const Side sides[6] = {
      {lo, Vec3(0, 0, d.z()), Vec3(0, d.y(), 0)},
      {Vec3(hi.x(), lo.y(), lo.z()), Vec3(0, d.y(), 0), Vec3(0, 0, d.z())},
      {lo, Vec3(d.x(), 0, 0), Vec3(0, 0, d.z())},
      {Vec3(lo.x(), hi.y(), lo.z()), Vec3(0, 0, d.z()), Vec3(d.x(), 0, 0)},
      {lo, Vec3(0, d.y(), 0), Vec3(d.x(), 0, 0)},
      {Vec3(lo.x(), lo.y(), hi.z()), Vec3(d.x(), 0, 0), Vec3(0, d.y(), 0)},
  };
  TriangleMesh mesh;
  for (int s = 0; s < 6; ++s) {
    if (s == openFace) {
      continue;
    }
    const int base = static_cast<int>(mesh.vertices.size());
    const Side& side = sides[s];
    mesh.vertices.push_back(side.origin);
    mesh.vertices.push_back(side.origin + side.a);
    mesh.vertices.push_back(side.origin + side.a + side.b);
    mesh.vertices.push_back(side.origin + side.b);
    const Vec2 cell((s % 3) / 3.0, (s / 3) / 2.0);
    const Vec2 du(1.0 / 3.0, 0.0);
    const Vec2 dv(0.0, 0.5);
    mesh.faces.push_back({base, base + 1, base + 2});
    mesh.faceUvs.push_back({cell, cell + du, cell + du + dv});
    mesh.faces.push_back({base, base + 2, base + 3});
    mesh.faceUvs.push_back({cell, cell + du + dv, cell + dv});
  }
  return mesh;
}

TriangleMesh mergeMeshes(const std::vector<TriangleMesh>& meshes) {
  TriangleMesh out;
  for (const auto& m : meshes) {
    const int base = static_cast<int>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), m.vertices.begin(), m.vertices.end());
    for (const auto& f : m.faces) {
      out.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
    }
    out.faceUvs.insert(out.faceUvs.end(), m.faceUvs.begin(), m.faceUvs.end());
  }
  return out;
}

void buildEmbeddedGraph(TemplateCharacter& character, std::size_t nodeCount, int neighbors) {
  const std::size_t nv = character.vertexCount();
  character.graphNodes.clear();
  character.nodeEdges.clear();
  character.nodeWeights = SparseWeights{};
  if (nodeCount == 0 || nv == 0) {
    return;
  }
  nodeCount = std::min(nodeCount, nv);
  std::vector<double> dist(nv, std::numeric_limits<double>::infinity());
  std::size_t next = 0;
  for (std::size_t n = 0; n < nodeCount; ++n) {
    character.graphNodes.push_back(static_cast<int>(next));
    const Vec3 g = character.vertices[next];
    std::size_t best = 0;
    double bestDist = -1.0;
    for (std::size_t v = 0; v < nv; ++v) {
      dist[v] = std::min(dist[v], (character.vertices[v] - g).squaredNorm());
      if (dist[v] > bestDist) {
        bestDist = dist[v];
        best = v;
      }
    }
    next = best;
  }

  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, neighbors)), nodeCount);
  character.nodeWeights.columns = nodeCount;
  std::set<std::pair<int, int>> edges;
  for (std::size_t v = 0; v < nv; ++v) {
    std::vector<std::pair<double, std::uint32_t>> cand;
    cand.reserve(nodeCount);
    for (std::size_t n = 0; n < nodeCount; ++n) {
      cand.emplace_back((character.vertices[v] - character.nodeRestPosition(n)).norm(), static_cast<std::uint32_t>(n));
    }
    std::partial_sort(cand.begin(), cand.begin() + std::min(k + 1, nodeCount), cand.end());
    const double dmax = (k < nodeCount) ? cand[k].first : cand[k - 1].first * 1.5 + 1e-9;
    std::vector<std::pair<std::uint32_t, double>> row;
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double w = 1.0 - cand[i].first / std::max(dmax, 1e-12);
      w = std::max(w, 0.0);
      w *= w;
      row.emplace_back(cand[i].second, w);
      total += w;
    }
    if (total <= 0.0) {
      row.assign(1, {cand[0].second, 1.0});
      total = 1.0;
    }
    for (auto& [idx, w] : row) {
      w /= total;
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      for (std::size_t j = i + 1; j < row.size(); ++j) {
        const int a = static_cast<int>(std::min(row[i].first, row[j].first));
        const int b = static_cast<int>(std::max(row[i].first, row[j].first));
        edges.insert({a, b});
      }
    }
    character.nodeWeights.appendRow(row);
  }
  for (const auto& [a, b] : edges) {
    character.nodeEdges.push_back({a, b});
  }
}

TemplateCharacter makeRigidCharacter(const TriangleMesh& mesh, std::size_t graphNodes) {
  TemplateCharacter c;
  c.vertices = mesh.vertices;
  c.faces = mesh.faces;
  c.faceUvs = mesh.faceUvs;
  c.jointNames = {"root"};
  c.jointRest = {Vec3::Zero()};
  c.jointParents = {-1};
  const char* names[6] = {"tx", "ty", "tz", "rx", "ry", "rz"};
  for (int i = 0; i < 6; ++i) {
    DofSpec dof;
    dof.name = names[i];
    dof.joint = 0;
    dof.axis = Vec3::Unit(i % 3);
    dof.type = i < 3 ? DofType::kTranslation : DofType::kRotation;
    dof.lower = i < 3 ? -10.0 : -M_PI;
    dof.upper = i < 3 ? 10.0 : M_PI;
    c.dofs.push_back(dof);
  }
  c.boneJoints = {0};
  c.skinning.columns = 1;
  for (std::size_t v = 0; v < c.vertices.size(); ++v) {
    c.skinning.appendRow({{0u, 1.0}});
  }
  buildEmbeddedGraph(c, graphNodes);
  c.validate();
  return c;
}

TemplateCharacter makeChainCharacter(int totalDofs, double segmentLength, std::size_t graphNodes) {
  LS_CHECK(totalDofs >= 6, ParameterError, "a chain needs at least the 6 root DoF");
  TemplateCharacter c;
  c.jointNames = {"root"};
  c.jointRest = {Vec3::Zero()};
  c.jointParents = {-1};
  const char* rootNames[6] = {"root_tx", "root_ty", "root_tz", "root_rx", "root_ry", "root_rz"};
  for (int i = 0; i < 6; ++i) {
    DofSpec dof;
    dof.name = rootNames[i];
    dof.joint = 0;
    dof.axis = Vec3::Unit(i % 3);
    dof.type = i < 3 ? DofType::kTranslation : DofType::kRotation;
    dof.lower = i < 3 ? -10.0 : -2.0 * M_PI;
    dof.upper = i < 3 ? 10.0 : 2.0 * M_PI;
    c.dofs.push_back(dof);
  }
  // Two bending axes per joint; a slight zig-zag keeps twist about the chain observable.
  int remaining = totalDofs - 6;
  int joint = 0;
  while (remaining > 0) {
    const int parent = joint;
    ++joint;
    const double side = 0.3 * segmentLength * ((joint % 2) ? 1.0 : -1.0);
    c.jointNames.push_back("j" + std::to_string(joint));
    c.jointRest.push_back(c.jointRest[parent] + Vec3(side, segmentLength, 0.25 * side));
    c.jointParents.push_back(parent);
    const Vec3 axes[2] = {Vec3::UnitX(), Vec3::UnitZ()};
    for (int a = 0; a < 2 && remaining > 0; ++a, --remaining) {
      DofSpec dof;
      dof.name = c.jointNames.back() + (a == 0 ? "_rx" : "_rz");
      dof.joint = joint;
      dof.axis = axes[a];
      dof.lower = -1.5;
      dof.upper = 1.5;
      c.dofs.push_back(dof);
    }
  }
  // End effector without DoF.
  c.jointNames.push_back("tip");
  c.jointRest.push_back(c.jointRest[joint] + Vec3(0.0, segmentLength, 0.0));
  c.jointParents.push_back(joint);

  const int segments = static_cast<int>(c.jointRest.size()) - 1;
  for (int j = 0; j < segments; ++j) {
    c.boneJoints.push_back(j);
  }
  c.skinning.columns = c.boneJoints.size();

  // Tube mesh.
  const int around = 8;
  const int ringsPerSegment = 4;
  const double radius = 0.15 * segmentLength;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> ringWeights;
  for (int seg = 0; seg < segments; ++seg) {
    const Vec3 a = c.jointRest[seg];
    const Vec3 b = c.jointRest[seg + 1];
    const Vec3 dir = (b - a).normalized();
    const Vec3 u = dir.unitOrthogonal();
    const Vec3 w = dir.cross(u);
    const int count = (seg == segments - 1) ? ringsPerSegment + 1 : ringsPerSegment;
    for (int r = 0; r < count; ++r) {
      const double f = static_cast<double>(r) / ringsPerSegment;
      const Vec3 center = a + f * (b - a);
      for (int k = 0; k < around; ++k) {
        const double ang = 2.0 * M_PI * k / around;
        c.vertices.push_back(center + radius * (std::cos(ang) * u + std::sin(ang) * w));
      }
      std::vector<std::pair<std::uint32_t, double>> row;
      if (f < 0.25 && seg > 0) {
        const double wPrev = 0.5 - 2.0 * f;
        row = {{static_cast<std::uint32_t>(seg - 1), wPrev}, {static_cast<std::uint32_t>(seg), 1.0 - wPrev}};
      } else {
        row = {{static_cast<std::uint32_t>(seg), 1.0}};
      }
      ringWeights.push_back(row);
    }
  }
  const int ringCount = static_cast<int>(ringWeights.size());
  for (int r = 0; r < ringCount; ++r) {
    for (int k = 0; k < around; ++k) {
      c.skinning.appendRow(ringWeights[r]);
    }
  }
  for (int r = 0; r + 1 < ringCount; ++r) {
    for (int k = 0; k < around; ++k) {
      const int a = r * around + k;
      const int b = r * around + (k + 1) % around;
      const int cc = a + around;
      const int d = b + around;
      const Vec2 uvA(static_cast<double>(k) / around, static_cast<double>(r) / (ringCount - 1));
      const Vec2 uvB(static_cast<double>(k + 1) / around, uvA.y());
      const Vec2 uvC(uvA.x(), static_cast<double>(r + 1) / (ringCount - 1));
      const Vec2 uvD(uvB.x(), uvC.y());
      c.faces.push_back({a, cc, d});
      c.faceUvs.push_back({uvA, uvC, uvD});
      c.faces.push_back({a, d, b});
      c.faceUvs.push_back({uvA, uvD, uvB});
    }
  }
  buildEmbeddedGraph(c, graphNodes);
  c.validate();
  return c;
}

}  // namespace lumisplat
