#include "lumisplat/geometry/uv_maps.h"

#include <algorithm>

namespace lumisplat {

std::size_t UvMaps::coveredCount() const {
  return static_cast<std::size_t>(std::count_if(faceIndex.begin(), faceIndex.end(), [](int f) { return f >= 0; }));
}

Vec3 interpolateAtTexel(const UvMaps& maps, const std::vector<Face>& faces, const Vec3List& attribute,
                        std::size_t texel) {
  const Face& f = faces[maps.faceIndex[texel]];
  const Vec3& b = maps.barycentric[texel];
  return b[0] * attribute[f[0]] + b[1] * attribute[f[1]] + b[2] * attribute[f[2]];
}

UvMaps rasterizeUvMaps(const PosedMesh& mesh, int resolution) {
  LS_CHECK(resolution >= 1, ParameterError, "resolution must be >= 1");
  LS_CHECK(mesh.faceUvs.size() == mesh.faces.size(), ParameterError, "mesh has no per-corner UVs");
  const std::size_t n = static_cast<std::size_t>(resolution) * resolution;
  UvMaps maps;
  maps.resolution = resolution;
  maps.faceIndex.assign(n, -1);
  maps.barycentric.assign(n, Vec3::Zero());
  maps.positions.assign(n, Vec3::Zero());
  maps.normals.assign(n, Vec3::Zero());

  const double res = resolution;
  constexpr double kInsideTol = 1e-12;
  for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const FaceUv& uv = mesh.faceUvs[fi];
    const Vec2 e1 = uv[1] - uv[0];
    const Vec2 e2 = uv[2] - uv[0];
    const double det = e1.x() * e2.y() - e1.y() * e2.x();
    if (std::abs(det) < 1e-15) {
      ++maps.skippedDegenerate;
      continue;
    }
    const double umin = std::min({uv[0].x(), uv[1].x(), uv[2].x()});
    const double umax = std::max({uv[0].x(), uv[1].x(), uv[2].x()});
    const double vmin = std::min({uv[0].y(), uv[1].y(), uv[2].y()});
    const double vmax = std::max({uv[0].y(), uv[1].y(), uv[2].y()});
    const int x0 = std::max(0, static_cast<int>(std::floor(umin * res - 0.5)));
    const int x1 = std::min(resolution - 1, static_cast<int>(std::ceil(umax * res - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(vmin * res - 0.5)));
    const int y1 = std::min(resolution - 1, static_cast<int>(std::ceil(vmax * res - 0.5)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const std::size_t texel = static_cast<std::size_t>(y) * resolution + x;
        if (maps.faceIndex[texel] >= 0) {
          continue;
        }
        const Vec2 p((x + 0.5) / res, (y + 0.5) / res);
        const Vec2 d = p - uv[0];
        const double b1 = (d.x() * e2.y() - d.y() * e2.x()) / det;
        const double b2 = (e1.x() * d.y() - e1.y() * d.x()) / det;
        const double b0 = 1.0 - b1 - b2;
        if (b0 < -kInsideTol || b1 < -kInsideTol || b2 < -kInsideTol) {
          continue;
        }
        maps.faceIndex[texel] = static_cast<int>(fi);
        maps.barycentric[texel] = Vec3(b0, b1, b2);
      }
    }
  }
  if (maps.skippedDegenerate > 0) {
    warn(std::to_string(maps.skippedDegenerate) + " degenerate UV triangles skipped during rasterization");
  }

  for (std::size_t t = 0; t < n; ++t) {
    if (maps.faceIndex[t] < 0) {
      continue;
    }
    maps.positions[t] = interpolateAtTexel(maps, mesh.faces, mesh.vertices, t);
    Vec3 normal = interpolateAtTexel(maps, mesh.faces, mesh.normals, t);
    const double len = normal.norm();
    if (len > 1e-12) {
      normal /= len;
    } else {
      const Face& f = mesh.faces[maps.faceIndex[t]];
      normal = (mesh.vertices[f[1]] - mesh.vertices[f[0]]).cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]).normalized();
    }
    maps.normals[t] = normal;
  }
  return maps;
}

}  // namespace lumisplat
