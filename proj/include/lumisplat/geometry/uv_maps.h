#pragma once

#include "lumisplat/geometry/character.h"

namespace lumisplat {

/// UV-space rasterization of a posed mesh. Texel (x, y) has its center at
/// uv = ((x + 0.5) / res, (y + 0.5) / res) and linear index y * res + x.
struct UvMaps {
  int resolution = 0;
  std::vector<int> faceIndex;  // -1 when the texel is not covered
  Vec3List barycentric;
  Vec3List positions;
  Vec3List normals;
  std::size_t skippedDegenerate = 0;

  std::size_t texelCount() const { return faceIndex.size(); }
  bool covered(std::size_t texel) const { return faceIndex[texel] >= 0; }
  std::size_t coveredCount() const;
};

/// First covering triangle (in face order) owns a texel. Degenerate UV triangles are
/// skipped and counted.
UvMaps rasterizeUvMaps(const PosedMesh& mesh, int resolution);

/// Barycentric interpolation of a vertex attribute at a covered texel.
Vec3 interpolateAtTexel(const UvMaps& maps, const std::vector<Face>& faces, const Vec3List& attribute,
                        std::size_t texel);

}  // namespace lumisplat
