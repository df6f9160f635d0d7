#pragma once

#include "lumisplat/geometry/character.h"

namespace lumisplat {

/// Plain triangle mesh with per-corner UVs.
struct TriangleMesh {
  Vec3List vertices;
  std::vector<Face> faces;
  std::vector<FaceUv> faceUvs;
};

/// Latitude/longitude sphere centered at the origin, poles on +-y. UVs follow the
/// sphere parameterization (u around y, v from +y to -y); the seam shares vertices.
TriangleMesh makeUvSphere(int rings, int segments, double radius);

/// Square grid in the z = 0 plane spanning [-half, half]^2, facing +z.
TriangleMesh makePlane(int cells, double half);

/// Regular octahedron (8 triangles) with an octahedral UV unwrap.
TriangleMesh makeOctahedron(double radius);

/// Axis-aligned box [lo, hi] with outward faces; `openFace` in {-1 none, 0..5} omits one side
/// (0:-x 1:+x 2:-y 3:+y 4:-z 5:+z). UVs are a simple per-face atlas.
TriangleMesh makeBox(const Vec3& lo, const Vec3& hi, int openFace = -1);

/// Concatenates meshes, offsetting indices.
TriangleMesh mergeMeshes(const std::vector<TriangleMesh>& meshes);

/// Embedded graph on `nodeCount` vertices picked by farthest-point sampling, each
/// vertex attached to its `neighbors` nearest nodes with (1 - d/d_max)^2 falloff.
/// Nodes sharing a vertex are connected.
void buildEmbeddedGraph(TemplateCharacter& character, std::size_t nodeCount, int neighbors = 4);

/// Single-bone character: root joint at the origin carrying 6 DoF (tx ty tz rx ry rz).
TemplateCharacter makeRigidCharacter(const TriangleMesh& mesh, std::size_t graphNodes);

/// Serial chain along +y. The root carries 6 DoF; every further joint carries the
/// rotation axes in `axesPerJoint` (cycled), until `totalDofs` is reached. A tube mesh
/// around the chain is skinned with linear falloff between adjacent bones.
TemplateCharacter makeChainCharacter(int totalDofs, double segmentLength, std::size_t graphNodes = 0);

}  // namespace lumisplat
