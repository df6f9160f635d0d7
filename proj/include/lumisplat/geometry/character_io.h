#pragma once

#include "lumisplat/geometry/character.h"
#include "lumisplat/geometry/primitives.h"

#include <filesystem>

namespace lumisplat::io {

// Character container layout (one directory):
//   template.obj   mesh with per-corner UVs ("f v/vt")
//   skeleton.json  joints, parents, DoF map with limits and mean pose, bone->joint map, hand groups
//   skinning.bin   "LSKW1", u32 vertices, u32 bones, u32 counts[vertices], u32 indices[nnz], f32 weights[nnz]
//   graph.json     node vertex indices, node edges, sparse vertex->node weights

TemplateCharacter loadCharacter(const std::filesystem::path& dir);
void saveCharacter(const TemplateCharacter& character, const std::filesystem::path& dir);

TriangleMesh readObj(const std::filesystem::path& path);
void writeObj(const std::filesystem::path& path, const Vec3List& vertices, const std::vector<Face>& faces,
              const std::vector<FaceUv>& faceUvs);

std::vector<std::uint8_t> encodeSkinning(const SparseWeights& weights);
SparseWeights decodeSkinning(const std::vector<std::uint8_t>& bytes);

SkeletonPose loadPose(const std::filesystem::path& path);
void savePose(const std::filesystem::path& path, const SkeletonPose& pose);
DeformParams loadDeform(const std::filesystem::path& path);
void saveDeform(const std::filesystem::path& path, const DeformParams& params);

}  // namespace lumisplat::io
