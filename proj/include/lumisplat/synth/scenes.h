#pragma once

// Small synthetic scenes with closed-form answers, used by tests and the demo generator.

#include "lumisplat/geometry/primitives.h"
#include "lumisplat/relight.h"

namespace lumisplat::synth {

/// Unit UV sphere with exact (radial) vertex normals.
inline PosedMesh sphereMesh(int rings, int segments, double radius = 1.0) {
  const TriangleMesh m = makeUvSphere(rings, segments, radius);
  PosedMesh p;
  p.vertices = m.vertices;
  p.faces = m.faces;
  p.faceUvs = m.faceUvs;
  for (const auto& v : m.vertices) p.normals.push_back(v.normalized());
  return p;
}

inline PosedMesh meshFrom(const TriangleMesh& m) {
  PosedMesh p;
  p.vertices = m.vertices;
  p.faces = m.faces;
  p.faceUvs = m.faceUvs;
  p.normals = vertexNormals(m.vertices, m.faces);
  return p;
}

/// Camera on +z at `distance`, looking at the origin, image y pointing down.
inline CameraView frontCamera(int size, double distance = 3.0, double focalScale = 1.15) {
  CameraView v;
  v.width = v.height = size;
  v.fx = v.fy = focalScale * size;
  v.cx = v.cy = size / 2.0;
  v.worldToCamera.rotation = Vec3(1, -1, -1).asDiagonal();
  v.worldToCamera.translation = Vec3(0, 0, distance);
  return v;
}

/// Ray-cast Lambertian reference: max(0, n.l) * albedo / pi on a unit sphere at the origin.
inline Image analyticSphere(const CameraView& v, const Vec3& light, const Vec3& albedo) {
  Image img(v.width, v.height, 3);
  const RigidTransform camToWorld = v.worldToCamera.inverse();
  const Vec3 o = camToWorld.translation;
  for (int y = 0; y < v.height; ++y) {
    for (int x = 0; x < v.width; ++x) {
      const Vec3 d = (camToWorld.rotation * Vec3((x - v.cx) / v.fx, (y - v.cy) / v.fy, 1.0)).normalized();
      const double b = o.dot(d), c = o.squaredNorm() - 1.0, disc = b * b - c;
      if (disc < 0.0) continue;
      const Vec3 n = (o + (-b - std::sqrt(disc)) * d).normalized();
      const double s = std::max(0.0, n.dot(light)) / M_PI;
      for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = static_cast<float>(s * albedo[ch]);
    }
  }
  return img;
}

inline Image analyticSphere(const CameraView& v, const Vec3& light, double albedo) {
  return analyticSphere(v, light, Vec3::Constant(albedo));
}

inline Image rgbOf(const Image& rgba) {
  Image out(rgba.width, rgba.height, 3);
  for (std::size_t p = 0; p < rgba.pixelCount(); ++p)
    for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = rgba.data[p * rgba.channels + c];
  return out;
}

}  // namespace lumisplat::synth
