#pragma once

#include "lumisplat/geometry/character.h"

#include <vector>

namespace lumisplat {

/// Ray with the per-ray constants of the watertight triangle test precomputed.
struct Ray {
  Vec3 origin;
  Vec3 direction;
  int kx = 0, ky = 1, kz = 2;
  double sx = 0, sy = 0, sz = 1;

  Ray(const Vec3& o, const Vec3& d);
};

/// Watertight ray/triangle test (both faces). Hits count only for t in (0, tMax).
bool rayHitsTriangle(const Ray& ray, const Vec3& a, const Vec3& b, const Vec3& c, double tMax, double* tHit = nullptr);

/// Bounding-volume hierarchy over triangles, immutable after construction.
class Bvh {
 public:
  Bvh(Vec3List vertices, std::vector<Face> faces);

  bool anyHit(const Ray& ray, double tMax = std::numeric_limits<double>::infinity()) const;
  /// Nearest hit distance, or +inf.
  double closestHit(const Ray& ray, int* face = nullptr) const;

  std::size_t faceCount() const { return faces_.size(); }
  const Vec3List& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }

 private:
  struct Node {
    Vec3 lo, hi;
    int first = 0;  // leaf: range into order_; inner: left child index
    int count = 0;  // 0 for inner nodes (right child = first + 1 is not assumed)
    int right = -1;
  };

  int build(int begin, int end);
  bool boxHit(const Node& n, const Ray& ray, const Vec3& invDir, double tMax) const;

  Vec3List vertices_;
  std::vector<Face> faces_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace lumisplat
