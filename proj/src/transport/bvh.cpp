#include "lumisplat/transport/bvh.h"

#include <algorithm>
#include <numeric>

namespace lumisplat {

Ray::Ray(const Vec3& o, const Vec3& d) : origin(o), direction(d) {
  LS_CHECK(d.allFinite() && d.squaredNorm() > 0.0, ParameterError, "ray direction must be finite and non-zero");
  Eigen::Index z = 0;
  d.cwiseAbs().maxCoeff(&z);
  kz = static_cast<int>(z);
  kx = (kz + 1) % 3;
  ky = (kx + 1) % 3;
  if (d[kz] < 0.0) std::swap(kx, ky);
  sx = d[kx] / d[kz];
  sy = d[ky] / d[kz];
  sz = 1.0 / d[kz];
}

bool rayHitsTriangle(const Ray& ray, const Vec3& a, const Vec3& b, const Vec3& c, double tMax, double* tHit) {
  const Vec3 A = a - ray.origin;
  const Vec3 B = b - ray.origin;
  const Vec3 C = c - ray.origin;
  const double ax = A[ray.kx] - ray.sx * A[ray.kz];
  const double ay = A[ray.ky] - ray.sy * A[ray.kz];
  const double bx = B[ray.kx] - ray.sx * B[ray.kz];
  const double by = B[ray.ky] - ray.sy * B[ray.kz];
  const double cx = C[ray.kx] - ray.sx * C[ray.kz];
  const double cy = C[ray.ky] - ray.sy * C[ray.kz];
  double u = cx * by - cy * bx;
  double v = ax * cy - ay * cx;
  double w = bx * ay - by * ax;
  if (u == 0.0 || v == 0.0 || w == 0.0) {
    // Edge case: recompute in extended precision so shared edges are never both missed.
    using LD = long double;
    u = static_cast<double>(LD(cx) * LD(by) - LD(cy) * LD(bx));
    v = static_cast<double>(LD(ax) * LD(cy) - LD(ay) * LD(cx));
    w = static_cast<double>(LD(bx) * LD(ay) - LD(by) * LD(ax));
  }
  if ((u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0)) return false;
  double det = u + v + w;
  if (det == 0.0) return false;
  const double az = ray.sz * A[ray.kz];
  const double bz = ray.sz * B[ray.kz];
  const double cz = ray.sz * C[ray.kz];
  double t = u * az + v * bz + w * cz;
  if (det < 0.0) {
    det = -det;
    t = -t;
  }
  if (t <= 0.0 || t >= tMax * det) return false;
  if (tHit != nullptr) *tHit = t / det;
  return true;
}

Bvh::Bvh(Vec3List vertices, std::vector<Face> faces) : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  for (const auto& f : faces_) {
    for (int i : f) {
      LS_CHECK(i >= 0 && static_cast<std::size_t>(i) < vertices_.size(), ParameterError, "face index out of range");
    }
  }
  for (const auto& v : vertices_) LS_CHECK(v.allFinite(), NumericError, "non-finite vertex");
  order_.resize(faces_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!faces_.empty()) build(0, static_cast<int>(faces_.size()));
}

int Bvh::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  Vec3 clo = lo, chi = hi;
  auto centroid = [&](int f) {
    const auto& t = faces_[f];
    return (vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]]) / 3.0;
  };
  for (int i = begin; i < end; ++i) {
    for (int k : faces_[order_[i]]) {
      lo = lo.cwiseMin(vertices_[k]);
      hi = hi.cwiseMax(vertices_[k]);
    }
    const Vec3 c = centroid(order_[i]);
    clo = clo.cwiseMin(c);
    chi = chi.cwiseMax(c);
  }
  // Pad so rounding in the slab test can never reject a box whose triangle is hit.
  const Vec3 pad = (hi - lo).cwiseAbs() * 1e-9 + (lo.cwiseAbs().cwiseMax(hi.cwiseAbs())) * 1e-12 +
                   Vec3::Constant(1e-15);
  nodes_[id].lo = lo - pad;
  nodes_[id].hi = hi + pad;

  int axis = 0;
  (chi - clo).maxCoeff(&axis);
  if (end - begin <= 4 || chi[axis] == clo[axis]) {
    nodes_[id].first = begin;
    nodes_[id].count = end - begin;
    return id;
  }
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
    const double ca = centroid(a)[axis], cb = centroid(b)[axis];
    return ca < cb || (ca == cb && a < b);
  });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].first = left;
  nodes_[id].right = right;
  return id;
}

bool Bvh::boxHit(const Node& n, const Ray& ray, const Vec3& invDir, double tMax) const {
  double t0 = 0.0, t1 = tMax;
  for (int a = 0; a < 3; ++a) {
    if (ray.direction[a] == 0.0) {
      if (ray.origin[a] < n.lo[a] || ray.origin[a] > n.hi[a]) return false;
      continue;
    }
    double tn = (n.lo[a] - ray.origin[a]) * invDir[a];
    double tf = (n.hi[a] - ray.origin[a]) * invDir[a];
    if (tn > tf) std::swap(tn, tf);
    tf *= 1.0 + 1e-12;
    t0 = std::max(t0, tn);
    t1 = std::min(t1, tf);
    if (t0 > t1) return false;
  }
  return true;
}

bool Bvh::anyHit(const Ray& ray, double tMax) const {
  if (nodes_.empty()) return false;
  const Vec3 invDir = ray.direction.cwiseInverse();
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (!boxHit(n, ray, invDir, tMax)) continue;
    if (n.count > 0) {
      for (int i = n.first; i < n.first + n.count; ++i) {
        const auto& f = faces_[order_[i]];
        if (rayHitsTriangle(ray, vertices_[f[0]], vertices_[f[1]], vertices_[f[2]], tMax)) return true;
      }
    } else {
      stack[top++] = n.first;
      stack[top++] = n.right;
    }
  }
  return false;
}

double Bvh::closestHit(const Ray& ray, int* face) const {
  double best = std::numeric_limits<double>::infinity();
  int bestFace = -1;
  if (nodes_.empty()) return best;
  const Vec3 invDir = ray.direction.cwiseInverse();
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (!boxHit(n, ray, invDir, best)) continue;
    if (n.count > 0) {
      for (int i = n.first; i < n.first + n.count; ++i) {
        const int fi = order_[i];
        const auto& f = faces_[fi];
        double t = 0.0;
        if (rayHitsTriangle(ray, vertices_[f[0]], vertices_[f[1]], vertices_[f[2]], best, &t)) {
          best = t;
          bestFace = fi;
        }
      }
    } else {
      stack[top++] = n.first;
      stack[top++] = n.right;
    }
  }
  if (face != nullptr) *face = bestFace;
  return best;
}

}  // namespace lumisplat
