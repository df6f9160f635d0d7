#include "lumisplat/depth/kdtree.h"

#include <algorithm>
#include <numeric>
#include <queue>

namespace lumisplat {

namespace {

constexpr int kLeafSize = 8;

struct Candidate {
  double d2;
  int index;
  bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && index < o.index); }
};

}  // namespace

KdTree::KdTree(Vec3List points) : points_(std::move(points)) {
  for (const auto& p : points_) {
    LS_CHECK(p.allFinite(), NumericError, "non-finite point");
  }
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) build(0, static_cast<int>(points_.size()));
}

int KdTree::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (int i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all points coincide

  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
    const double pa = points_[a][axis];
    const double pb = points_[b][axis];
    return pa < pb || (pa == pb && a < b);
  });
  const double split = points_[order_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  Node& n = nodes_[id];
  n.axis = axis;
  n.split = split;
  n.left = left;
  n.right = right;
  return id;
}

int KdTree::nearest(const Vec3& query) const {
  const auto r = kNearest(query, 1);
  return r.empty() ? -1 : r.front();
}

std::vector<int> KdTree::kNearest(const Vec3& query, std::size_t k) const {
  std::vector<int> out;
  if (points_.empty() || k == 0) return out;
  std::priority_queue<Candidate> heap;  // max-heap of the current best k

  auto visit = [&](auto&& self, int nodeId) -> void {
    const Node& n = nodes_[nodeId];
    if (n.axis < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const int idx = order_[i];
        const Candidate c{(points_[idx] - query).squaredNorm(), idx};
        if (heap.size() < k) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    const double diff = query[n.axis] - n.split;
    const int nearChild = diff < 0 ? n.left : n.right;
    const int farChild = diff < 0 ? n.right : n.left;
    self(self, nearChild);
    // Points equal to the split may sit on either side, so ties must also descend.
    if (heap.size() < k || diff * diff <= heap.top().d2) self(self, farChild);
  };
  visit(visit, 0);

  out.resize(heap.size());
  for (std::size_t i = heap.size(); i-- > 0;) {
    out[i] = heap.top().index;
    heap.pop();
  }
  return out;
}

}  // namespace lumisplat
