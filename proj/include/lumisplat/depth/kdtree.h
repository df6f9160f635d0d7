#pragma once

#include "lumisplat/common.h"

#include <vector>

namespace lumisplat {

/// Static 3-d tree over a point set. Queries are exact; equal distances are
/// ordered by point index so results never depend on build order.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(Vec3List points);

  std::size_t size() const { return points_.size(); }
  const Vec3List& points() const { return points_; }

  /// Index of the nearest point, or -1 when empty.
  int nearest(const Vec3& query) const;
  /// Up to k indices sorted by (distance, index).
  std::vector<int> kNearest(const Vec3& query, std::size_t k) const;

 private:
  struct Node {
    int begin = 0;
    int end = 0;  // leaf range into order_ when axis < 0
    int axis = -1;
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  int build(int begin, int end);

  Vec3List points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace lumisplat
