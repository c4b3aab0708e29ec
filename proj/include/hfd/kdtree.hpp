#pragma once

#include "hfd/types.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace hfd {

/// Static k-d tree over a point set. Neighbour queries order results by (distance, index), so
/// equidistant points come back in ascending index order.
class KdTree {
 public:
  struct Neighbor {
    double dist2;
    Index index;
    friend bool operator<(const Neighbor& a, const Neighbor& b) {
      return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
    }
  };

  KdTree() = default;
  KdTree(std::span<const Vec> points, int dim);

  std::size_t size() const { return points_.size(); }
  int dim() const { return dim_; }
  const Vec& point(Index i) const { return points_[static_cast<std::size_t>(i)]; }

  /// The k nearest points to x, sorted. Throws if k exceeds the point count.
  std::vector<Neighbor> knn(const Vec& x, int k) const;
  Neighbor nearest(const Vec& x) const;
  /// Nearest point with |p - x| <= radius, if any. Cheap for small radii.
  std::optional<Neighbor> nearest_within(const Vec& x, double radius) const;
  /// All points with |p - x| <= radius, sorted.
  std::vector<Neighbor> radius_search(const Vec& x, double radius) const;

 private:
  struct Node {
    Index begin;
    Index end;
    Index left = -1;
    Index right = -1;
    int axis = 0;
    double split = 0.0;
  };

  Index build(Index begin, Index end);
  template <class Visitor>
  void descend(Index node, const Vec& x, Visitor& visit) const;
  double dist2(const Vec& a, const Vec& b) const;

  int dim_ = 2;
  std::vector<Vec> points_;
  std::vector<Index> order_;
  std::vector<Vec> leaf_points_;  ///< points_ permuted by order_
  std::vector<Node> nodes_;
};

}  // namespace hfd
