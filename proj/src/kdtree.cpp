#include "hfd/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace hfd {

namespace {
constexpr Index kLeafSize = 12;
}

KdTree::KdTree(std::span<const Vec> points, int dim) : dim_(dim), points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), Index{0});
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  if (!points_.empty()) build(0, static_cast<Index>(points_.size()));
  leaf_points_.reserve(points_.size());
  for (Index i : order_) leaf_points_.push_back(points_[static_cast<std::size_t>(i)]);
}

Index KdTree::build(Index begin, Index end) {
  const Index id = static_cast<Index>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec lo = Vec::Constant(kInf);
  Vec hi = Vec::Constant(-kInf);
  for (Index i = begin; i < end; ++i) {
    const Vec& p = points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  int axis = 0;
  for (int a = 1; a < dim_; ++a) {
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
  }
  const Index mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](Index a, Index b) {
    return points_[static_cast<std::size_t>(a)][axis] < points_[static_cast<std::size_t>(b)][axis];
  });
  const double split = points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(mid)])][axis];
  const Index left = build(begin, mid);
  const Index right = build(mid, end);
  Node& node = nodes_[static_cast<std::size_t>(id)];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

double KdTree::dist2(const Vec& a, const Vec& b) const {
  double s = 0.0;
  for (int k = 0; k < dim_; ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

template <class Visitor>
void KdTree::descend(Index id, const Vec& x, Visitor& visit) const {
  const Node& node = nodes_[static_cast<std::size_t>(id)];
  if (node.left < 0) {
    for (Index i = node.begin; i < node.end; ++i) {
      const auto u = static_cast<std::size_t>(i);
      visit.offer(dist2(leaf_points_[u], x), order_[u]);
    }
    return;
  }
  // Points equal to the split value may sit on either side, so both sides use an inclusive bound.
  const double diff = x[node.axis] - node.split;
  const Index near = diff < 0.0 ? node.left : node.right;
  const Index far = diff < 0.0 ? node.right : node.left;
  descend(near, x, visit);
  if (diff * diff <= visit.bound()) descend(far, x, visit);
}

std::vector<KdTree::Neighbor> KdTree::knn(const Vec& x, int k) const {
  if (k < 0 || static_cast<std::size_t>(k) > points_.size())
    throw std::invalid_argument("knn: requested " + std::to_string(k) + " neighbours from " +
                                std::to_string(points_.size()) + " points");
  // Sorted buffer of the best k so far; k is a stencil size, so insertion beats a heap.
  struct Collector {
    std::size_t k;
    std::vector<Neighbor> best;
    double bound() const { return best.size() < k ? kInf : best.back().dist2; }
    void offer(double d2, Index i) {
      const Neighbor n{d2, i};
      if (best.size() == k) {
        if (!(n < best.back())) return;
        best.pop_back();
      }
      best.insert(std::upper_bound(best.begin(), best.end(), n), n);
    }
  } collector{static_cast<std::size_t>(k), {}};
  collector.best.reserve(static_cast<std::size_t>(k) + 1);
  if (k > 0) descend(0, x, collector);
  return std::move(collector.best);
}

KdTree::Neighbor KdTree::nearest(const Vec& x) const {
  if (points_.empty()) throw std::invalid_argument("nearest: empty tree");
  struct Collector {
    Neighbor best{kInf, -1};
    double bound() const { return best.dist2; }
    void offer(double d2, Index i) {
      const Neighbor n{d2, i};
      if (best.index < 0 || n < best) best = n;
    }
  } collector;
  descend(0, x, collector);
  return collector.best;
}

std::optional<KdTree::Neighbor> KdTree::nearest_within(const Vec& x, double radius) const {
  struct Collector {
    Neighbor best;
    double bound() const { return best.dist2; }
    void offer(double d2, Index i) {
      const Neighbor n{d2, i};
      if (n.dist2 <= best.dist2 && (best.index < 0 || n < best)) best = n;
    }
  } collector{{radius * radius, -1}};
  if (!points_.empty()) descend(0, x, collector);
  if (collector.best.index < 0) return std::nullopt;
  return collector.best;
}

std::vector<KdTree::Neighbor> KdTree::radius_search(const Vec& x, double radius) const {
  struct Collector {
    double r2;
    std::vector<Neighbor> found;
    double bound() const { return r2; }
    void offer(double d2, Index i) {
      if (d2 <= r2) found.push_back({d2, i});
    }
  } collector{radius * radius, {}};
  if (!points_.empty()) descend(0, x, collector);
  std::sort(collector.found.begin(), collector.found.end());
  return collector.found;
}

}  // namespace hfd
