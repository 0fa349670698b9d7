#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace solidtex {

/// (squared distance, candidate id) ordered lexicographically so that equal
/// distances resolve to the lowest id.
struct Neighbor {
  double distance = std::numeric_limits<double>::infinity();
  std::uint32_t id = std::numeric_limits<std::uint32_t>::max();

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
  }
};

/// Bounded best-k list, kept sorted.
class NeighborList {
public:
  explicit NeighborList(std::size_t k = 1) : k_(k) { items_.reserve(k + 1); }

  void reset(std::size_t k) {
    k_ = k;
    items_.clear();
  }

  bool full() const noexcept { return items_.size() >= k_; }

  double worst() const noexcept {
    return full() ? items_.back().distance : std::numeric_limits<double>::infinity();
  }

  void offer(Neighbor n) {
    if (full() && !(n < items_.back()))
      return;
    auto it = std::upper_bound(items_.begin(), items_.end(), n);
    items_.insert(it, n);
    if (items_.size() > k_)
      items_.pop_back();
  }

  std::span<const Neighbor> items() const noexcept { return items_; }

private:
  std::size_t k_;
  std::vector<Neighbor> items_;
};

/// Exact k-nearest-neighbor search over fixed-dimension float points.
/// Distances accumulate in double; ties go to the lowest point id.
class KdTree {
public:
  KdTree() = default;

  KdTree(std::span<const float> points, int dim, int leaf_size = 12) : dim_(dim) {
    const std::size_t n = dim > 0 ? points.size() / dim : 0;
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    nodes_.reserve(2 * n / std::max(leaf_size, 1) + 2);
    build(points, order, 0, n, leaf_size);
    // Leaf-contiguous copy for cache locality.
    ids_ = std::move(order);
    points_.resize(n * dim);
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(points.begin() + static_cast<std::ptrdiff_t>(ids_[i]) * dim, dim,
                  points_.begin() + static_cast<std::ptrdiff_t>(i) * dim);
  }

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }

  /// With `eps` > 0 a cell is skipped unless it could hold a point closer than
  /// the current k-th distance divided by (1 + eps), the usual approximate
  /// nearest-neighbor relaxation. eps = 0 is exact.
  void knn(std::span<const float> query, NeighborList& out, double eps = 0.0) const {
    if (nodes_.empty())
      return;
    // Per-dimension offset from the query to the current cell; the sum of
    // their squares lower-bounds the distance to anything inside the cell.
    double offsets[kMaxStackDims];
    std::vector<double> heap_offsets;
    double* off = offsets;
    if (dim_ > kMaxStackDims) {
      heap_offsets.resize(dim_);
      off = heap_offsets.data();
    }
    std::fill_n(off, dim_, 0.0);
    const Traversal t{query, (1.0 + eps) * (1.0 + eps), off};
    search(0, t, 0.0, out);
  }

private:
  static constexpr int kMaxStackDims = 64;

  struct Node {
    std::uint32_t begin, end;   // range in ids_ (leaves)
    std::int32_t left = -1, right = -1;
    std::int32_t split_dim = -1;
    float split = 0.0f;
  };

  std::int32_t build(std::span<const float> pts, std::vector<std::uint32_t>& order,
                     std::size_t begin, std::size_t end, int leaf_size) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({static_cast<std::uint32_t>(begin), static_cast<std::uint32_t>(end)});
    if (end - begin <= static_cast<std::size_t>(leaf_size))
      return id;

    int best_dim = 0;
    float best_spread = -1.0f;
    for (int d = 0; d < dim_; ++d) {
      float lo = std::numeric_limits<float>::max(), hi = std::numeric_limits<float>::lowest();
      for (std::size_t i = begin; i < end; ++i) {
        const float v = pts[static_cast<std::size_t>(order[i]) * dim_ + d];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        best_dim = d;
      }
    }
    if (best_spread <= 0.0f)
      return id; // all points identical: keep as a leaf

    const std::size_t mid = begin + (end - begin) / 2;
    auto key = [&](std::uint32_t i) { return pts[static_cast<std::size_t>(i) * dim_ + best_dim]; };
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return key(a) < key(b) || (key(a) == key(b) && a < b);
                     });
    const float split = key(order[mid]);
    const auto left = build(pts, order, begin, mid, leaf_size);
    const auto right = build(pts, order, mid, end, leaf_size);
    auto& node = nodes_[id];
    node.left = left;
    node.right = right;
    node.split_dim = best_dim;
    node.split = split;
    return id;
  }

  double distance(std::span<const float> q, std::uint32_t slot) const {
    const float* p = points_.data() + static_cast<std::size_t>(slot) * dim_;
    double d = 0.0;
    for (int k = 0; k < dim_; ++k) {
      const double diff = static_cast<double>(q[k]) - p[k];
      d += diff * diff;
    }
    return d;
  }

  struct Traversal {
    std::span<const float> q;
    double shrink;  ///< (1 + eps)^2
    double* off;
  };

  void search(std::int32_t node_id, const Traversal& t, double cell_dist, NeighborList& out) const {
    const Node& node = nodes_[node_id];
    if (node.split_dim < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const double d = distance(t.q, i);
        if (d <= out.worst())
          out.offer({d, ids_[i]});
      }
      return;
    }
    const double diff = static_cast<double>(t.q[node.split_dim]) - node.split;
    const auto near = diff < 0.0 ? node.left : node.right;
    const auto far = diff < 0.0 ? node.right : node.left;
    search(near, t, cell_dist, out);
    double& off = t.off[node.split_dim];
    const double saved = off;
    const double far_dist = cell_dist - saved * saved + diff * diff;
    // The running bound can pick up rounding; the slack keeps exact ties reachable.
    if (far_dist * t.shrink <= out.worst() * (1.0 + 1e-9)) {
      off = diff;
      search(far, t, far_dist, out);
      off = saved;
    }
  }

  int dim_ = 0;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> ids_; ///< point id per leaf slot
  std::vector<float> points_;
};

} // namespace solidtex
