#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "tabletrec/vec.hpp"

namespace tabletrec {

// Static 3D KD-tree over points; k-nearest queries return indices ordered by
// (distance, index) so ties are deterministic.
class KdTree3 {
 public:
  explicit KdTree3(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!order_.empty()) build(0, int(order_.size()), 0);
  }

  // k nearest neighbors of `query`, excluding `exclude` (pass -1 to keep all).
  std::vector<int> knn(const Vec3& query, int k, int exclude = -1) const {
    Heap heap;
    heap.reserve(size_t(k) + 1);
    if (!order_.empty()) search(0, int(order_.size()), 0, query, k, exclude, heap);
    std::sort(heap.begin(), heap.end());
    std::vector<int> out;
    out.reserve(heap.size());
    for (const auto& [d2, idx] : heap) out.push_back(idx);
    return out;
  }

  size_t size() const { return points_.size(); }
  const Vec3& point(int i) const { return points_[i]; }

 private:
  using Heap = std::vector<std::pair<double, int>>;  // (squared distance, index)

  void build(int lo, int hi, int depth) {
    if (hi - lo <= 1) return;
    const int axis = depth % 3;
    const int mid = (lo + hi) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](int a, int b) {
                       const double pa = points_[a][axis], pb = points_[b][axis];
                       return pa < pb || (pa == pb && a < b);
                     });
    build(lo, mid, depth + 1);
    build(mid + 1, hi, depth + 1);
  }

  void search(int lo, int hi, int depth, const Vec3& query, int k, int exclude,
              Heap& heap) const {
    if (lo >= hi) return;
    const int mid = (lo + hi) / 2;
    const int idx = order_[mid];
    if (idx != exclude) {
      const double d2 = norm2(points_[idx] - query);
      heap.emplace_back(d2, idx);
      std::push_heap(heap.begin(), heap.end());
      if (int(heap.size()) > k) {
        std::pop_heap(heap.begin(), heap.end());
        heap.pop_back();
      }
    }
    const int axis = depth % 3;
    const double delta = query[axis] - points_[idx][axis];
    const int near_lo = delta < 0 ? lo : mid + 1;
    const int near_hi = delta < 0 ? mid : hi;
    const int far_lo = delta < 0 ? mid + 1 : lo;
    const int far_hi = delta < 0 ? hi : mid;
    search(near_lo, near_hi, depth + 1, query, k, exclude, heap);
    if (int(heap.size()) < k || delta * delta <= heap.front().first)
      search(far_lo, far_hi, depth + 1, query, k, exclude, heap);
  }

  std::vector<Vec3> points_;
  std::vector<int> order_;
};

}  // namespace tabletrec
