// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rns/common.hpp"

namespace rns {

// Balanced 3D KD-tree over a fixed point set. Built once, read-only after,
// safe for concurrent queries.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::vector<Vec3> points);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Vec3& point(std::uint32_t i) const { return points_[i]; }
  const std::vector<Vec3>& points() const { return points_; }

  // Indices of all points with |p - centre| <= radius, ascending. Exact.
  std::vector<std::uint32_t> radius_search(const Vec3& centre, double radius) const;
  void radius_search(const Vec3& centre, double radius, std::vector<std::uint32_t>& out) const;

 private:
  struct Node {
    std::uint32_t begin, end;  // range in order_
    std::int32_t left = -1, right = -1;
    int axis = -1;  // -1 for leaves
    Vec3 lo, hi;  // bounding box of the range
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace rns
