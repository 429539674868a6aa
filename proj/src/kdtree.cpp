// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#include "rns/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace rns {

namespace {
constexpr std::uint32_t kLeafSize = 12;
}

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  Node node;
  node.begin = begin;
  node.end = end;
  node.lo = lo;
  node.hi = hi;
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) return id;

  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis] || (points_[a][axis] == points_[b][axis] && a < b);
                   });
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::radius_search(const Vec3& centre, double radius, std::vector<std::uint32_t>& out) const {
  out.clear();
  if (nodes_.empty() || !(radius >= 0.0)) return;
  const double r2 = radius * radius;
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    // Squared distance from the centre to the node box.
    const Vec3 d = (node.lo - centre).cwiseMax(centre - node.hi).cwiseMax(0.0);
    if (d.squaredNorm() > r2) continue;
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        if ((points_[idx] - centre).squaredNorm() <= r2) out.push_back(idx);
      }
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  std::sort(out.begin(), out.end());
}

std::vector<std::uint32_t> KdTree::radius_search(const Vec3& centre, double radius) const {
  std::vector<std::uint32_t> out;
  radius_search(centre, radius, out);
  return out;
}

}  // namespace rns
