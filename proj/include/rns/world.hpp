// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

// Collision geometry: a KD-tree over the scene point cloud, the cylinder
// collision test, nearest-obstacle distance and start/goal sampling.

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <vector>

#include "rns/kdtree.hpp"
#include "rns/scene.hpp"

namespace rns {

struct CollisionSpec {
  double r_col = 0.3;       // cylinder radius (m)
  double h_tol = 0.2;       // half height (m)
  double delta_safe = 0.2;  // query margin (m)
  double r_safe = 2.0;      // obstacle reward range (m)
  double r_goal = 2.0;      // arrival radius (m)

  double search_radius() const { return std::max(r_safe, r_col + delta_safe); }
  void validate() const;
};

class SpatialIndex {
 public:
  SpatialIndex() = default;
  explicit SpatialIndex(std::vector<Vec3> points) : tree_(std::move(points)) {}

  std::size_t size() const { return tree_.size(); }
  const Vec3& point(std::uint32_t i) const { return tree_.point(i); }
  // Indices with ||p - centre|| <= r, ascending.
  std::vector<std::uint32_t> query_radius(const Vec3& centre, double r) const { return tree_.radius_search(centre, r); }
  void query_radius(const Vec3& centre, double r, std::vector<std::uint32_t>& out) const {
    tree_.radius_search(centre, r, out);
  }

 private:
  KdTree tree_;
};

struct CollisionResult {
  bool collided = false;
  // Horizontal distance to the nearest height-gated point within
  // spec.search_radius(), +inf when there is none.
  double d_obs = std::numeric_limits<double>::infinity();
};

// Collided iff some point has horizontal distance <= r_col and vertical
// distance <= h_tol.
CollisionResult check_collision(const SpatialIndex& index, const Vec3& p, const CollisionSpec& spec);

// True when no height-gated point lies within `radius` horizontally.
bool is_clear(const SpatialIndex& index, const Vec3& p, double radius, double h_tol);

struct SamplerOptions {
  double min_distance = 30.0;  // m
  double z = 1.5;              // flight altitude
  double cell = 0.5;           // occupancy cell (m)
  double border = 1.0;         // keep samples this far inside the scene bounds
  int max_attempts = 1000;
};

struct StartGoal {
  Vec3 start;
  Vec3 goal;
  double yaw = 0.0;  // heading from start towards goal
};

// 2D occupancy at flight altitude: a cell is blocked when a height-gated
// point lies within r_col + cell/2 of its centre.
class OccupancyGrid {
 public:
  OccupancyGrid(const SpatialIndex& index, const Aabb& bounds, const CollisionSpec& spec, const SamplerOptions& opts);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  bool blocked(int ix, int iy) const { return blocked_[static_cast<std::size_t>(iy) * nx_ + ix]; }
  bool cell_of(const Vec3& p, int& ix, int& iy) const;
  // 4-connected breadth-first search between the cells holding a and b.
  bool connected(const Vec3& a, const Vec3& b) const;

 private:
  Vec3 origin_;
  double cell_ = 0.5;
  int nx_ = 0, ny_ = 0;
  std::vector<std::uint8_t> blocked_;
};

// Scene geometry shared read-only by environment instances.
class World {
 public:
  World(const SceneModel& scene, const CollisionSpec& spec, const SamplerOptions& opts = {}, double alpha_min = 0.3);

  const SpatialIndex& index() const { return index_; }
  const CollisionSpec& spec() const { return spec_; }
  const SamplerOptions& sampler() const { return opts_; }
  const Aabb& bounds() const { return bounds_; }
  const OccupancyGrid& occupancy() const { return grid_; }

  CollisionResult check(const Vec3& p) const { return check_collision(index_, p, spec_); }
  // Rejection sampling; throws SceneTooDense after opts.max_attempts.
  StartGoal sample_start_goal(std::mt19937_64& rng) const;

 private:
  CollisionSpec spec_;
  SamplerOptions opts_;
  Aabb bounds_;
  SpatialIndex index_;
  OccupancyGrid grid_;
};

}  // namespace rns
