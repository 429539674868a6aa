// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#include "rns/world.hpp"

#include <cmath>
#include <deque>

namespace rns {

void CollisionSpec::validate() const {
  for (double x : {r_col, h_tol, delta_safe, r_safe, r_goal}) {
    if (!(x > 0.0) || !std::isfinite(x)) throw InputError("collision parameters must be finite and > 0");
  }
}

CollisionResult check_collision(const SpatialIndex& index, const Vec3& p, const CollisionSpec& spec) {
  CollisionResult out;
  const double reach = std::max(spec.search_radius(), spec.r_col);
  thread_local std::vector<std::uint32_t> hits;
  index.query_radius(p, std::hypot(reach, spec.h_tol), hits);
  for (std::uint32_t i : hits) {
    const Vec3& q = index.point(i);
    if (std::abs(p.z() - q.z()) > spec.h_tol) continue;
    const double dh = std::hypot(p.x() - q.x(), p.y() - q.y());
    if (dh <= spec.r_col) out.collided = true;
    if (dh <= reach) out.d_obs = std::min(out.d_obs, dh);
  }
  return out;
}

bool is_clear(const SpatialIndex& index, const Vec3& p, double radius, double h_tol) {
  thread_local std::vector<std::uint32_t> hits;
  index.query_radius(p, std::hypot(radius, h_tol), hits);
  for (std::uint32_t i : hits) {
    const Vec3& q = index.point(i);
    if (std::abs(p.z() - q.z()) <= h_tol && std::hypot(p.x() - q.x(), p.y() - q.y()) <= radius) return false;
  }
  return true;
}

OccupancyGrid::OccupancyGrid(const SpatialIndex& index, const Aabb& bounds, const CollisionSpec& spec,
                             const SamplerOptions& opts)
    : origin_(bounds.min.x(), bounds.min.y(), opts.z), cell_(opts.cell) {
  if (!(cell_ > 0.0)) throw InputError("occupancy cell must be > 0");
  nx_ = std::max(1, static_cast<int>(std::ceil((bounds.max.x() - bounds.min.x()) / cell_)));
  ny_ = std::max(1, static_cast<int>(std::ceil((bounds.max.y() - bounds.min.y()) / cell_)));
  blocked_.assign(static_cast<std::size_t>(nx_) * ny_, 0);
  const double inflate = spec.r_col + 0.5 * cell_;
  for (int iy = 0; iy < ny_; ++iy) {
    for (int ix = 0; ix < nx_; ++ix) {
      const Vec3 c = origin_ + Vec3((ix + 0.5) * cell_, (iy + 0.5) * cell_, 0.0);
      blocked_[static_cast<std::size_t>(iy) * nx_ + ix] = is_clear(index, c, inflate, spec.h_tol) ? 0 : 1;
    }
  }
}

bool OccupancyGrid::cell_of(const Vec3& p, int& ix, int& iy) const {
  ix = static_cast<int>(std::floor((p.x() - origin_.x()) / cell_));
  iy = static_cast<int>(std::floor((p.y() - origin_.y()) / cell_));
  return ix >= 0 && iy >= 0 && ix < nx_ && iy < ny_;
}

bool OccupancyGrid::connected(const Vec3& a, const Vec3& b) const {
  int ax, ay, bx, by;
  if (!cell_of(a, ax, ay) || !cell_of(b, bx, by)) return false;
  if (blocked(ax, ay) || blocked(bx, by)) return false;
  std::vector<std::uint8_t> seen(blocked_.size(), 0);
  std::deque<std::pair<int, int>> queue{{ax, ay}};
  seen[static_cast<std::size_t>(ay) * nx_ + ax] = 1;
  constexpr int kSteps[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    if (x == bx && y == by) return true;
    for (const auto& s : kSteps) {
      const int nx = x + s[0], ny = y + s[1];
      if (nx < 0 || ny < 0 || nx >= nx_ || ny >= ny_) continue;
      const std::size_t k = static_cast<std::size_t>(ny) * nx_ + nx;
      if (seen[k] || blocked_[k]) continue;
      seen[k] = 1;
      queue.emplace_back(nx, ny);
    }
  }
  return false;
}

World::World(const SceneModel& scene, const CollisionSpec& spec, const SamplerOptions& opts, double alpha_min)
    : spec_(spec),
      opts_(opts),
      bounds_(scene.bounds),
      index_(extract_point_cloud(scene, alpha_min)),
      grid_(index_, scene.bounds, spec, opts) {
  spec_.validate();
  if (opts_.max_attempts < 1) throw InputError("max_attempts must be >= 1");
}

StartGoal World::sample_start_goal(std::mt19937_64& rng) const {
  const double lo_x = bounds_.min.x() + opts_.border, hi_x = bounds_.max.x() - opts_.border;
  const double lo_y = bounds_.min.y() + opts_.border, hi_y = bounds_.max.y() - opts_.border;
  if (!(lo_x < hi_x && lo_y < hi_y)) throw SceneTooDense("scene area too small for start/goal sampling");
  std::uniform_real_distribution<double> ux(lo_x, hi_x), uy(lo_y, hi_y);
  const double margin = spec_.r_col + spec_.delta_safe;
  for (int attempt = 0; attempt < opts_.max_attempts; ++attempt) {
    const Vec3 a(ux(rng), uy(rng), opts_.z);
    const Vec3 b(ux(rng), uy(rng), opts_.z);
    if ((b - a).norm() < opts_.min_distance) continue;
    if (!is_clear(index_, a, margin, spec_.h_tol) || !is_clear(index_, b, margin, spec_.h_tol)) continue;
    if (!grid_.connected(a, b)) continue;
    return {a, b, std::atan2(b.y() - a.y(), b.x() - a.x())};
  }
  throw SceneTooDense("no valid start/goal pair after " + std::to_string(opts_.max_attempts) + " attempts");
}

}  // namespace rns
