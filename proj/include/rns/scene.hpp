// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rns/common.hpp"
#include "rns/sh.hpp"

namespace rns {

// One anisotropic splat. Numeric fields are single precision, matching the
// on-disk representation, so a save/load round trip is bit-exact.
struct Gaussian {
  Vec3f mean = Vec3f::Zero();
  Eigen::Quaternionf rotation = Eigen::Quaternionf::Identity();
  Vec3f scale = Vec3f::Constant(0.1f);
  float opacity = 1.0f;
  Vec3f albedo = Vec3f::Constant(0.5f);
  // Transfer coefficients d, one channel, (l+1)^2 entries.
  std::vector<float> transfer;
  // View-independent radiance for baked rendering, 3 x (l+1)^2 entries
  // channel-major, or empty.
  std::vector<float> baked;

  // Sigma = R S S^T R^T.
  Mat3 covariance() const;
  // Rotation-frame axis with the smallest scale, flipped into the upper
  // hemisphere (z >= 0).
  Vec3 normal() const;

  sh::ShCoeffs transfer_sh(int degree) const;
  sh::ShCoeffs baked_sh(int degree) const;
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
};

struct SceneModel {
  std::vector<Gaussian> gaussians;
  int degree = sh::kDefaultDegree;
  Aabb bounds;
  double ground_z = 0.0;
  std::string name;
  std::uint64_t seed = 0;
  int version = 1;

  bool has_baked() const;

  // Throws InputError naming the first offending Gaussian. Emptiness is only
  // rejected when `require_nonempty` is set (files must hold at least one).
  void validate(bool require_nonempty = true) const;
};

inline constexpr int kSceneFormatVersion = 1;

// Scene file: one line of JSON header terminated by '\n', then little-endian
// float32 arrays in this order: mean (N x 3), rotation (N x 4, w x y z),
// scale (N x 3), opacity (N), albedo (N x 3), transfer (N x K) and, when the
// header says has_baked, baked (N x 3K), with K = (degree+1)^2.
void save_scene(const SceneModel& scene, const std::filesystem::path& path);
SceneModel load_scene(const std::filesystem::path& path);
std::string encode_scene(const SceneModel& scene);
SceneModel decode_scene(const std::string& bytes);

enum class TransferInit { kCosineLobe, kUnitDc };

// Transfer coefficients for a Gaussian with the given normal.
std::vector<float> make_transfer(int degree, const Vec3& normal, TransferInit init);

struct ForestParams {
  std::uint64_t seed = 1;
  Eigen::Vector2d area_min{-30.0, -30.0};
  Eigen::Vector2d area_max{30.0, 30.0};
  int n_trees = 50;
  int degree = sh::kDefaultDegree;
  double ground_z = 0.0;
  double border_margin = 0.5;
  double min_tree_spacing = 2.5;

  double trunk_height_min = 5.0;
  double trunk_height_max = 9.0;
  double trunk_radius_min = 0.12;
  double trunk_radius_max = 0.28;
  // Vertical spacing of trunk segments; must not exceed twice the collision
  // height tolerance or a trunk can slip through the height gate.
  double trunk_segment = 0.35;

  double canopy_radius_min = 1.2;
  double canopy_radius_max = 2.0;
  int canopy_gaussians = 110;
  double canopy_blob_min = 0.22;
  double canopy_blob_max = 0.42;
  // Fraction of canopy Gaussians that are near-transparent filler.
  double canopy_filler_fraction = 0.1;

  double ground_spacing = 1.0;

  TransferInit transfer_init = TransferInit::kCosineLobe;
};

struct Palette {
  Vec3 trunk{0.36, 0.26, 0.18};
  Vec3 canopy{0.20, 0.38, 0.14};
  Vec3 ground{0.34, 0.30, 0.20};
  double jitter = 0.06;
};

// Procedural stand-in for a reconstructed forest: stacked vertical trunk
// splats, clustered leaf splats and a flat ground sheet. Pure function of
// its arguments.
SceneModel gen_forest(const ForestParams& params, const Palette& palette = {});

// Gaussian centres, in scene order, dropping splats with opacity < alpha_min.
std::vector<Vec3> extract_point_cloud(const SceneModel& scene, double alpha_min = 0.3);

// Rigid yaw of the whole scene about `pivot` (positions, frames and the SH
// payloads). Bounds are recomputed from the rotated centres.
SceneModel rotate_scene_z(const SceneModel& scene, double angle, const Vec3& pivot);

}  // namespace rns
