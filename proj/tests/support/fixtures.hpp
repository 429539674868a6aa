// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

// Small shared scenes for environment-level tests.

#pragma once

#include <memory>

#include "rns/env.hpp"

namespace fixture {

// 8 trees on 40 x 40 m with a coarse occlusion field; built once.
inline std::shared_ptr<const rns::SceneModel> small_forest() {
  static const auto scene = [] {
    rns::ForestParams p;
    p.seed = 11;
    p.n_trees = 8;
    p.area_min = {-20.0, -20.0};
    p.area_max = {20.0, 20.0};
    return std::make_shared<const rns::SceneModel>(rns::gen_forest(p));
  }();
  return scene;
}

inline std::shared_ptr<const rns::OcclusionField> small_field() {
  static const auto field = [] {
    rns::FieldBuildOptions o;
    o.face_resolution = 16;
    return std::make_shared<const rns::OcclusionField>(
        rns::build_occlusion_field(*small_forest(), rns::grid_for_scene(*small_forest(), 4.0), o));
  }();
  return field;
}

inline std::shared_ptr<const rns::EnvAssets> small_assets(const rns::EnvConfig& cfg = {}) {
  return rns::make_assets(small_forest(), small_field(), cfg, rns::default_sky_light());
}

// Same extent with no obstacles at flight height: only the ground sheet.
inline std::shared_ptr<const rns::EnvAssets> open_assets(const rns::EnvConfig& cfg = {}) {
  static const auto scene = [] {
    rns::ForestParams p;
    p.n_trees = 0;
    p.area_min = {-20.0, -20.0};
    p.area_max = {20.0, 20.0};
    return std::make_shared<const rns::SceneModel>(rns::gen_forest(p));
  }();
  static const auto field = [] {
    rns::FieldBuildOptions o;
    o.face_resolution = 16;
    return std::make_shared<const rns::OcclusionField>(
        rns::build_occlusion_field(*scene, rns::grid_for_scene(*scene, 8.0), o));
  }();
  return rns::make_assets(scene, field, cfg, rns::default_sky_light());
}

}  // namespace fixture
