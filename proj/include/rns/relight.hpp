// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

// Relightable shading.
//
// Each Gaussian's colour is
//
//   c_i = rho_i (.) sum_m L^m O_i^m d_i^m
//
// with L the global environment light (3 channels), O_i the occlusion
// coefficients interpolated from a probe grid at the Gaussian centre and d_i
// the per-Gaussian transfer coefficients. The three factors carry
// independent gains (ShadingScales) because nothing fixes their relative
// normalisation.

#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rns/image_io.hpp"
#include "rns/kdtree.hpp"
#include "rns/render.hpp"
#include "rns/scene.hpp"
#include "rns/sh.hpp"

namespace rns {

struct EnvLight {
  sh::ShCoeffs coeffs{sh::kDefaultDegree, 3};
  std::string name;

  int degree() const { return coeffs.degree(); }
};

// Procedural clear sky (gradient, sun lobe, ground bounce) projected to SH.
EnvLight default_sky_light(int degree = sh::kDefaultDegree);

// Uniform radiance in every direction.
EnvLight constant_light(int degree, const Vec3& radiance);

struct LightEdit {
  double rotation = 0.0;  // radians about +z
  double intensity = 1.0;
  Vec3 tint = Vec3::Ones();

  bool is_identity() const { return rotation == 0.0 && intensity == 1.0 && tint == Vec3::Ones(); }
};

// tint (.) intensity * rotate_z(L, rotation), applied in that order.
EnvLight edit_light(const EnvLight& light, const LightEdit& edit);

struct NamedEdit {
  std::string name;
  LightEdit edit;
};
// original, overcast, dusk, morning.
std::array<NamedEdit, 4> light_presets();

// Equirectangular panorama (width = 2 height, top row = +z, column 0 at
// azimuth 0 increasing towards +y) to SH, each texel weighted by its exact
// solid angle.
EnvLight panorama_to_sh(const FloatImage& panorama, int degree);

// Light spec file: {"rotation_deg", "intensity", "tint": [r,g,b]} edits
// applied to `base`, or {"panorama": path} (relative to the spec file)
// optionally combined with the same edit keys.
EnvLight load_light_spec(const std::filesystem::path& path, const EnvLight& base);
LightEdit parse_light_edit(const std::string& json_text);

struct VisibilityMaps {
  int resolution = 0;
  std::array<std::vector<std::uint8_t>, kCubeFaces> visible;
};

// 1 where depth >= d_thresh (+inf included), 0 otherwise.
VisibilityMaps probe_visibility(const CubeFaces& faces, double d_thresh);

// B^lm = sum over faces and texels of V Y_lm(w) dOmega.
sh::ShCoeffs project_visibility_sh(const VisibilityMaps& maps, int degree);

struct GridSpec {
  Vec3 origin = Vec3::Zero();  // position of node (0,0,0)
  double cell = 1.0;
  std::array<int, 3> dims{2, 2, 2};
  double yaw = 0.0;  // grid axes rotated about +z around `origin`

  std::size_t node_count() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
  Vec3 node_position(int ix, int iy, int iz) const;
  Vec3 centre() const;
  void validate() const;
};

// Axis-aligned grid of voxel-centre probes covering the scene bounds above
// the ground.
GridSpec grid_for_scene(const SceneModel& scene, double cell);

inline constexpr double kDefaultDepthThreshold = 0.3;
inline constexpr int kDefaultProbeResolution = 32;

struct OcclusionField {
  GridSpec grid;
  int degree = sh::kDefaultDegree;
  double d_thresh = kDefaultDepthThreshold;
  int face_resolution = kDefaultProbeResolution;
  // Node-major, (degree+1)^2 floats per node; node (ix,iy,iz) sits at
  // ix + nx * (iy + ny * iz).
  std::vector<float> coeffs;

  std::size_t node_index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) + grid.dims[0] * (static_cast<std::size_t>(iy) + grid.dims[1] * iz);
  }
  sh::ShCoeffs node(int ix, int iy, int iz) const;
  void set_node(int ix, int iy, int iz, const sh::ShCoeffs& b);
  void validate() const;

  // The same field yawed by `angle` about the vertical line through `pivot`:
  // node positions move and each node's coefficients rotate with them.
  OcclusionField rotated_z(double angle, const Vec3& pivot) const;
};

struct FieldBuildOptions {
  double d_thresh = kDefaultDepthThreshold;
  int face_resolution = kDefaultProbeResolution;
  int degree = sh::kDefaultDegree;
  unsigned threads = 0;  // 0: hardware concurrency
  ProbeMethod method = ProbeMethod::kRay;
};

// Probe rendering options used for every node: the far clip equals
// d_thresh (anything deeper cannot occlude) and only Gaussians within
// probe_cull_radius of the node are considered.
ProbeRenderOptions field_probe_options(const FieldBuildOptions& opts);
double probe_cull_radius(const SceneModel& scene, const FieldBuildOptions& opts);

OcclusionField build_occlusion_field(const SceneModel& scene, const GridSpec& grid, const FieldBuildOptions& opts = {});

void save_occlusion_field(const OcclusionField& field, const std::filesystem::path& path);
OcclusionField load_occlusion_field(const std::filesystem::path& path);
std::string encode_occlusion_field(const OcclusionField& field);
OcclusionField decode_occlusion_field(const std::string& bytes);

// Trilinear blend of the eight surrounding probes, each kept only when it
// lies on the front side of `normal` ((q_k - mu) . n >= 0); the surviving
// weights are renormalised, and when none survive the plain trilinear blend
// is used. Positions outside the grid are clamped onto it.
sh::ShCoeffs interpolate_occlusion(const OcclusionField& field, const Vec3& mu, const Vec3& normal);

struct ShadingScales {
  double light = 1.0;
  double occlusion = 1.0;
  double transfer = 1.0;
};

// Gains under which a fully visible, upward-facing cosine-lobe splat under
// unit uniform radiance shades to exactly its albedo.
ShadingScales furnace_scales();

// Literal triple product, unclamped. Throws InputError on degree mismatch.
Vec3 shade(const Gaussian& g, const EnvLight& light, const sh::ShCoeffs& occlusion, const ShadingScales& scales = {});

// Sky gradient behind relit frames, proportional to the light's mean radiance.
Background sky_background(const EnvLight& light, const ShadingScales& scales);

// Per scene+field cache of interpolated occlusion; shading a new light only
// redoes the triple products.
class RelitContext {
 public:
  RelitContext(std::shared_ptr<const SceneModel> scene, std::shared_ptr<const OcclusionField> field,
               ShadingScales scales = furnace_scales());

  const SceneModel& scene() const { return *scene_; }
  const OcclusionField& field() const { return *field_; }
  const ShadingScales& scales() const { return scales_; }
  sh::ShCoeffs occlusion(std::size_t i) const;

  std::vector<Vec3f> colors(const EnvLight& light) const;
  // Relit frame; background defaults to sky_background(light).
  FrameBuffer render(const Camera& cam, const EnvLight& light, RenderOptions opts = {}) const;
  FrameBuffer render(const Camera& cam, const EnvLight& light, std::span<const Vec3f> colors,
                     RenderOptions opts = {}) const;

 private:
  std::shared_ptr<const SceneModel> scene_;
  std::shared_ptr<const OcclusionField> field_;
  ShadingScales scales_;
  std::vector<double> occlusion_;  // N x K
};

}  // namespace rns
