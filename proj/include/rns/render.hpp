// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

// CPU splat rasteriser.
//
// Cameras follow the OpenCV convention: +x right, +y down, +z forward, pixel
// centres at (col + 0.5, row + 0.5). Gaussians are projected with the
// first-order (EWA) Jacobian, their 2D covariance eigenvalues clamped to at
// least kMinFootprintVariance px^2, cut off at 3 sigma, sorted by camera-space
// depth (index breaks ties) and composited front to back until the
// transmittance falls below kTransmittanceCutoff.

#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "rns/common.hpp"
#include "rns/scene.hpp"

namespace rns {

inline constexpr double kMinFootprintVariance = 0.3;
inline constexpr double kFootprintSigmas = 3.0;
inline constexpr double kTransmittanceCutoff = 1e-4;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ProjectionKind { kPerspective, kProbeFace };

struct Camera {
  // Camera-to-world rotation; columns are the right, down and forward axes.
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();
  double fx = 1.0, fy = 1.0, cx = 0.5, cy = 0.5;
  int width = 1, height = 1;
  double near_clip = 0.05;
  double far_clip = 1000.0;
  ProjectionKind kind = ProjectionKind::kPerspective;

  void validate() const;
  Vec3 to_camera(const Vec3& world) const { return rotation.transpose() * (world - position); }

  // Forward-looking camera for a body at `position` with heading `yaw`
  // (about +z); roll/pitch/yaw offsets are applied in the body frame.
  static Camera drone(const Vec3& position, double yaw, int width, int height, double hfov_rad,
                      const Vec3& euler_offset = Vec3::Zero());
};

struct Footprint {
  Eigen::Vector2d mean;
  Eigen::Matrix2d cov;
  Eigen::Matrix2d conic;  // cov^-1
  double depth = 0.0;     // camera-space z of the centre
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bounds of the 3-sigma box
};

// Screen-space footprint, or nullopt when the centre lies outside the
// near/far range or the 3-sigma box misses the image.
std::optional<Footprint> project_gaussian(const Gaussian& g, const Camera& cam);
std::optional<Footprint> project_gaussian(const Vec3& mean, const Mat3& covariance, const Camera& cam);

struct Background {
  Vec3 top = Vec3::Zero();
  Vec3 bottom = Vec3::Zero();
  static Background constant(const Vec3& c) { return {c, c}; }
  Vec3 at_row(int row, int height) const;
};

enum class DepthMode {
  kExpected,  // alpha-weighted mean depth, normalised by accumulated alpha
  kSurface,   // ray distance of the splat at which accumulated alpha first reaches surface_alpha
};

struct RenderOptions {
  std::optional<Background> background;  // black when unset
  DepthMode depth_mode = DepthMode::kExpected;
  double surface_alpha = 0.5;
};

struct FrameBuffer {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;    // row-major, 3 floats per pixel, linear, unclamped
  std::vector<float> depth;  // metres, +inf where nothing was hit
  std::vector<float> alpha;  // accumulated opacity

  FrameBuffer() = default;
  FrameBuffer(int w, int h);
  Vec3 pixel(int row, int col) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(row) * width + col);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  float depth_at(int row, int col) const { return depth[static_cast<std::size_t>(row) * width + col]; }
};

// Renders with one view-independent colour per Gaussian. When `subset` is
// given only those Gaussian indices take part.
FrameBuffer render_colors(const SceneModel& scene, const Camera& cam, std::span<const Vec3f> colors,
                          const RenderOptions& opts = {},
                          std::optional<std::span<const std::uint32_t>> subset = std::nullopt);

// Baked radiance of every Gaussian seen from `eye`, clamped at zero.
std::vector<Vec3f> baked_colors(const SceneModel& scene, const Vec3& eye);

inline const Vec3 kBakedBackground{0.5, 0.5, 0.5};

// Baked-mode frame; background defaults to constant grey.
FrameBuffer render_baked(const SceneModel& scene, const Camera& cam, RenderOptions opts = {});

// Cube-map faces in the order +X, -X, +Y, -Y, +Z, -Z.
inline constexpr int kCubeFaces = 6;

struct CubeFaces {
  int resolution = 0;
  std::array<std::vector<float>, kCubeFaces> depth;  // row-major ray distances
};

struct FaceAxes {
  Vec3 forward, right, down;
};
FaceAxes cube_face_axes(int face);

// 90-degree square camera looking down cube face `face` from `centre`.
Camera probe_face_camera(const Vec3& centre, int face, int resolution, double far_clip = 1000.0);

// Unit direction through the centre of texel (row, col) of `face`.
Vec3 cube_texel_direction(int face, int row, int col, int resolution);

// Exact solid angle subtended by texel (row, col) of any face.
double cube_texel_solid_angle(int row, int col, int resolution);

enum class ProbeMethod {
  // Each Gaussian evaluated exactly along each texel ray, at its point of
  // closest (Mahalanobis) approach. Holds up when splats are as large as
  // their distance to the probe.
  kRay,
  // The perspective rasteriser run once per face. First-order projection
  // breaks down for splats close to the probe relative to their size.
  kSplat,
};

struct ProbeRenderOptions {
  double far_clip = 1000.0;
  double surface_alpha = 0.5;
  ProbeMethod method = ProbeMethod::kRay;
};

// Six surface-depth maps around `centre` (resolution >= 8). Each texel holds
// the distance along its ray to the first point where accumulated alpha
// reaches surface_alpha, +inf where none within far_clip.
CubeFaces render_probe_faces(const SceneModel& scene, const Vec3& centre, int resolution,
                             const ProbeRenderOptions& opts = {},
                             std::optional<std::span<const std::uint32_t>> subset = std::nullopt);

}  // namespace rns
