// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#include "rns/render.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rns {

void Camera::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) throw InputError("camera focal lengths must be > 0");
  if (!(near_clip > 0.0 && near_clip < far_clip)) throw InputError("camera needs 0 < near < far");
  if (width < 1 || height < 1) throw InputError("camera resolution must be >= 1x1");
}

Camera Camera::drone(const Vec3& position, double yaw, int width, int height, double hfov_rad,
                     const Vec3& euler_offset) {
  Mat3 body_from_cam;
  body_from_cam.col(0) = Vec3(0, -1, 0);
  body_from_cam.col(1) = Vec3(0, 0, -1);
  body_from_cam.col(2) = Vec3(1, 0, 0);
  const Mat3 offset = (Eigen::AngleAxisd(euler_offset.z(), Vec3::UnitZ()) *
                       Eigen::AngleAxisd(euler_offset.y(), Vec3::UnitY()) *
                       Eigen::AngleAxisd(euler_offset.x(), Vec3::UnitX()))
                          .toRotationMatrix();
  Camera cam;
  cam.rotation = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix() * offset * body_from_cam;
  cam.position = position;
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = 0.5 * width / std::tan(0.5 * hfov_rad);
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  return cam;
}

std::optional<Footprint> project_gaussian(const Vec3& mean, const Mat3& covariance, const Camera& cam) {
  const Vec3 t = cam.to_camera(mean);
  if (!(t.z() > cam.near_clip) || t.z() > cam.far_clip) return std::nullopt;

  const double limx = 1.3 * std::max(cam.cx, cam.width - cam.cx) / cam.fx;
  const double limy = 1.3 * std::max(cam.cy, cam.height - cam.cy) / cam.fy;
  const double tz = t.z();
  const double tx = std::clamp(t.x() / tz, -limx, limx) * tz;
  const double ty = std::clamp(t.y() / tz, -limy, limy) * tz;

  Eigen::Matrix<double, 2, 3> jac;
  jac << cam.fx / tz, 0.0, -cam.fx * tx / (tz * tz), 0.0, cam.fy / tz, -cam.fy * ty / (tz * tz);
  const Eigen::Matrix<double, 2, 3> jw = jac * cam.rotation.transpose();
  Eigen::Matrix2d cov = jw * covariance * jw.transpose();
  cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));

  // Eigenvalue floor: low-pass filter so sub-pixel splats still cover a pixel.
  const double a = cov(0, 0), b = cov(0, 1), c = cov(1, 1);
  const double mid = 0.5 * (a + c);
  const double rad = std::sqrt(std::max(0.0, 0.25 * (a - c) * (a - c) + b * b));
  double lmax = mid + rad;
  const double lmin = mid - rad;
  if (lmin < kMinFootprintVariance) {
    const double phi = 0.5 * std::atan2(2.0 * b, a - c);
    const Eigen::Vector2d e1(std::cos(phi), std::sin(phi));
    const Eigen::Vector2d e2(-e1.y(), e1.x());
    lmax = std::max(lmax, kMinFootprintVariance);
    cov = lmax * e1 * e1.transpose() + kMinFootprintVariance * e2 * e2.transpose();
  }

  Footprint fp;
  fp.mean = {cam.fx * t.x() / tz + cam.cx, cam.fy * t.y() / tz + cam.cy};
  fp.cov = cov;
  fp.conic = cov.inverse();
  fp.depth = tz;
  const double r = kFootprintSigmas * std::sqrt(lmax);
  if (!std::isfinite(fp.mean.x()) || !std::isfinite(fp.mean.y()) || !std::isfinite(r)) return std::nullopt;
  const double fx0 = std::floor(fp.mean.x() - r - 0.5);
  const double fx1 = std::ceil(fp.mean.x() + r - 0.5);
  const double fy0 = std::floor(fp.mean.y() - r - 0.5);
  const double fy1 = std::ceil(fp.mean.y() + r - 0.5);
  if (fx1 < 0.0 || fy1 < 0.0 || fx0 > cam.width - 1 || fy0 > cam.height - 1) return std::nullopt;
  fp.x0 = static_cast<int>(std::max(0.0, fx0));
  fp.x1 = static_cast<int>(std::min<double>(cam.width - 1, fx1));
  fp.y0 = static_cast<int>(std::max(0.0, fy0));
  fp.y1 = static_cast<int>(std::min<double>(cam.height - 1, fy1));
  return fp;
}

std::optional<Footprint> project_gaussian(const Gaussian& g, const Camera& cam) {
  return project_gaussian(g.mean.cast<double>(), g.covariance(), cam);
}

Vec3 Background::at_row(int row, int height) const {
  const double t = height > 1 ? static_cast<double>(row) / (height - 1) : 0.0;
  return (1.0 - t) * top + t * bottom;
}

FrameBuffer::FrameBuffer(int w, int h)
    : width(w),
      height(h),
      rgb(static_cast<std::size_t>(w) * h * 3, 0.0f),
      depth(static_cast<std::size_t>(w) * h, std::numeric_limits<float>::infinity()),
      alpha(static_cast<std::size_t>(w) * h, 0.0f) {}

namespace {

struct Splat {
  Footprint fp;
  std::uint32_t index;
};

std::vector<Splat> project_all(const SceneModel& scene, const Camera& cam,
                               std::optional<std::span<const std::uint32_t>> subset) {
  std::vector<Splat> splats;
  auto visit = [&](std::uint32_t i) {
    if (auto fp = project_gaussian(scene.gaussians[i], cam)) splats.push_back({*fp, i});
  };
  if (subset) {
    splats.reserve(subset->size());
    for (std::uint32_t i : *subset) visit(i);
  } else {
    splats.reserve(scene.gaussians.size());
    for (std::uint32_t i = 0; i < scene.gaussians.size(); ++i) visit(i);
  }
  std::sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) {
    return a.fp.depth < b.fp.depth || (a.fp.depth == b.fp.depth && a.index < b.index);
  });
  return splats;
}

// Front-to-back compositing, one splat at a time over its bounding box.
// Visiting splats in depth order and pixels independently is equivalent to
// the per-pixel sum over the sorted list.
template <bool kWithColor>
void composite(const SceneModel& scene, const Camera& cam, const std::vector<Splat>& splats,
               std::span<const Vec3f> colors, const RenderOptions& opts, FrameBuffer& fb) {
  const int w = cam.width, h = cam.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> trans(n, 1.0);
  std::vector<double> accum(kWithColor ? 3 * n : 0, 0.0);
  std::vector<double> depth_sum(n, 0.0);
  std::vector<double> surface(n, kInf);
  std::vector<unsigned char> done(n, 0);
  const bool want_surface = opts.depth_mode == DepthMode::kSurface;

  for (const Splat& s : splats) {
    const Footprint& fp = s.fp;
    const double opacity = scene.gaussians[s.index].opacity;
    Vec3 color = Vec3::Zero();
    if constexpr (kWithColor) color = colors[s.index].cast<double>();
    const double ca = fp.conic(0, 0), cb = fp.conic(0, 1), cc = fp.conic(1, 1);
    for (int row = fp.y0; row <= fp.y1; ++row) {
      const double dy = row + 0.5 - fp.mean.y();
      for (int col = fp.x0; col <= fp.x1; ++col) {
        const std::size_t p = static_cast<std::size_t>(row) * w + col;
        if (done[p]) continue;
        const double dx = col + 0.5 - fp.mean.x();
        const double q = ca * dx * dx + 2.0 * cb * dx * dy + cc * dy * dy;
        if (q > kFootprintSigmas * kFootprintSigmas) continue;
        const double a = std::min(1.0, opacity * std::exp(-0.5 * q));
        if (a <= 0.0) continue;
        const double t = trans[p];
        const double weight = a * t;
        if constexpr (kWithColor) {
          accum[3 * p] += color.x() * weight;
          accum[3 * p + 1] += color.y() * weight;
          accum[3 * p + 2] += color.z() * weight;
        }
        depth_sum[p] += fp.depth * weight;
        const double next = t * (1.0 - a);
        if (want_surface && surface[p] == kInf && 1.0 - next >= opts.surface_alpha) {
          const double ux = (col + 0.5 - cam.cx) / cam.fx;
          const double uy = (row + 0.5 - cam.cy) / cam.fy;
          surface[p] = fp.depth * std::sqrt(ux * ux + uy * uy + 1.0);
        }
        trans[p] = next;
        if (next < kTransmittanceCutoff) done[p] = 1;
      }
    }
  }

  const Background bg = opts.background.value_or(Background{});
  for (int row = 0; row < h; ++row) {
    const Vec3 b = bg.at_row(row, h);
    for (int col = 0; col < w; ++col) {
      const std::size_t p = static_cast<std::size_t>(row) * w + col;
      const double t = trans[p];
      if constexpr (kWithColor) {
        for (int c = 0; c < 3; ++c) fb.rgb[3 * p + c] = static_cast<float>(accum[3 * p + c] + t * b[c]);
      } else {
        for (int c = 0; c < 3; ++c) fb.rgb[3 * p + c] = static_cast<float>(t * b[c]);
      }
      const double acc = 1.0 - t;
      fb.alpha[p] = static_cast<float>(acc);
      if (want_surface) {
        fb.depth[p] = static_cast<float>(surface[p]);
      } else {
        fb.depth[p] = acc > 0.0 ? static_cast<float>(depth_sum[p] / acc) : std::numeric_limits<float>::infinity();
      }
    }
  }
}

}  // namespace

FrameBuffer render_colors(const SceneModel& scene, const Camera& cam, std::span<const Vec3f> colors,
                          const RenderOptions& opts, std::optional<std::span<const std::uint32_t>> subset) {
  cam.validate();
  if (colors.size() != scene.gaussians.size()) throw InputError("need one colour per Gaussian");
  FrameBuffer fb(cam.width, cam.height);
  composite<true>(scene, cam, project_all(scene, cam, subset), colors, opts, fb);
  return fb;
}

std::vector<Vec3f> baked_colors(const SceneModel& scene, const Vec3& eye) {
  const int k = sh::coeff_count(scene.degree);
  std::vector<Vec3f> out(scene.gaussians.size(), Vec3f::Zero());
  std::vector<double> basis(k);
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
    const Gaussian& g = scene.gaussians[i];
    if (g.baked.empty()) throw InputError("scene has no baked radiance");
    Vec3 dir = g.mean.cast<double>() - eye;
    const double len = dir.norm();
    dir = len > 0.0 ? Vec3(dir / len) : Vec3(Vec3::UnitZ());
    sh::eval_basis_unchecked(scene.degree, dir, basis);
    for (int c = 0; c < 3; ++c) {
      double v = 0.0;
      for (int j = 0; j < k; ++j) v += g.baked[c * k + j] * basis[j];
      out[i][c] = static_cast<float>(std::max(0.0, v));
    }
  }
  return out;
}

FrameBuffer render_baked(const SceneModel& scene, const Camera& cam, RenderOptions opts) {
  if (!opts.background) opts.background = Background::constant(kBakedBackground);
  if (scene.gaussians.empty()) return render_colors(scene, cam, {}, opts);
  const auto colors = baked_colors(scene, cam.position);
  return render_colors(scene, cam, colors, opts);
}

FaceAxes cube_face_axes(int face) {
  switch (face) {
    case 0: return {{1, 0, 0}, {0, -1, 0}, {0, 0, -1}};
    case 1: return {{-1, 0, 0}, {0, 1, 0}, {0, 0, -1}};
    case 2: return {{0, 1, 0}, {1, 0, 0}, {0, 0, -1}};
    case 3: return {{0, -1, 0}, {-1, 0, 0}, {0, 0, -1}};
    case 4: return {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}};
    case 5: return {{0, 0, -1}, {1, 0, 0}, {0, -1, 0}};
    default: throw InputError("cube face index out of range");
  }
}

Camera probe_face_camera(const Vec3& centre, int face, int resolution, double far_clip) {
  const FaceAxes ax = cube_face_axes(face);
  Camera cam;
  cam.rotation.col(0) = ax.right;
  cam.rotation.col(1) = ax.down;
  cam.rotation.col(2) = ax.forward;
  cam.position = centre;
  cam.width = cam.height = resolution;
  cam.fx = cam.fy = cam.cx = cam.cy = 0.5 * resolution;
  cam.near_clip = 1e-3;
  cam.far_clip = far_clip;
  cam.kind = ProjectionKind::kProbeFace;
  return cam;
}

Vec3 cube_texel_direction(int face, int row, int col, int resolution) {
  const FaceAxes ax = cube_face_axes(face);
  const double u = 2.0 * (col + 0.5) / resolution - 1.0;
  const double v = 2.0 * (row + 0.5) / resolution - 1.0;
  return (ax.forward + u * ax.right + v * ax.down).normalized();
}

double cube_texel_solid_angle(int row, int col, int resolution) {
  auto area = [](double x, double y) { return std::atan2(x * y, std::sqrt(x * x + y * y + 1.0)); };
  const double x0 = 2.0 * col / resolution - 1.0;
  const double x1 = 2.0 * (col + 1) / resolution - 1.0;
  const double y0 = 2.0 * row / resolution - 1.0;
  const double y1 = 2.0 * (row + 1) / resolution - 1.0;
  return area(x0, y0) - area(x0, y1) - area(x1, y0) + area(x1, y1);
}

namespace {

struct RayCandidate {
  Vec3 m;          // mean relative to the probe
  Vec3 am;         // A m, A = Sigma^-1
  double mam;      // m^T A m
  double a[6];     // A packed xx, xy, xz, yy, yz, zz
  Vec3 axis;       // unit direction to the mean
  double cos_cone; // rays outside this cone miss the 3-sigma ellipsoid
  double opacity;
  std::uint32_t index;
};

// Closest approach of each ray to each Gaussian in the Mahalanobis metric:
// t* = d^T A m / d^T A d and q = m^T A m - (d^T A m)^2 / d^T A d. The
// Gaussian contributes alpha = min(1, o exp(-q/2)) at ray distance t* when
// q is within the 3-sigma cutoff; contributions composite in t* order.
CubeFaces ray_probe_faces(const SceneModel& scene, const Vec3& centre, int resolution, const ProbeRenderOptions& opts,
                          std::optional<std::span<const std::uint32_t>> subset) {
  constexpr double kNear = 1e-3;
  const double cutoff = kFootprintSigmas * kFootprintSigmas;
  std::vector<RayCandidate> cands;
  auto visit = [&](std::uint32_t i) {
    const Gaussian& g = scene.gaussians[i];
    const Vec3 m = g.mean.cast<double>() - centre;
    const double reach = kFootprintSigmas * g.scale.maxCoeff();
    const double dist = m.norm();
    if (dist - reach > opts.far_clip || g.opacity <= 0.0f) return;
    const Mat3 r = g.rotation.cast<double>().normalized().toRotationMatrix();
    const Vec3 inv = g.scale.cast<double>().cwiseAbs2().cwiseInverse();
    const Mat3 a = r * inv.asDiagonal() * r.transpose();
    RayCandidate c;
    c.m = m;
    c.am = a * m;
    c.mam = m.dot(c.am);
    c.a[0] = a(0, 0), c.a[1] = a(0, 1), c.a[2] = a(0, 2), c.a[3] = a(1, 1), c.a[4] = a(1, 2), c.a[5] = a(2, 2);
    c.axis = dist > 0.0 ? Vec3(m / dist) : Vec3::UnitZ();
    c.cos_cone = dist > reach ? std::sqrt(1.0 - (reach / dist) * (reach / dist)) : -2.0;
    c.opacity = g.opacity;
    c.index = i;
    cands.push_back(c);
  };
  if (subset) {
    for (std::uint32_t i : *subset) visit(i);
  } else {
    for (std::uint32_t i = 0; i < scene.gaussians.size(); ++i) visit(i);
  }

  CubeFaces faces;
  faces.resolution = resolution;
  struct Hit {
    double t;
    double alpha;
    std::uint32_t index;
  };
  std::vector<Hit> hits;
  for (int f = 0; f < kCubeFaces; ++f) {
    auto& depth = faces.depth[f];
    depth.assign(static_cast<std::size_t>(resolution) * resolution, std::numeric_limits<float>::infinity());
    if (cands.empty()) continue;
    for (int row = 0; row < resolution; ++row) {
      for (int col = 0; col < resolution; ++col) {
        const Vec3 d = cube_texel_direction(f, row, col, resolution);
        hits.clear();
        for (const RayCandidate& c : cands) {
          if (d.dot(c.axis) < c.cos_cone) continue;
          const double dad = c.a[0] * d.x() * d.x() + c.a[3] * d.y() * d.y() + c.a[5] * d.z() * d.z() +
                             2.0 * (c.a[1] * d.x() * d.y() + c.a[2] * d.x() * d.z() + c.a[4] * d.y() * d.z());
          const double dam = d.dot(c.am);
          const double t = dam / dad;
          if (t <= kNear || t > opts.far_clip) continue;
          const double q = std::max(0.0, c.mam - dam * t);
          if (q > cutoff) continue;
          hits.push_back({t, std::min(1.0, c.opacity * std::exp(-0.5 * q)), c.index});
        }
        if (hits.empty()) continue;
        std::sort(hits.begin(), hits.end(),
                  [](const Hit& a, const Hit& b) { return a.t < b.t || (a.t == b.t && a.index < b.index); });
        double trans = 1.0;
        for (const Hit& h : hits) {
          trans *= 1.0 - h.alpha;
          if (1.0 - trans >= opts.surface_alpha) {
            depth[static_cast<std::size_t>(row) * resolution + col] = static_cast<float>(h.t);
            break;
          }
        }
      }
    }
  }
  return faces;
}

}  // namespace

CubeFaces render_probe_faces(const SceneModel& scene, const Vec3& centre, int resolution,
                             const ProbeRenderOptions& opts, std::optional<std::span<const std::uint32_t>> subset) {
  if (resolution < 8) throw InputError("probe face resolution must be >= 8");
  if (opts.method == ProbeMethod::kRay) return ray_probe_faces(scene, centre, resolution, opts, subset);
  CubeFaces faces;
  faces.resolution = resolution;
  RenderOptions ro;
  ro.depth_mode = DepthMode::kSurface;
  ro.surface_alpha = opts.surface_alpha;
  for (int f = 0; f < kCubeFaces; ++f) {
    const Camera cam = probe_face_camera(centre, f, resolution, opts.far_clip);
    FrameBuffer fb(resolution, resolution);
    composite<false>(scene, cam, project_all(scene, cam, subset), {}, ro, fb);
    faces.depth[f] = std::move(fb.depth);
  }
  return faces;
}

}  // namespace rns
