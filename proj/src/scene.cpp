// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#include "rns/scene.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rns/fileutil.hpp"

namespace rns {

namespace {

using json = nlohmann::json;

void append_f32(std::string& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  if constexpr (std::endian::native == std::endian::big) {
    bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) | (bits >> 24);
  }
  char buf[4];
  std::memcpy(buf, &bits, 4);
  out.append(buf, 4);
}

float read_f32(const std::string& in, std::size_t offset) {
  std::uint32_t bits;
  std::memcpy(&bits, in.data() + offset, 4);
  if constexpr (std::endian::native == std::endian::big) {
    bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) | (bits >> 24);
  }
  return std::bit_cast<float>(bits);
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::runtime_error("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string gaussian_problem(const Gaussian& g, int degree, bool has_baked) {
  const int k = sh::coeff_count(degree);
  if (!g.mean.allFinite()) return "non-finite mean";
  if (!g.rotation.coeffs().allFinite() || std::abs(g.rotation.norm() - 1.0f) > 1e-3f) {
    return "rotation is not a unit quaternion";
  }
  if (!g.scale.allFinite() || (g.scale.array() <= 0.0f).any()) return "scale entries must be > 0";
  if (!(g.opacity >= 0.0f && g.opacity <= 1.0f)) return "opacity " + std::to_string(g.opacity) + " outside [0,1]";
  if (!g.albedo.allFinite() || (g.albedo.array() < 0.0f).any() || (g.albedo.array() > 1.0f).any()) {
    return "albedo outside [0,1]^3";
  }
  if (static_cast<int>(g.transfer.size()) != k) return "transfer has wrong length";
  for (float v : g.transfer) {
    if (!std::isfinite(v)) return "non-finite transfer coefficient";
  }
  if (has_baked) {
    if (static_cast<int>(g.baked.size()) != 3 * k) return "baked radiance has wrong length";
    for (float v : g.baked) {
      if (!std::isfinite(v)) return "non-finite baked coefficient";
    }
  } else if (!g.baked.empty()) {
    return "baked radiance present on only some Gaussians";
  }
  return {};
}

}  // namespace

Mat3 Gaussian::covariance() const {
  const Mat3 r = rotation.cast<double>().normalized().toRotationMatrix();
  const Vec3 s = scale.cast<double>();
  return r * s.cwiseProduct(s).asDiagonal() * r.transpose();
}

Vec3 Gaussian::normal() const {
  const Mat3 r = rotation.cast<double>().normalized().toRotationMatrix();
  int axis = 0;
  for (int i = 1; i < 3; ++i) {
    if (scale[i] < scale[axis]) axis = i;
  }
  Vec3 n = r.col(axis).normalized();
  if (n.z() < 0.0) n = -n;
  return n;
}

sh::ShCoeffs Gaussian::transfer_sh(int degree) const {
  return sh::ShCoeffs(degree, 1, std::vector<double>(transfer.begin(), transfer.end()));
}

sh::ShCoeffs Gaussian::baked_sh(int degree) const {
  if (baked.empty()) throw InputError("Gaussian has no baked radiance");
  return sh::ShCoeffs(degree, 3, std::vector<double>(baked.begin(), baked.end()));
}

bool SceneModel::has_baked() const {
  return !gaussians.empty() && !gaussians.front().baked.empty();
}

void SceneModel::validate(bool require_nonempty) const {
  if (degree < 0 || degree > sh::kMaxDegree) throw InputError("scene SH degree out of range");
  if (require_nonempty && gaussians.empty()) throw InputError("scene has no Gaussians");
  const bool baked = has_baked();
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    const Gaussian& g = gaussians[i];
    std::string problem = gaussian_problem(g, degree, baked);
    if (problem.empty() && !bounds.contains(g.mean.cast<double>())) problem = "centre outside scene bounds";
    if (!problem.empty()) throw InputError("Gaussian " + std::to_string(i) + ": " + problem);
  }
}

std::string encode_scene(const SceneModel& scene) {
  scene.validate();
  const bool baked = scene.has_baked();
  json header = {
      {"format", "rns-scene"},
      {"version", kSceneFormatVersion},
      {"degree", scene.degree},
      {"count", scene.gaussians.size()},
      {"has_baked", baked},
      {"bounds", {{"min", vec_json(scene.bounds.min)}, {"max", vec_json(scene.bounds.max)}}},
      {"ground_z", scene.ground_z},
      {"name", scene.name},
      {"seed", scene.seed},
      {"scene_version", scene.version},
  };
  std::string out = header.dump();
  out.push_back('\n');
  const auto& gs = scene.gaussians;
  for (const auto& g : gs) for (int i = 0; i < 3; ++i) append_f32(out, g.mean[i]);
  for (const auto& g : gs) {
    append_f32(out, g.rotation.w());
    append_f32(out, g.rotation.x());
    append_f32(out, g.rotation.y());
    append_f32(out, g.rotation.z());
  }
  for (const auto& g : gs) for (int i = 0; i < 3; ++i) append_f32(out, g.scale[i]);
  for (const auto& g : gs) append_f32(out, g.opacity);
  for (const auto& g : gs) for (int i = 0; i < 3; ++i) append_f32(out, g.albedo[i]);
  for (const auto& g : gs) for (float v : g.transfer) append_f32(out, v);
  if (baked) {
    for (const auto& g : gs) for (float v : g.baked) append_f32(out, v);
  }
  return out;
}

SceneModel decode_scene(const std::string& bytes) {
  const std::size_t eol = bytes.find('\n');
  if (eol == std::string::npos) throw ParseError("scene header is not terminated", bytes.size(), 1);
  json header;
  try {
    header = json::parse(bytes.substr(0, eol));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scene header is not valid JSON: ") + e.what(), e.byte, 1);
  }

  SceneModel scene;
  std::size_t count = 0;
  bool baked = false;
  try {
    if (header.value("format", std::string()) != "rns-scene") throw ParseError("not a scene file", 0, 1);
    const int version = header.at("version").get<int>();
    if (version != kSceneFormatVersion) {
      throw ParseError("unsupported scene version " + std::to_string(version), 0, 1);
    }
    scene.degree = header.at("degree").get<int>();
    if (scene.degree < 0 || scene.degree > sh::kMaxDegree) throw ParseError("SH degree out of range", 0, 1);
    count = header.at("count").get<std::size_t>();
    baked = header.at("has_baked").get<bool>();
    scene.bounds.min = json_vec(header.at("bounds").at("min"));
    scene.bounds.max = json_vec(header.at("bounds").at("max"));
    scene.ground_z = header.at("ground_z").get<double>();
    scene.name = header.at("name").get<std::string>();
    scene.seed = header.at("seed").get<std::uint64_t>();
    scene.version = header.value("scene_version", 1);
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("bad scene header: ") + e.what(), 0, 1);
  }
  if (count == 0) throw ParseError("scene has no Gaussians", eol, 1);

  const std::size_t k = sh::coeff_count(scene.degree);
  const std::size_t floats_per = 3 + 4 + 3 + 1 + 3 + k + (baked ? 3 * k : 0);
  const std::size_t payload = eol + 1;
  const std::size_t expected = payload + 4 * floats_per * count;
  if (bytes.size() < expected) {
    throw ParseError("scene payload truncated: expected " + std::to_string(expected) + " bytes, found " +
                         std::to_string(bytes.size()),
                     bytes.size());
  }
  if (bytes.size() > expected) throw ParseError("trailing bytes after scene payload", expected);

  scene.gaussians.resize(count);
  std::size_t at = payload;
  auto next = [&]() {
    const float v = read_f32(bytes, at);
    at += 4;
    return v;
  };
  for (auto& g : scene.gaussians) for (int i = 0; i < 3; ++i) g.mean[i] = next();
  for (auto& g : scene.gaussians) {
    const float w = next(), x = next(), y = next(), z = next();
    g.rotation = Eigen::Quaternionf(w, x, y, z);
  }
  for (auto& g : scene.gaussians) for (int i = 0; i < 3; ++i) g.scale[i] = next();
  const std::size_t opacity_offset = at;
  for (auto& g : scene.gaussians) g.opacity = next();
  for (auto& g : scene.gaussians) for (int i = 0; i < 3; ++i) g.albedo[i] = next();
  for (auto& g : scene.gaussians) {
    g.transfer.resize(k);
    for (auto& v : g.transfer) v = next();
  }
  if (baked) {
    for (auto& g : scene.gaussians) {
      g.baked.resize(3 * k);
      for (auto& v : g.baked) v = next();
    }
  }

  for (std::size_t i = 0; i < count; ++i) {
    const Gaussian& g = scene.gaussians[i];
    std::string problem = gaussian_problem(g, scene.degree, baked);
    if (problem.empty() && !scene.bounds.contains(g.mean.cast<double>())) problem = "centre outside scene bounds";
    if (!problem.empty()) {
      const bool is_opacity = problem.rfind("opacity", 0) == 0;
      throw ParseError("invariant violated by Gaussian " + std::to_string(i) + ": " + problem,
                       is_opacity ? opacity_offset + 4 * i : payload);
    }
  }
  return scene;
}

void save_scene(const SceneModel& scene, const std::filesystem::path& path) {
  write_file_atomic(path, encode_scene(scene));
}

SceneModel load_scene(const std::filesystem::path& path) { return decode_scene(read_file(path)); }

std::vector<float> make_transfer(int degree, const Vec3& normal, TransferInit init) {
  std::vector<float> out(sh::coeff_count(degree), 0.0f);
  if (init == TransferInit::kUnitDc) {
    out[0] = 1.0f;
    return out;
  }
  const sh::ShCoeffs lobe = sh::clamped_cosine_lobe(degree, normal.normalized());
  for (int i = 0; i < lobe.count(); ++i) out[i] = static_cast<float>(lobe(0, i));
  return out;
}

namespace {

std::vector<float> baked_from_color(int degree, const Vec3& color) {
  const int k = sh::coeff_count(degree);
  const double y00 = 0.5 / std::sqrt(kPi);
  std::vector<float> out(3 * k, 0.0f);
  for (int c = 0; c < 3; ++c) out[c * k] = static_cast<float>(color[c] / y00);
  return out;
}

Vec3 jittered(const Vec3& base, double jitter, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-jitter, jitter);
  Vec3 c = base;
  for (int i = 0; i < 3; ++i) c[i] = std::clamp(c[i] + u(rng), 0.0, 1.0);
  return c;
}

// Frame whose local z axis is `axis`, with a random twist about it.
Eigen::Quaternionf frame_with_z(const Vec3& axis, double twist) {
  Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), axis.normalized());
  q = q * Eigen::AngleAxisd(twist, Vec3::UnitZ());
  return q.normalized().cast<float>();
}

}  // namespace

SceneModel gen_forest(const ForestParams& p, const Palette& palette) {
  if (!((p.area_max - p.area_min).array() > 0.0).all()) throw InputError("forest area is degenerate");
  if (p.n_trees < 0) throw InputError("tree count must be >= 0");

  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  SceneModel scene;
  scene.degree = p.degree;
  scene.ground_z = p.ground_z;
  scene.seed = p.seed;
  scene.name = "forest-" + std::to_string(p.seed) + "-" + std::to_string(p.n_trees);

  auto push = [&](const Vec3& mean, const Eigen::Quaternionf& rot, const Vec3& scale, double opacity,
                  const Vec3& albedo, const Vec3& baked_color) {
    Gaussian g;
    g.mean = mean.cast<float>();
    g.rotation = rot;
    g.scale = scale.cast<float>();
    g.opacity = static_cast<float>(opacity);
    g.albedo = albedo.cast<float>();
    g.transfer = make_transfer(p.degree, g.normal(), p.transfer_init);
    g.baked = baked_from_color(p.degree, baked_color);
    scene.gaussians.push_back(std::move(g));
  };

  // Ground sheet.
  const double sp = p.ground_spacing;
  const int gx = std::max(1, static_cast<int>(std::floor((p.area_max.x() - p.area_min.x()) / sp)));
  const int gy = std::max(1, static_cast<int>(std::floor((p.area_max.y() - p.area_min.y()) / sp)));
  for (int i = 0; i < gx; ++i) {
    for (int j = 0; j < gy; ++j) {
      const double x = p.area_min.x() + (i + 0.5 + uniform(-0.3, 0.3)) * sp;
      const double y = p.area_min.y() + (j + 0.5 + uniform(-0.3, 0.3)) * sp;
      const auto rot = frame_with_z(Vec3::UnitZ(), uniform(0.0, 2.0 * kPi));
      const Vec3 albedo = jittered(palette.ground, palette.jitter, rng);
      push({x, y, p.ground_z}, rot, {0.6 * sp, 0.6 * sp, 0.02}, 0.9, albedo, 0.9 * albedo);
    }
  }

  // Trunk positions, rejection-sampled for spacing; spacing relaxes if the
  // area cannot hold the requested count.
  std::vector<Eigen::Vector2d> trees;
  double spacing = p.min_tree_spacing;
  const Eigen::Vector2d lo = p.area_min.array() + p.border_margin;
  const Eigen::Vector2d hi = p.area_max.array() - p.border_margin;
  int attempts = 0;
  while (static_cast<int>(trees.size()) < p.n_trees) {
    const Eigen::Vector2d c(uniform(lo.x(), hi.x()), uniform(lo.y(), hi.y()));
    bool ok = true;
    for (const auto& t : trees) {
      if ((t - c).norm() < spacing) {
        ok = false;
        break;
      }
    }
    if (ok) {
      trees.push_back(c);
    } else if (++attempts > 2000) {
      spacing *= 0.8;
      attempts = 0;
    }
  }

  for (const auto& t : trees) {
    const double height = uniform(p.trunk_height_min, p.trunk_height_max);
    const double radius = uniform(p.trunk_radius_min, p.trunk_radius_max);
    const Vec3 bark = jittered(palette.trunk, palette.jitter, rng);
    const double yaw = uniform(0.0, 2.0 * kPi);
    for (double z = p.trunk_segment * 0.5; z <= height; z += p.trunk_segment) {
      // Slightly elliptical cross-section fixes the smallest axis horizontally.
      const Eigen::Quaternionf rot(Eigen::AngleAxisf(static_cast<float>(yaw + uniform(-0.3, 0.3)),
                                                     Eigen::Vector3f::UnitZ()));
      const Vec3 scale{radius, 0.85 * radius, std::max(p.trunk_segment, 1.5 * radius)};
      const double shade = 0.75 + 0.25 * z / height;
      push({t.x(), t.y(), p.ground_z + z}, rot, scale, 0.95, bark, shade * bark);
    }

    const double crown = uniform(p.canopy_radius_min, p.canopy_radius_max);
    const Vec3 centre{t.x(), t.y(), p.ground_z + height};
    const Vec3 leaf = jittered(palette.canopy, palette.jitter, rng);
    std::normal_distribution<double> spread(0.0, 0.5 * crown);
    for (int k = 0; k < p.canopy_gaussians; ++k) {
      Vec3 off;
      do {
        off = {spread(rng), spread(rng), spread(rng)};
      } while (off.norm() > crown);
      Vec3 outward = off.norm() > 1e-6 ? off.normalized() : Vec3::UnitZ();
      const double s = uniform(p.canopy_blob_min, p.canopy_blob_max);
      const bool filler = unit(rng) < p.canopy_filler_fraction;
      const double opacity = filler ? uniform(0.08, 0.25) : uniform(0.55, 0.9);
      const Vec3 albedo = jittered(leaf, 0.5 * palette.jitter, rng);
      const double depth_shade = 0.55 + 0.45 * off.norm() / crown;
      push(centre + off, frame_with_z(outward, uniform(0.0, 2.0 * kPi)), {s, s, 0.75 * s}, opacity, albedo,
           depth_shade * albedo);
    }
  }

  double zmin = p.ground_z, zmax = p.ground_z;
  for (const auto& g : scene.gaussians) {
    zmin = std::min(zmin, static_cast<double>(g.mean.z()));
    zmax = std::max(zmax, static_cast<double>(g.mean.z()));
  }
  scene.bounds.min = {p.area_min.x(), p.area_min.y(), zmin - 0.1};
  scene.bounds.max = {p.area_max.x(), p.area_max.y(), zmax + 0.1};
  // Jittered ground splats can sit a hair outside the nominal area.
  for (const auto& g : scene.gaussians) {
    scene.bounds.min = scene.bounds.min.cwiseMin(g.mean.cast<double>());
    scene.bounds.max = scene.bounds.max.cwiseMax(g.mean.cast<double>());
  }
  return scene;
}

std::vector<Vec3> extract_point_cloud(const SceneModel& scene, double alpha_min) {
  std::vector<Vec3> points;
  points.reserve(scene.gaussians.size());
  for (const auto& g : scene.gaussians) {
    if (g.opacity >= alpha_min) points.push_back(g.mean.cast<double>());
  }
  return points;
}

SceneModel rotate_scene_z(const SceneModel& scene, double angle, const Vec3& pivot) {
  SceneModel out = scene;
  const Eigen::AngleAxisd yaw(angle, Vec3::UnitZ());
  const Mat3 r = yaw.toRotationMatrix();
  const Eigen::Quaterniond qyaw(yaw);
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (auto& g : out.gaussians) {
    const Vec3 m = pivot + r * (g.mean.cast<double>() - pivot);
    g.mean = m.cast<float>();
    g.rotation = (qyaw * g.rotation.cast<double>()).normalized().cast<float>();
    const auto transfer = sh::rotate_z(g.transfer_sh(scene.degree), angle);
    for (int i = 0; i < transfer.count(); ++i) g.transfer[i] = static_cast<float>(transfer(0, i));
    if (!g.baked.empty()) {
      const auto baked = sh::rotate_z(g.baked_sh(scene.degree), angle);
      for (std::size_t i = 0; i < g.baked.size(); ++i) g.baked[i] = static_cast<float>(baked.values()[i]);
    }
    lo = lo.cwiseMin(g.mean.cast<double>());
    hi = hi.cwiseMax(g.mean.cast<double>());
  }
  if (!out.gaussians.empty()) {
    out.bounds.min = lo.array() - 0.1;
    out.bounds.max = hi.array() + 0.1;
  }
  return out;
}

}  // namespace rns
