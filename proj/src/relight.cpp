// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#include "rns/relight.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <thread>

#include <nlohmann/json.hpp>

#include "rns/fileutil.hpp"

namespace rns {

namespace {

using json = nlohmann::json;

const double kY00 = 0.5 / std::sqrt(kPi);

Vec3 sky_radiance(const Vec3& w) {
  const Vec3 sun = Vec3(std::cos(0.7) * std::cos(0.5), std::cos(0.7) * std::sin(0.5), std::sin(0.7)).normalized();
  if (w.z() < 0.0) return {0.22, 0.20, 0.15};
  const double t = std::sqrt(w.z());
  const Vec3 horizon{0.80, 0.84, 0.88};
  const Vec3 zenith{0.34, 0.50, 0.86};
  const double lobe = std::pow(std::max(0.0, w.dot(sun)), 24.0);
  return (1.0 - t) * horizon + t * zenith + lobe * Vec3(2.6, 2.3, 1.9);
}

// Y_k(w) dOmega for every texel of every face, face-major then row-major.
std::vector<double> cube_projection_table(int resolution, int degree) {
  const int k = sh::coeff_count(degree);
  std::vector<double> table(static_cast<std::size_t>(kCubeFaces) * resolution * resolution * k);
  std::vector<double> basis(k);
  std::size_t at = 0;
  for (int f = 0; f < kCubeFaces; ++f) {
    for (int row = 0; row < resolution; ++row) {
      for (int col = 0; col < resolution; ++col) {
        const double d_omega = cube_texel_solid_angle(row, col, resolution);
        sh::eval_basis_unchecked(degree, cube_texel_direction(f, row, col, resolution), basis);
        for (int j = 0; j < k; ++j) table[at++] = basis[j] * d_omega;
      }
    }
  }
  return table;
}

sh::ShCoeffs project_with_table(const VisibilityMaps& maps, int degree, const std::vector<double>& table) {
  const int k = sh::coeff_count(degree);
  sh::ShCoeffs out(degree, 1);
  const std::size_t texels = static_cast<std::size_t>(maps.resolution) * maps.resolution;
  for (int f = 0; f < kCubeFaces; ++f) {
    const auto& vis = maps.visible[f];
    for (std::size_t t = 0; t < texels; ++t) {
      if (!vis[t]) continue;
      const double* w = &table[(f * texels + t) * k];
      for (int j = 0; j < k; ++j) out(0, j) += w[j];
    }
  }
  return out;
}

void append_f32(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

float read_f32(const std::string& in, std::size_t at) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + b])) << (8 * b);
  return std::bit_cast<float>(bits);
}

LightEdit edit_from_json(const json& j) {
  LightEdit e;
  e.rotation = j.value("rotation_deg", 0.0) * kPi / 180.0;
  e.intensity = j.value("intensity", 1.0);
  if (j.contains("tint")) {
    const auto& t = j.at("tint");
    if (!t.is_array() || t.size() != 3) throw InputError("tint must be [r, g, b]");
    e.tint = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
  }
  return e;
}

}  // namespace

EnvLight constant_light(int degree, const Vec3& radiance) {
  EnvLight light{sh::ShCoeffs(degree, 3), "constant"};
  for (int c = 0; c < 3; ++c) light.coeffs(c, 0) = radiance[c] / kY00;
  return light;
}

EnvLight default_sky_light(int degree) {
  FloatImage pano{256, 128, 3, {}};
  pano.data.resize(static_cast<std::size_t>(pano.width) * pano.height * 3);
  for (int row = 0; row < pano.height; ++row) {
    const double theta = kPi * (row + 0.5) / pano.height;
    for (int col = 0; col < pano.width; ++col) {
      const double phi = 2.0 * kPi * (col + 0.5) / pano.width;
      const Vec3 w(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
      const Vec3 c = sky_radiance(w);
      for (int ch = 0; ch < 3; ++ch) pano.data[(row * pano.width + col) * 3 + ch] = static_cast<float>(c[ch]);
    }
  }
  EnvLight light = panorama_to_sh(pano, degree);
  light.name = "default-sky";
  return light;
}

EnvLight edit_light(const EnvLight& light, const LightEdit& edit) {
  if (!(edit.intensity >= 0.0)) throw InputError("light intensity must be >= 0");
  if (!((edit.tint.array() >= 0.0).all())) throw InputError("light tint must be >= 0");
  if (!std::isfinite(edit.rotation)) throw InputError("light rotation must be finite");
  EnvLight out{sh::rotate_z(light.coeffs, edit.rotation), light.name};
  for (int c = 0; c < 3; ++c) {
    for (double& v : out.coeffs.channel(c)) v *= edit.intensity;
    for (double& v : out.coeffs.channel(c)) v *= edit.tint[c];
  }
  return out;
}

std::array<NamedEdit, 4> light_presets() {
  return {{
      {"original", {}},
      {"overcast", {0.0, 0.7, {0.92, 0.96, 1.04}}},
      {"dusk", {kPi, 0.45, {0.82, 0.90, 1.18}}},
      {"morning", {0.5 * kPi, 1.2, {1.16, 1.0, 0.80}}},
  }};
}

EnvLight panorama_to_sh(const FloatImage& pano, int degree) {
  if (pano.width != 2 * pano.height || pano.height < 1) throw InputError("panorama width must be twice its height");
  if (pano.channels != 1 && pano.channels != 3) throw InputError("panorama needs 1 or 3 channels");
  for (float v : pano.data) {
    if (!(v >= 0.0f) || !std::isfinite(v)) throw InputError("panorama pixels must be finite and >= 0");
  }
  const int k = sh::coeff_count(degree);
  EnvLight light{sh::ShCoeffs(degree, 3), "panorama"};
  std::vector<double> basis(k);
  const double d_phi = 2.0 * kPi / pano.width;
  for (int row = 0; row < pano.height; ++row) {
    const double t0 = kPi * row / pano.height;
    const double t1 = kPi * (row + 1) / pano.height;
    const double theta = kPi * (row + 0.5) / pano.height;
    const double d_omega = d_phi * (std::cos(t0) - std::cos(t1));
    for (int col = 0; col < pano.width; ++col) {
      const double phi = d_phi * (col + 0.5);
      const Vec3 w(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
      sh::eval_basis_unchecked(degree, w, basis);
      for (int c = 0; c < 3; ++c) {
        const double radiance = pano.at(row, col, pano.channels == 3 ? c : 0);
        if (radiance == 0.0) continue;
        for (int j = 0; j < k; ++j) light.coeffs(c, j) += radiance * basis[j] * d_omega;
      }
    }
  }
  return light;
}

LightEdit parse_light_edit(const std::string& json_text) {
  try {
    return edit_from_json(json::parse(json_text));
  } catch (const json::exception& e) {
    throw InputError(std::string("bad light spec: ") + e.what());
  }
}

EnvLight load_light_spec(const std::filesystem::path& path, const EnvLight& base) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError("bad light spec " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw InputError("light spec must be a JSON object");
  EnvLight source = base;
  if (j.contains("panorama")) {
    std::filesystem::path pano = j.at("panorama").get<std::string>();
    if (pano.is_relative()) pano = path.parent_path() / pano;
    source = panorama_to_sh(read_pfm(pano), base.degree());
    source.name = pano.filename().string();
  }
  try {
    return edit_light(source, edit_from_json(j));
  } catch (const json::exception& e) {
    throw InputError(std::string("bad light spec: ") + e.what());
  }
}

VisibilityMaps probe_visibility(const CubeFaces& faces, double d_thresh) {
  VisibilityMaps maps;
  maps.resolution = faces.resolution;
  const std::size_t texels = static_cast<std::size_t>(faces.resolution) * faces.resolution;
  for (int f = 0; f < kCubeFaces; ++f) {
    if (faces.depth[f].size() != texels) throw InputError("probe depth maps must share one resolution");
    maps.visible[f].resize(texels);
    for (std::size_t t = 0; t < texels; ++t) maps.visible[f][t] = faces.depth[f][t] >= d_thresh ? 1 : 0;
  }
  return maps;
}

sh::ShCoeffs project_visibility_sh(const VisibilityMaps& maps, int degree) {
  return project_with_table(maps, degree, cube_projection_table(maps.resolution, degree));
}

Vec3 GridSpec::node_position(int ix, int iy, int iz) const {
  const Vec3 local(ix * cell, iy * cell, iz * cell);
  return origin + Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * local;
}

Vec3 GridSpec::centre() const {
  return origin + Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
                      Vec3(0.5 * (dims[0] - 1) * cell, 0.5 * (dims[1] - 1) * cell, 0.5 * (dims[2] - 1) * cell);
}

void GridSpec::validate() const {
  if (!(cell > 0.0)) throw InputError("grid cell size must be > 0");
  for (int d : dims) {
    if (d < 2) throw InputError("grid needs at least 2 nodes per axis");
  }
}

GridSpec grid_for_scene(const SceneModel& scene, double cell) {
  GridSpec g;
  g.cell = cell;
  // Probes sit at voxel centres, so the lowest layer floats half a cell
  // above the ground sheet instead of inside it.
  const Vec3 lo(scene.bounds.min.x(), scene.bounds.min.y(), scene.ground_z);
  g.origin = lo + Vec3::Constant(0.5 * cell);
  for (int a = 0; a < 3; ++a) {
    g.dims[a] = std::max(2, static_cast<int>(std::ceil((scene.bounds.max[a] - lo[a]) / cell - 1e-9)));
  }
  return g;
}

sh::ShCoeffs OcclusionField::node(int ix, int iy, int iz) const {
  const int k = sh::coeff_count(degree);
  const float* p = &coeffs[node_index(ix, iy, iz) * k];
  return sh::ShCoeffs(degree, 1, std::vector<double>(p, p + k));
}

void OcclusionField::set_node(int ix, int iy, int iz, const sh::ShCoeffs& b) {
  const int k = sh::coeff_count(degree);
  float* p = &coeffs[node_index(ix, iy, iz) * k];
  for (int j = 0; j < k; ++j) p[j] = static_cast<float>(b(0, j));
}

void OcclusionField::validate() const {
  grid.validate();
  if (degree < 0 || degree > sh::kMaxDegree) throw InputError("field SH degree out of range");
  const std::size_t k = sh::coeff_count(degree);
  if (coeffs.size() != grid.node_count() * k) throw InputError("field coefficient count does not match grid");
  const double full = 2.0 * std::sqrt(kPi);
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    const float dc = coeffs[n * k];
    if (!(dc >= 0.0f && dc <= full + 1e-6)) {
      throw InputError("probe " + std::to_string(n) + " DC " + std::to_string(dc) + " outside [0, 2 sqrt(pi)]");
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (!std::isfinite(coeffs[n * k + j])) throw InputError("non-finite probe coefficient");
    }
  }
}

OcclusionField OcclusionField::rotated_z(double angle, const Vec3& pivot) const {
  OcclusionField out = *this;
  const Eigen::AngleAxisd r(angle, Vec3::UnitZ());
  out.grid.origin = pivot + r * (grid.origin - pivot);
  out.grid.yaw = grid.yaw + angle;
  for (int iz = 0; iz < grid.dims[2]; ++iz) {
    for (int iy = 0; iy < grid.dims[1]; ++iy) {
      for (int ix = 0; ix < grid.dims[0]; ++ix) out.set_node(ix, iy, iz, sh::rotate_z(node(ix, iy, iz), angle));
    }
  }
  return out;
}

ProbeRenderOptions field_probe_options(const FieldBuildOptions& opts) {
  ProbeRenderOptions po;
  po.far_clip = opts.d_thresh;
  po.method = opts.method;
  return po;
}

double probe_cull_radius(const SceneModel& scene, const FieldBuildOptions& opts) {
  double sigma = 0.0;
  for (const auto& g : scene.gaussians) sigma = std::max(sigma, static_cast<double>(g.scale.maxCoeff()));
  // A ray hit lies inside the 3-sigma ellipsoid and within d_thresh of the
  // node. A cube face clips on axial depth, which reaches sqrt(3) further
  // in the corners, and its footprints spread a little wider.
  if (opts.method == ProbeMethod::kRay) return opts.d_thresh + 3.0 * sigma;
  return std::sqrt(3.0) * (opts.d_thresh + 5.0 * sigma);
}

OcclusionField build_occlusion_field(const SceneModel& scene, const GridSpec& grid, const FieldBuildOptions& opts) {
  grid.validate();
  if (opts.face_resolution < 8) throw InputError("probe face resolution must be >= 8");
  if (!(opts.d_thresh > 0.0)) throw InputError("depth threshold must be > 0");

  OcclusionField field;
  field.grid = grid;
  field.degree = opts.degree;
  field.d_thresh = opts.d_thresh;
  field.face_resolution = opts.face_resolution;
  const int k = sh::coeff_count(opts.degree);
  field.coeffs.assign(grid.node_count() * k, 0.0f);

  const auto table = cube_projection_table(opts.face_resolution, opts.degree);
  VisibilityMaps all_visible;
  all_visible.resolution = opts.face_resolution;
  for (auto& v : all_visible.visible) v.assign(static_cast<std::size_t>(opts.face_resolution) * opts.face_resolution, 1);
  const sh::ShCoeffs full = project_with_table(all_visible, opts.degree, table);

  std::vector<Vec3> centres;
  centres.reserve(scene.gaussians.size());
  for (const auto& g : scene.gaussians) centres.push_back(g.mean.cast<double>());
  const KdTree index(std::move(centres));
  const double cull = probe_cull_radius(scene, opts);
  const ProbeRenderOptions probe_opts = field_probe_options(opts);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    std::vector<std::uint32_t> nearby;
    for (std::size_t n = next++; n < grid.node_count(); n = next++) {
      const int ix = static_cast<int>(n % grid.dims[0]);
      const int iy = static_cast<int>((n / grid.dims[0]) % grid.dims[1]);
      const int iz = static_cast<int>(n / (static_cast<std::size_t>(grid.dims[0]) * grid.dims[1]));
      const Vec3 q = grid.node_position(ix, iy, iz);
      index.radius_search(q, cull, nearby);
      if (nearby.empty()) {
        field.set_node(ix, iy, iz, full);
        continue;
      }
      const CubeFaces faces = render_probe_faces(scene, q, opts.face_resolution, probe_opts,
                                                 std::span<const std::uint32_t>(nearby));
      field.set_node(ix, iy, iz, project_with_table(probe_visibility(faces, opts.d_thresh), opts.degree, table));
    }
  };
  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, grid.node_count()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return field;
}

std::string encode_occlusion_field(const OcclusionField& field) {
  field.validate();
  const auto& g = field.grid;
  json header = {
      {"format", "rns-occlusion"},
      {"version", 1},
      {"degree", field.degree},
      {"origin", {g.origin.x(), g.origin.y(), g.origin.z()}},
      {"cell", g.cell},
      {"dims", {g.dims[0], g.dims[1], g.dims[2]}},
      {"yaw", g.yaw},
      {"d_thresh", field.d_thresh},
      {"face_resolution", field.face_resolution},
  };
  std::string out = header.dump();
  out.push_back('\n');
  out.reserve(out.size() + 4 * field.coeffs.size());
  for (float v : field.coeffs) append_f32(out, v);
  return out;
}

OcclusionField decode_occlusion_field(const std::string& bytes) {
  const std::size_t eol = bytes.find('\n');
  if (eol == std::string::npos) throw ParseError("field header is not terminated", bytes.size(), 1);
  OcclusionField field;
  try {
    const json h = json::parse(bytes.substr(0, eol));
    if (h.value("format", std::string()) != "rns-occlusion") throw ParseError("not an occlusion field file", 0, 1);
    if (h.at("version").get<int>() != 1) throw ParseError("unsupported occlusion field version", 0, 1);
    field.degree = h.at("degree").get<int>();
    const auto& o = h.at("origin");
    field.grid.origin = {o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()};
    field.grid.cell = h.at("cell").get<double>();
    const auto& d = h.at("dims");
    field.grid.dims = {d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
    field.grid.yaw = h.value("yaw", 0.0);
    field.d_thresh = h.at("d_thresh").get<double>();
    field.face_resolution = h.at("face_resolution").get<int>();
  } catch (const ParseError&) {
    throw;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("field header is not valid JSON: ") + e.what(), e.byte, 1);
  } catch (const std::exception& e) {
    throw ParseError(std::string("bad field header: ") + e.what(), 0, 1);
  }
  if (field.degree < 0 || field.degree > sh::kMaxDegree) throw ParseError("field SH degree out of range", 0, 1);
  for (int dim : field.grid.dims) {
    if (dim < 2) throw ParseError("field grid needs at least 2 nodes per axis", 0, 1);
  }
  const std::size_t n = field.grid.node_count() * sh::coeff_count(field.degree);
  const std::size_t expected = eol + 1 + 4 * n;
  if (bytes.size() < expected) throw ParseError("field payload truncated", bytes.size());
  if (bytes.size() > expected) throw ParseError("trailing bytes after field payload", expected);
  field.coeffs.resize(n);
  for (std::size_t i = 0; i < n; ++i) field.coeffs[i] = read_f32(bytes, eol + 1 + 4 * i);
  try {
    field.validate();
  } catch (const InputError& e) {
    throw ParseError(e.what(), eol + 1);
  }
  return field;
}

void save_occlusion_field(const OcclusionField& field, const std::filesystem::path& path) {
  write_file_atomic(path, encode_occlusion_field(field));
}

OcclusionField load_occlusion_field(const std::filesystem::path& path) {
  return decode_occlusion_field(read_file(path));
}

sh::ShCoeffs interpolate_occlusion(const OcclusionField& field, const Vec3& mu, const Vec3& normal) {
  const GridSpec& g = field.grid;
  const Vec3 local = Eigen::AngleAxisd(-g.yaw, Vec3::UnitZ()) * (mu - g.origin) / g.cell;
  std::array<int, 3> base{};
  std::array<double, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    const double x = std::clamp(local[a], 0.0, static_cast<double>(g.dims[a] - 1));
    base[a] = std::min(static_cast<int>(std::floor(x)), g.dims[a] - 2);
    frac[a] = x - base[a];
  }
  const int k = sh::coeff_count(field.degree);
  std::vector<double> masked(k, 0.0), plain(k, 0.0);
  double masked_weight = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    const int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
    const double w = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) * (dz ? frac[2] : 1.0 - frac[2]);
    const int ix = base[0] + dx, iy = base[1] + dy, iz = base[2] + dz;
    const float* b = &field.coeffs[field.node_index(ix, iy, iz) * k];
    const bool front = (g.node_position(ix, iy, iz) - mu).dot(normal) >= 0.0;
    for (int j = 0; j < k; ++j) plain[j] += w * b[j];
    if (front && w > 0.0) {
      masked_weight += w;
      for (int j = 0; j < k; ++j) masked[j] += w * b[j];
    }
  }
  if (masked_weight > 0.0) {
    for (double& v : masked) v /= masked_weight;
    return sh::ShCoeffs(field.degree, 1, std::move(masked));
  }
  return sh::ShCoeffs(field.degree, 1, std::move(plain));
}

ShadingScales furnace_scales() { return {1.0, kY00, 1.0 / kPi}; }

Vec3 shade(const Gaussian& g, const EnvLight& light, const sh::ShCoeffs& occlusion, const ShadingScales& scales) {
  const int degree = light.degree();
  const int k = sh::coeff_count(degree);
  if (occlusion.degree() != degree || static_cast<int>(g.transfer.size()) != k) {
    throw InputError("shading needs light, occlusion and transfer of equal SH degree");
  }
  const double gain = scales.light * scales.occlusion * scales.transfer;
  Vec3 c = Vec3::Zero();
  for (int ch = 0; ch < 3; ++ch) {
    double sum = 0.0;
    for (int m = 0; m < k; ++m) sum += light.coeffs(ch, m) * occlusion(0, m) * g.transfer[m];
    c[ch] = g.albedo[ch] * gain * sum;
  }
  return c;
}

Background sky_background(const EnvLight& light, const ShadingScales& scales) {
  Vec3 mean;
  for (int c = 0; c < 3; ++c) mean[c] = scales.light * light.coeffs(c, 0) * kY00;
  return {0.8 * mean, 1.15 * mean};
}

RelitContext::RelitContext(std::shared_ptr<const SceneModel> scene, std::shared_ptr<const OcclusionField> field,
                           ShadingScales scales)
    : scene_(std::move(scene)), field_(std::move(field)), scales_(scales) {
  if (scene_->degree != field_->degree) throw InputError("scene and occlusion field SH degrees differ");
  const int k = sh::coeff_count(field_->degree);
  occlusion_.resize(scene_->gaussians.size() * k);
  for (std::size_t i = 0; i < scene_->gaussians.size(); ++i) {
    const Gaussian& g = scene_->gaussians[i];
    const sh::ShCoeffs o = interpolate_occlusion(*field_, g.mean.cast<double>(), g.normal());
    std::copy(o.values().begin(), o.values().end(), occlusion_.begin() + i * k);
  }
}

sh::ShCoeffs RelitContext::occlusion(std::size_t i) const {
  const int k = sh::coeff_count(field_->degree);
  return sh::ShCoeffs(field_->degree, 1, std::vector<double>(occlusion_.begin() + i * k, occlusion_.begin() + (i + 1) * k));
}

std::vector<Vec3f> RelitContext::colors(const EnvLight& light) const {
  if (light.degree() != field_->degree) throw InputError("light degree does not match the scene");
  const int k = sh::coeff_count(field_->degree);
  const double gain = scales_.light * scales_.occlusion * scales_.transfer;
  std::vector<Vec3f> out(scene_->gaussians.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Gaussian& g = scene_->gaussians[i];
    const double* o = &occlusion_[i * k];
    for (int ch = 0; ch < 3; ++ch) {
      double sum = 0.0;
      for (int m = 0; m < k; ++m) sum += light.coeffs(ch, m) * o[m] * g.transfer[m];
      out[i][ch] = static_cast<float>(g.albedo[ch] * gain * sum);
    }
  }
  return out;
}

FrameBuffer RelitContext::render(const Camera& cam, const EnvLight& light, RenderOptions opts) const {
  const auto c = colors(light);
  if (!opts.background) opts.background = sky_background(light, scales_);
  return render_colors(*scene_, cam, c, opts);
}

FrameBuffer RelitContext::render(const Camera& cam, const EnvLight& light, std::span<const Vec3f> colors,
                                 RenderOptions opts) const {
  if (!opts.background) opts.background = sky_background(light, scales_);
  return render_colors(*scene_, cam, colors, opts);
}

}  // namespace rns
