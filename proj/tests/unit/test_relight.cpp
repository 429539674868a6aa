// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "rns/fileutil.hpp"
#include "rns/relight.hpp"

using namespace rns;

namespace {

const double kFull = 2.0 * std::sqrt(kPi);

VisibilityMaps maps_from(int res, const std::function<bool(const Vec3&)>& visible) {
  VisibilityMaps m;
  m.resolution = res;
  for (int f = 0; f < kCubeFaces; ++f) {
    m.visible[f].resize(res * res);
    for (int r = 0; r < res; ++r)
      for (int c = 0; c < res; ++c) m.visible[f][r * res + c] = visible(cube_texel_direction(f, r, c, res));
  }
  return m;
}

OcclusionField random_field(std::mt19937_64& rng, std::array<int, 3> dims, double cell, double yaw = 0.0) {
  OcclusionField f;
  f.grid.origin = Vec3(-1.0, 2.0, 0.5);
  f.grid.cell = cell;
  f.grid.dims = dims;
  f.grid.yaw = yaw;
  f.degree = 2;
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  f.coeffs.resize(f.grid.node_count() * 9);
  for (std::size_t i = 0; i < f.coeffs.size(); ++i) f.coeffs[i] = i % 9 == 0 ? 1.7f + 1.5f * u(rng) : u(rng);
  return f;
}

Gaussian lambertian(const Vec3& albedo, const Vec3& normal) {
  Gaussian g;
  g.albedo = albedo.cast<float>();
  g.transfer = make_transfer(2, normal, TransferInit::kCosineLobe);
  return g;
}

SceneModel small_forest(int trees, double half, std::uint64_t seed = 3) {
  ForestParams p;
  p.seed = seed;
  p.n_trees = trees;
  p.area_min = {-half, -half};
  p.area_max = {half, half};
  return gen_forest(p);
}

}  // namespace

TEST_CASE("depth threshold") {
  CubeFaces faces;
  faces.resolution = 8;
  for (auto& d : faces.depth) d.assign(64, std::numeric_limits<float>::infinity());
  auto all = probe_visibility(faces, 0.5);
  for (const auto& v : all.visible) CHECK(std::count(v.begin(), v.end(), 1) == 64);
  for (auto& d : faces.depth) d.assign(64, 0.1f);
  all = probe_visibility(faces, 0.5);
  for (const auto& v : all.visible) CHECK(std::count(v.begin(), v.end(), 0) == 64);
  faces.depth[2][0] = 0.49f;
  faces.depth[2][1] = 0.51f;
  faces.depth[2][2] = 0.5f;
  all = probe_visibility(faces, 0.5);
  CHECK(all.visible[2][0] == 0);
  CHECK(all.visible[2][1] == 1);
  CHECK(all.visible[2][2] == 1);
}

TEST_CASE("visibility projection against analytic and Monte-Carlo integrals") {
  const auto full = project_visibility_sh(maps_from(32, [](const Vec3&) { return true; }), 2);
  CHECK(full(0, 0) == doctest::Approx(kFull).epsilon(1e-9));
  for (int j = 1; j < 9; ++j) CHECK(std::abs(full(0, j)) < 0.02);

  const auto none = project_visibility_sh(maps_from(16, [](const Vec3&) { return false; }), 2);
  for (int j = 0; j < 9; ++j) CHECK(none(0, j) == 0.0);

  const auto upper = project_visibility_sh(maps_from(32, [](const Vec3& w) { return w.z() >= 0.0; }), 2);
  const auto mc = oracle::mc_projection(2, 2000000, 77, [](const Vec3& w) { return w.z() >= 0.0; });
  CHECK(upper(0, 0) == doctest::Approx(std::sqrt(kPi)).epsilon(0.02));
  for (int j = 0; j < 9; ++j) {
    if (std::abs(mc[j]) > 0.1) {
      CHECK(upper(0, j) == doctest::Approx(mc[j]).epsilon(0.02));
    } else {
      CHECK(std::abs(upper(0, j) - mc[j]) < 0.02);
    }
  }
}

TEST_CASE("occlusion field of an empty region is full visibility everywhere") {
  SceneModel s;
  s.bounds = {Vec3(-2, -2, 0), Vec3(2, 2, 2)};
  const GridSpec g = grid_for_scene(s, 1.0);
  const OcclusionField f = build_occlusion_field(s, g);
  const auto ref = project_visibility_sh(maps_from(kDefaultProbeResolution, [](const Vec3&) { return true; }), 2);
  for (std::size_t n = 0; n < g.node_count(); ++n)
    for (int j = 0; j < 9; ++j) CHECK(f.coeffs[n * 9 + j] == static_cast<float>(ref(0, j)));
}

TEST_CASE("field build is deterministic, thread-count independent and matches unculled probes") {
  const SceneModel s = small_forest(3, 6.0);
  GridSpec g = grid_for_scene(s, 1.5);
  for (ProbeMethod method : {ProbeMethod::kRay, ProbeMethod::kSplat}) {
    CAPTURE(static_cast<int>(method));
    FieldBuildOptions one;
    one.threads = 1;
    one.face_resolution = 16;
    one.method = method;
    FieldBuildOptions many = one;
    many.threads = 3;
    const OcclusionField a = build_occlusion_field(s, g, one);
    const OcclusionField b = build_occlusion_field(s, g, many);
    CHECK(a.coeffs == b.coeffs);
    CHECK_NOTHROW(a.validate());

    // The neighbourhood cull and the far clip must not change any probe.
    std::mt19937_64 rng(2);
    ProbeRenderOptions unculled;
    unculled.method = method;
    for (int trial = 0; trial < 40; ++trial) {
      const int ix = std::uniform_int_distribution<int>(0, g.dims[0] - 1)(rng);
      const int iy = std::uniform_int_distribution<int>(0, g.dims[1] - 1)(rng);
      const int iz = std::uniform_int_distribution<int>(0, std::min(g.dims[2] - 1, 7))(rng);
      const CubeFaces faces = render_probe_faces(s, g.node_position(ix, iy, iz), 16, unculled);
      const auto ref = project_visibility_sh(probe_visibility(faces, one.d_thresh), 2);
      const auto got = a.node(ix, iy, iz);
      for (int j = 0; j < 9; ++j) CHECK(got(0, j) == doctest::Approx(ref(0, j)).epsilon(1e-6));
    }
  }
}

std::vector<Vec3> crown_centres(const SceneModel& s) {
  // Crown centres sit on top of the tallest trunk segment of each tree.
  std::vector<Vec3> crowns;
  for (const auto& g : s.gaussians) {
    if (g.opacity != 0.95f) continue;
    const Vec3 m = g.mean.cast<double>();
    auto it = std::find_if(crowns.begin(), crowns.end(),
                           [&](const Vec3& c) { return (c.head<2>() - m.head<2>()).norm() < 1e-6; });
    if (it == crowns.end()) {
      crowns.push_back(m);
    } else if (m.z() > it->z()) {
      *it = m;
    }
  }
  return crowns;
}

TEST_CASE("canopy probes match per-texel ray evaluation") {
  const SceneModel s = small_forest(4, 8.0, 5);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  FieldBuildOptions opts;
  opts.face_resolution = 16;
  GridSpec g;
  g.cell = 1.0;
  g.dims = {2, 2, 2};
  int occluded = 0;
  for (const Vec3& crown : crown_centres(s)) {
    for (int k = 0; k < 2; ++k) {
      const Vec3 c = crown + Vec3(jitter(rng), jitter(rng), jitter(rng));
      g.origin = c;
      const OcclusionField f = build_occlusion_field(s, g, opts);
      const auto ref = project_visibility_sh(maps_from(16, [&](const Vec3& w) {
        return !(oracle::ray_depth(s, c, w, opts.d_thresh) <= opts.d_thresh);
      }), 2);
      const auto got = f.node(0, 0, 0);
      for (int j = 0; j < 9; ++j) CHECK(got(0, j) == doctest::Approx(ref(0, j)).epsilon(1e-6));
      occluded += ref(0, 0) < 0.9 * kFull;
    }
  }
  CHECK(occluded >= 4);
}

TEST_CASE("probes in canopies are dark, probes in open air are bright") {
  const SceneModel s = small_forest(4, 8.0, 5);
  const std::vector<Vec3> crowns = crown_centres(s);
  REQUIRE(crowns.size() == 4);
  GridSpec g;
  g.cell = 1.0;
  g.dims = {2, 2, 2};
  for (const Vec3& c : crowns) {
    g.origin = c + Vec3(0, 0, 0.175);
    const OcclusionField f = build_occlusion_field(s, g);
    CHECK(f.coeffs[0] < 0.5 * kFull);
  }
  g.origin = Vec3(0, 0, 15.0);
  const OcclusionField open = build_occlusion_field(s, g);
  for (std::size_t n = 0; n < 8; ++n) CHECK(open.coeffs[n * 9] > 0.9 * kFull);
}

TEST_CASE("field files round-trip and reject bad content") {
  std::mt19937_64 rng(1);
  const OcclusionField f = random_field(rng, {3, 4, 2}, 0.5, 0.3);
  const OcclusionField g = decode_occlusion_field(encode_occlusion_field(f));
  CHECK(g.coeffs == f.coeffs);
  CHECK(g.grid.dims == f.grid.dims);
  CHECK(g.grid.origin == f.grid.origin);
  CHECK(g.grid.yaw == f.grid.yaw);
  const std::string bytes = encode_occlusion_field(f);
  CHECK_THROWS_AS(decode_occlusion_field(bytes.substr(0, bytes.size() - 1)), ParseError);
  CHECK_THROWS_AS(decode_occlusion_field(bytes + std::string(1, '\0')), ParseError);
  OcclusionField bad = f;
  bad.coeffs[0] = 4.0f;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad.coeffs[0] = -0.1f;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("interpolation") {
  std::mt19937_64 rng(23);
  const OcclusionField f = random_field(rng, {4, 3, 5}, 0.7, 0.4);

  SUBCASE("at a node") {
    const auto o = interpolate_occlusion(f, f.grid.node_position(2, 1, 3), Vec3::UnitZ());
    const auto b = f.node(2, 1, 3);
    for (int j = 0; j < 9; ++j) CHECK(o(0, j) == b(0, j));
  }
  SUBCASE("unmasked blend matches the trilinear oracle") {
    // A zero normal keeps every probe: (q - mu) . 0 >= 0.
    std::uniform_real_distribution<double> u(-0.3, 1.2);
    const auto& g = f.grid;
    for (int i = 0; i < 200; ++i) {
      const Vec3 local(u(rng) * (g.dims[0] - 1), u(rng) * (g.dims[1] - 1), u(rng) * (g.dims[2] - 1));
      const Vec3 mu = g.origin + oracle::rot_z(g.yaw) * (local * g.cell);
      const auto o = interpolate_occlusion(f, mu, Vec3::Zero());
      const auto ref = oracle::trilinear(f, mu);
      for (int j = 0; j < 9; ++j) CHECK(std::abs(o(0, j) - ref[j]) <= 1e-9);
    }
  }
  SUBCASE("uniform field at a cell centre") {
    OcclusionField u = f;
    for (std::size_t n = 0; n < u.grid.node_count(); ++n)
      for (int j = 0; j < 9; ++j) u.coeffs[n * 9 + j] = u.coeffs[j];
    const Vec3 mu = u.grid.origin + oracle::rot_z(u.grid.yaw) * Vec3(1.5, 0.5, 2.5) * u.grid.cell;
    const auto o = interpolate_occlusion(u, mu, Vec3(0.3, 0.2, 0.9).normalized());
    for (int j = 0; j < 9; ++j) CHECK(o(0, j) == doctest::Approx(u.coeffs[j]).epsilon(1e-6));
  }
  SUBCASE("back-facing probes are dropped and the rest renormalised") {
    const auto& g = f.grid;
    const Vec3 mu = g.origin + oracle::rot_z(g.yaw) * Vec3(1.25, 0.6, 2.3) * g.cell;
    const Vec3 n = Vec3::UnitZ();
    // Only the upper layer (iz = 3) lies in front of an up-facing normal.
    const auto o = interpolate_occlusion(f, mu, n);
    const double tx = 0.25, ty = 0.6;
    for (int j = 0; j < 9; ++j) {
      double want = 0.0;
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx)
          want += (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * f.node(1 + dx, dy, 3)(0, j);
      CHECK(o(0, j) == doctest::Approx(want).epsilon(1e-6));
    }
    // Convex combination of the surviving probes.
    for (int j = 0; j < 9; ++j) {
      double lo = 1e9, hi = -1e9;
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
          lo = std::min(lo, f.node(1 + dx, dy, 3)(0, j));
          hi = std::max(hi, f.node(1 + dx, dy, 3)(0, j));
        }
      CHECK(o(0, j) >= lo - 1e-9);
      CHECK(o(0, j) <= hi + 1e-9);
    }
  }
  SUBCASE("all probes masked falls back to the plain blend") {
    OcclusionField flat = f;
    flat.grid.dims[2] = 2;
    flat.coeffs.resize(flat.grid.node_count() * 9);
    const Vec3 mu = flat.grid.origin + oracle::rot_z(flat.grid.yaw) * Vec3(1.5, 0.5, 1.5) * flat.grid.cell;
    // mu sits above the top layer after clamping to the grid: every probe is behind an up normal.
    const auto o = interpolate_occlusion(flat, mu, Vec3::UnitZ());
    const auto ref = oracle::trilinear(flat, mu);
    for (int j = 0; j < 9; ++j) CHECK(o(0, j) == doctest::Approx(ref[j]).epsilon(1e-9));
  }
}

TEST_CASE("rotating the field rotates what it interpolates") {
  std::mt19937_64 rng(41);
  const OcclusionField f = random_field(rng, {3, 3, 3}, 1.0);
  const Vec3 pivot(0.5, 3.0, 0.0);
  const double angle = 0.9;
  const OcclusionField r = f.rotated_z(angle, pivot);
  const Vec3 mu = f.grid.origin + Vec3(0.4, 1.3, 0.8);
  const Vec3 n = Vec3(0.2, -0.4, 0.9).normalized();
  const auto a = sh::rotate_z(interpolate_occlusion(f, mu, n), angle);
  const auto b = interpolate_occlusion(r, pivot + oracle::rot_z(angle) * (mu - pivot), oracle::rot_z(angle) * n);
  for (int j = 0; j < 9; ++j) CHECK(a(0, j) == doctest::Approx(b(0, j)).epsilon(1e-5));
}

TEST_CASE("shading") {
  EnvLight one{sh::ShCoeffs(2, 3), "unit"};
  for (int c = 0; c < 3; ++c) one.coeffs(c, 0) = 1.0;
  sh::ShCoeffs o(2, 1);
  o(0, 0) = 1.0;
  Gaussian g;
  g.albedo = {1, 1, 1};
  g.transfer.assign(9, 0.0f);
  g.transfer[0] = 1.0f;
  CHECK(shade(g, one, o) == Vec3(1, 1, 1));
  g.albedo = {0, 0, 0};
  CHECK(shade(g, default_sky_light(), o) == Vec3::Zero());

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  EnvLight a{sh::ShCoeffs(2, 3), "a"}, b{sh::ShCoeffs(2, 3), "b"};
  sh::ShCoeffs occ(2, 1);
  for (int j = 0; j < 9; ++j) {
    occ(0, j) = n(rng);
    for (int c = 0; c < 3; ++c) {
      a.coeffs(c, j) = n(rng);
      b.coeffs(c, j) = n(rng);
    }
  }
  Gaussian h = lambertian(Vec3(0.3, 0.6, 0.9), Vec3(0.1, 0.2, 1.0).normalized());
  const double sa = 0.7, sb = -1.3;
  const EnvLight mix{a.coeffs * sa + b.coeffs * sb, "mix"};
  const Vec3 lhs = shade(h, mix, occ), rhs = sa * shade(h, a, occ) + sb * shade(h, b, occ);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);

  CHECK_THROWS_AS(shade(h, EnvLight{sh::ShCoeffs(1, 3), "low"}, occ), InputError);
}

TEST_CASE("furnace: unoccluded Lambertian splat under unit sky returns its albedo") {
  const EnvLight sky = constant_light(2, Vec3::Ones());
  const auto full = project_visibility_sh(maps_from(32, [](const Vec3&) { return true; }), 2);
  const Gaussian g = lambertian(Vec3(0.2, 0.5, 0.8), Vec3::UnitZ());
  const Vec3 c = shade(g, sky, full, furnace_scales());
  CHECK(c.x() == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(c.y() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(c.z() == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("light edits") {
  const EnvLight base = default_sky_light();
  const EnvLight same = edit_light(base, {});
  CHECK(same.coeffs == base.coeffs);

  const EnvLight half = edit_light(base, {0.0, 0.5, Vec3::Ones()});
  for (std::size_t i = 0; i < base.coeffs.size(); ++i) CHECK(half.coeffs.values()[i] == 0.5 * base.coeffs.values()[i]);

  const LightEdit e{0.6, 1.4, Vec3(0.9, 1.0, 1.1)};
  const EnvLight edited = edit_light(base, e);
  const auto rotated = sh::rotate_z(base.coeffs, 0.6);
  for (int c = 0; c < 3; ++c)
    for (int j = 0; j < 9; ++j) CHECK(edited.coeffs(c, j) == doctest::Approx(e.tint[c] * 1.4 * rotated(c, j)));

  const EnvLight dc = constant_light(2, Vec3(0.3, 0.4, 0.5));
  CHECK(edit_light(dc, {2.1, 1.0, Vec3::Ones()}).coeffs == dc.coeffs);

  CHECK_THROWS_AS(edit_light(base, {0.0, -0.1, Vec3::Ones()}), InputError);
  CHECK_THROWS_AS(edit_light(base, {0.0, 1.0, Vec3(1.0, -0.1, 1.0)}), InputError);
  CHECK(light_presets()[0].edit.is_identity());
}

TEST_CASE("panorama projection") {
  auto pano = [](int h, const std::function<double(const Vec3&)>& fn) {
    FloatImage img{2 * h, h, 3, {}};
    for (int r = 0; r < h; ++r) {
      const double theta = kPi * (r + 0.5) / h;
      for (int c = 0; c < 2 * h; ++c) {
        const double phi = 2.0 * kPi * (c + 0.5) / (2 * h);
        const Vec3 w(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
        for (int k = 0; k < 3; ++k) img.data.push_back(static_cast<float>(fn(w)));
      }
    }
    return img;
  };
  const EnvLight ones = panorama_to_sh(pano(64, [](const Vec3&) { return 1.0; }), 2);
  for (int c = 0; c < 3; ++c) {
    CHECK(ones.coeffs(c, 0) == doctest::Approx(kFull).epsilon(1e-9));
    for (int j = 1; j < 9; ++j) CHECK(std::abs(ones.coeffs(c, j)) < 0.01);
  }
  const EnvLight zero = panorama_to_sh(pano(16, [](const Vec3&) { return 0.0; }), 2);
  for (double v : zero.coeffs.values()) CHECK(v == 0.0);

  const EnvLight top = panorama_to_sh(pano(64, [](const Vec3& w) { return w.z() > 0 ? 1.0 : 0.0; }), 2);
  CHECK(top.coeffs(0, 0) == doctest::Approx(std::sqrt(kPi)).epsilon(0.02));

  // Orientation: a lobe towards +y lands in Y_1,-1 and one towards +x in Y_1,1.
  const double y1 = std::sqrt(3.0 / (4.0 * kPi));
  const EnvLight py = panorama_to_sh(pano(64, [](const Vec3& w) { return 1.0 + 0.5 * w.y(); }), 2);
  CHECK(py.coeffs(0, sh::index(1, -1)) == doctest::Approx(0.5 / y1).epsilon(1e-3));
  CHECK(std::abs(py.coeffs(0, sh::index(1, 1))) < 1e-6);
  const EnvLight px = panorama_to_sh(pano(64, [](const Vec3& w) { return 1.0 + 0.5 * w.x(); }), 2);
  CHECK(px.coeffs(0, sh::index(1, 1)) == doctest::Approx(0.5 / y1).epsilon(1e-3));

  FloatImage bad{10, 10, 3, std::vector<float>(300, 1.0f)};
  CHECK_THROWS_AS(panorama_to_sh(bad, 2), InputError);
  FloatImage neg = pano(8, [](const Vec3&) { return 1.0; });
  neg.data[5] = -0.1f;
  CHECK_THROWS_AS(panorama_to_sh(neg, 2), InputError);
}

TEST_CASE("light spec files") {
  const auto dir = std::filesystem::temp_directory_path() / "rns_light_spec";
  std::filesystem::create_directories(dir);
  const EnvLight base = default_sky_light();
  write_file_atomic(dir / "edit.json", R"({"rotation_deg": 90, "intensity": 0.5, "tint": [1, 0.5, 1]})");
  const EnvLight e = load_light_spec(dir / "edit.json", base);
  const EnvLight want = edit_light(base, {kPi / 2, 0.5, Vec3(1, 0.5, 1)});
  for (std::size_t i = 0; i < want.coeffs.size(); ++i) CHECK(e.coeffs.values()[i] == doctest::Approx(want.coeffs.values()[i]));

  FloatImage img{16, 8, 3, std::vector<float>(16 * 8 * 3, 2.0f)};
  write_pfm(dir / "sky.pfm", img);
  write_file_atomic(dir / "pano.json", R"({"panorama": "sky.pfm"})");
  const EnvLight p = load_light_spec(dir / "pano.json", base);
  CHECK(p.coeffs(1, 0) == doctest::Approx(2.0 * kFull).epsilon(1e-6));

  write_file_atomic(dir / "bad.json", R"({"tint": [1, 2]})");
  CHECK_THROWS_AS(load_light_spec(dir / "bad.json", base), InputError);
  write_file_atomic(dir / "broken.json", "{");
  CHECK_THROWS_AS(load_light_spec(dir / "broken.json", base), InputError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("relit frames are linear in the light") {
  const auto scene = std::make_shared<const SceneModel>(small_forest(3, 6.0));
  FieldBuildOptions opts;
  opts.face_resolution = 16;
  const auto field = std::make_shared<const OcclusionField>(build_occlusion_field(*scene, grid_for_scene(*scene, 2.0), opts));
  const RelitContext ctx(scene, field);
  const Camera cam = Camera::drone(Vec3(-5, 0, 1.5), 0.2, 48, 32, kPi / 2);
  const EnvLight light = default_sky_light();
  const FrameBuffer a = ctx.render(cam, light);
  const FrameBuffer b = ctx.render(cam, edit_light(light, {0.0, 0.5, Vec3::Ones()}));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) worst = std::max(worst, std::abs(b.rgb[i] - 0.5 * a.rgb[i]));
  CHECK(worst <= 1e-6);
}
