// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

// relightnav command line: scene generation, rendering, relighting, probe
// fields, rollouts, the environment service and a throughput benchmark.

#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "rns/env.hpp"
#include "rns/fileutil.hpp"
#include "rns/image_io.hpp"
#include "rns/relight.hpp"
#include "rns/render.hpp"
#include "rns/scene.hpp"
#include "rns/server.hpp"

namespace {

using namespace rns;
using Clock = std::chrono::steady_clock;

struct ViewArgs {
  std::string pose;
  int width = 96;
  int height = 64;
  double hfov_deg = 90.0;
};

void add_view_options(CLI::App* cmd, ViewArgs& v) {
  cmd->add_option("--pose", v.pose, "x,y,z,yaw_deg (default: scene centre at 1.5 m, yaw 0)");
  cmd->add_option("--width", v.width, "image width")->check(CLI::Range(1, 8192));
  cmd->add_option("--height", v.height, "image height")->check(CLI::Range(1, 8192));
  cmd->add_option("--hfov", v.hfov_deg, "horizontal field of view (deg)")->check(CLI::Range(1.0, 179.0));
}

std::vector<double> parse_list(const std::string& text, std::size_t n, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !std::isfinite(x)) {
      throw InputError(std::string(what) + " must be " + std::to_string(n) + " comma-separated numbers");
    }
    out.push_back(x);
  }
  if (out.size() != n) throw InputError(std::string(what) + " must be " + std::to_string(n) + " comma-separated numbers");
  return out;
}

Camera view_camera(const SceneModel& scene, const ViewArgs& v) {
  Vec3 pos(scene.bounds.center().x(), scene.bounds.center().y(), scene.ground_z + 1.5);
  double yaw = 0.0;
  if (!v.pose.empty()) {
    const auto p = parse_list(v.pose, 4, "--pose");
    pos = {p[0], p[1], p[2]};
    yaw = p[3] * kPi / 180.0;
  }
  return Camera::drone(pos, yaw, v.width, v.height, v.hfov_deg * kPi / 180.0);
}

void write_image(const std::filesystem::path& path, const FrameBuffer& fb) {
  if (path.extension() == ".pfm") {
    FloatImage img{fb.width, fb.height, 3, fb.rgb};
    write_pfm(path, img);
  } else {
    write_ppm(path, to_rgb8(fb));
  }
}

std::shared_ptr<const SceneModel> load_scene_ptr(const std::string& path) {
  return std::make_shared<const SceneModel>(load_scene(path));
}

EnvLight base_light(const std::string& spec, int degree) {
  const EnvLight sky = default_sky_light(degree);
  return spec.empty() ? sky : load_light_spec(spec, sky);
}

// Full-width strip of frames placed side by side.
FrameBuffer hstack(const std::vector<FrameBuffer>& frames) {
  FrameBuffer out(frames.front().width * static_cast<int>(frames.size()), frames.front().height);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& fb = frames[f];
    for (int row = 0; row < fb.height; ++row) {
      for (int col = 0; col < fb.width; ++col) {
        const std::size_t src = static_cast<std::size_t>(row) * fb.width + col;
        const std::size_t dst = static_cast<std::size_t>(row) * out.width + f * fb.width + col;
        for (int c = 0; c < 3; ++c) out.rgb[3 * dst + c] = fb.rgb[3 * src + c];
        out.depth[dst] = fb.depth[src];
        out.alpha[dst] = fb.alpha[src];
      }
    }
  }
  return out;
}

std::shared_ptr<const OcclusionField> field_for(const SceneModel& scene, const std::string& path, double cell) {
  if (!path.empty()) {
    auto field = std::make_shared<const OcclusionField>(load_occlusion_field(path));
    if (field->degree != scene.degree) throw InputError("field SH degree does not match the scene");
    return field;
  }
  std::cerr << "note: no --field given, building one with cell " << cell << " m\n";
  FieldBuildOptions opts;
  opts.degree = scene.degree;
  return std::make_shared<const OcclusionField>(build_occlusion_field(scene, grid_for_scene(scene, cell), opts));
}

int run_gen_forest(std::uint64_t seed, int trees, double size, int canopy, const std::string& out) {
  ForestParams p;
  p.seed = seed;
  p.n_trees = trees;
  p.area_min = {-size / 2, -size / 2};
  p.area_max = {size / 2, size / 2};
  if (canopy >= 0) p.canopy_gaussians = canopy;
  const SceneModel scene = gen_forest(p);
  save_scene(scene, out);
  std::cout << "wrote " << out << " (" << scene.gaussians.size() << " gaussians)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relightnav: relightable splat simulator for UAV navigation"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  int trees = 50, canopy = -1;
  double size = 60.0;
  std::string out;
  auto* gen = app.add_subcommand("gen-forest", "generate a procedural forest scene");
  gen->add_option("--seed", seed, "random seed");
  gen->add_option("--trees", trees, "number of trees")->check(CLI::NonNegativeNumber);
  gen->add_option("--size", size, "side of the square area (m)")->check(CLI::PositiveNumber);
  gen->add_option("--canopy", canopy, "Gaussians per canopy")->check(CLI::NonNegativeNumber);
  gen->add_option("-o,--output", out, "scene file")->required();

  std::string scene_path, field_path, light_path, mode = "baked";
  ViewArgs view;
  auto* render = app.add_subcommand("render", "render one frame");
  render->add_option("--scene", scene_path, "scene file")->required();
  render->add_option("--mode", mode, "baked, relit or albedo (albedo lit by the light's mean radiance)")
      ->check(CLI::IsMember({"baked", "relit", "albedo"}));
  render->add_option("--light", light_path, "light spec JSON (relit mode)");
  render->add_option("--field", field_path, "occlusion field (relit mode)");
  render->add_option("-o,--output", out, "output .ppm or .pfm")->required();
  add_view_options(render, view);

  double rotate_deg = 0.0, intensity = 1.0;
  std::string tint = "1,1,1";
  bool grid = false;
  auto* relight = app.add_subcommand("relight", "render under an edited light");
  relight->add_option("--scene", scene_path, "scene file")->required();
  relight->add_option("--field", field_path, "occlusion field")->required();
  relight->add_option("--light", light_path, "base light spec JSON");
  relight->add_option("--rotate-deg", rotate_deg, "light rotation about +z (deg)");
  relight->add_option("--intensity", intensity, "light intensity scale")->check(CLI::NonNegativeNumber);
  relight->add_option("--tint", tint, "per-channel tint r,g,b");
  relight->add_flag("--grid", grid, "emit the original/overcast/dusk/morning strip");
  relight->add_option("-o,--output", out, "output .ppm or .pfm")->required();
  add_view_options(relight, view);

  double cell = 1.0, thresh = kDefaultDepthThreshold;
  int resolution = kDefaultProbeResolution;
  unsigned threads = 0;
  std::string probe_method = "ray";
  auto* probe = app.add_subcommand("probe-field", "build the occlusion probe field");
  probe->add_option("--scene", scene_path, "scene file")->required();
  probe->add_option("--cell", cell, "probe spacing (m)")->check(CLI::PositiveNumber);
  probe->add_option("--thresh", thresh, "visibility depth threshold (m)")->check(CLI::PositiveNumber);
  probe->add_option("--res", resolution, "cube face resolution")->check(CLI::Range(8, 512));
  probe->add_option("--threads", threads, "worker threads (0: all cores)");
  probe->add_option("--probe-method", probe_method, "ray (exact per texel) or splat (rasterised faces)")
      ->check(CLI::IsMember({"ray", "splat"}));
  probe->add_option("-o,--output", out, "field file")->required();

  std::string policy = "straight", csv_path, config_path;
  int episodes = 10, stage = 0;
  auto* rollout = app.add_subcommand("rollout", "run episodes with a fixed policy");
  rollout->add_option("--scene", scene_path, "scene file")->required();
  rollout->add_option("--field", field_path, "occlusion field (built on the fly when absent)");
  rollout->add_option("--config", config_path, "environment config JSON");
  rollout->add_option("--policy", policy, "straight, random or scripted")
      ->check(CLI::IsMember({"straight", "random", "scripted"}));
  rollout->add_option("--episodes", episodes, "episode count")->check(CLI::PositiveNumber);
  rollout->add_option("--seed", seed, "first episode seed");
  rollout->add_option("--stage", stage, "1 static light, 2 randomised (default: config)")->check(CLI::Range(0, 2));
  rollout->add_option("--csv", csv_path, "per-step log");

  std::string host = "127.0.0.1";
  int port = 5555;
  auto* serve = app.add_subcommand("serve", "run the environment service");
  serve->add_option("--scene", scene_path, "scene file")->required();
  serve->add_option("--field", field_path, "occlusion field (built on the fly when absent)");
  serve->add_option("--config", config_path, "environment config JSON");
  serve->add_option("--host", host, "listen address");
  serve->add_option("--port", port, "listen port (0 picks one)")->check(CLI::Range(0, 65535));

  double seconds = 3.0;
  auto* bench = app.add_subcommand("bench", "report frames/s and steps/s");
  bench->add_option("--scene", scene_path, "scene file (default: generated 50-tree forest)");
  bench->add_option("--field", field_path, "occlusion field (built on the fly when absent)");
  bench->add_option("--seconds", seconds, "time budget per measurement")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.get_exit_code();
  }

  try {
    if (*gen) return run_gen_forest(seed, trees, size, canopy, out);

    if (*render) {
      const auto scene = load_scene_ptr(scene_path);
      const Camera cam = view_camera(*scene, view);
      if (mode == "baked") {
        write_image(out, render_baked(*scene, cam));
      } else if (mode == "albedo") {
        // Unoccluded diffuse reference: every splat sees the whole sphere.
        const EnvLight light = base_light(light_path, scene->degree);
        const double y00 = 0.5 / std::sqrt(kPi);
        const Vec3f radiance(light.coeffs(0, 0) * y00, light.coeffs(1, 0) * y00, light.coeffs(2, 0) * y00);
        std::vector<Vec3f> colors;
        for (const auto& g : scene->gaussians) colors.push_back(g.albedo.cwiseProduct(radiance));
        RenderOptions ro;
        ro.background = sky_background(light, furnace_scales());
        write_image(out, render_colors(*scene, cam, colors, ro));
      } else {
        if (field_path.empty()) throw InputError("--mode relit needs --field");
        const RelitContext ctx(scene, field_for(*scene, field_path, 1.0));
        write_image(out, ctx.render(cam, base_light(light_path, scene->degree)));
      }
      return 0;
    }

    if (*relight) {
      const auto scene = load_scene_ptr(scene_path);
      const RelitContext ctx(scene, field_for(*scene, field_path, 1.0));
      const Camera cam = view_camera(*scene, view);
      const EnvLight base = base_light(light_path, scene->degree);
      if (grid) {
        std::vector<FrameBuffer> frames;
        for (const auto& preset : light_presets()) frames.push_back(ctx.render(cam, edit_light(base, preset.edit)));
        write_image(out, hstack(frames));
      } else {
        const auto t = parse_list(tint, 3, "--tint");
        const LightEdit edit{rotate_deg * kPi / 180.0, intensity, Vec3(t[0], t[1], t[2])};
        write_image(out, ctx.render(cam, edit.is_identity() ? base : edit_light(base, edit)));
      }
      return 0;
    }

    if (*probe) {
      const SceneModel scene = load_scene(scene_path);
      FieldBuildOptions opts;
      opts.d_thresh = thresh;
      opts.face_resolution = resolution;
      opts.degree = scene.degree;
      opts.threads = threads;
      opts.method = probe_method == "splat" ? ProbeMethod::kSplat : ProbeMethod::kRay;
      const GridSpec g = grid_for_scene(scene, cell);
      const auto t0 = Clock::now();
      const OcclusionField field = build_occlusion_field(scene, g, opts);
      save_occlusion_field(field, out);
      const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
      std::cout << "wrote " << out << " (" << g.dims[0] << "x" << g.dims[1] << "x" << g.dims[2] << " probes, " << dt
                << " s)\n";
      return 0;
    }

    if (*rollout || *serve) {
      EnvConfig cfg = load_env_config(config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path));
      if (stage) cfg.stage = static_cast<Stage>(stage);
      const auto scene = load_scene_ptr(scene_path);
      const auto assets = make_assets(scene, field_for(*scene, field_path, 1.0), cfg, default_sky_light(scene->degree));

      if (*serve) {
        Server server(assets, cfg, {host, static_cast<std::uint16_t>(port)});
        server.start();
        std::cout << "listening on " << host << ":" << server.port() << std::endl;
        static Server* active = &server;
        std::signal(SIGINT, [](int) { active->stop(); });
        std::signal(SIGTERM, [](int) { active->stop(); });
        server.wait();
        return 0;
      }

      Environment env(assets, cfg);
      std::mt19937_64 policy_rng(seed ^ 0x9e3779b97f4a7c15ull);
      std::uniform_real_distribution<double> random_u(-cfg.dynamics.u_max, cfg.dynamics.u_max);
      std::vector<LogRow> rows;
      int successes = 0;
      double reward_sum = 0.0;
      for (int e = 0; e < episodes; ++e) {
        Observation obs = env.reset(seed + e);
        double episode_reward = 0.0;
        while (true) {
          double u = 0.0;
          if (policy == "random") {
            u = random_u(policy_rng);
          } else if (policy == "scripted") {
            u = std::clamp(2.0 * std::atan2(obs.state[1], obs.state[0]), -cfg.dynamics.u_max, cfg.dynamics.u_max);
          }
          StepResult r = env.step(u);
          episode_reward += r.reward;
          rows.push_back({e, r.info, r.reward, env.state().p, env.state().psi, r.reason});
          obs = std::move(r.obs);
          if (r.done) {
            successes += r.reason == Termination::kSuccess;
            break;
          }
        }
        reward_sum += episode_reward;
      }
      if (!csv_path.empty()) write_file_atomic(csv_path, episode_csv(rows));
      std::cout << "episodes " << episodes << " success_rate " << static_cast<double>(successes) / episodes
                << " mean_reward " << reward_sum / episodes << "\n";
      return 0;
    }

    if (*bench) {
      std::shared_ptr<const SceneModel> scene;
      if (scene_path.empty()) {
        scene = std::make_shared<const SceneModel>(gen_forest(ForestParams{}));
      } else {
        scene = load_scene_ptr(scene_path);
      }
      std::shared_ptr<const OcclusionField> field;
      if (field_path.empty()) {
        // Coarse grid keeps the benchmark's setup cost small.
        FieldBuildOptions opts;
        opts.degree = scene->degree;
        field = std::make_shared<const OcclusionField>(build_occlusion_field(*scene, grid_for_scene(*scene, 4.0), opts));
      } else {
        field = field_for(*scene, field_path, 1.0);
      }
      EnvConfig cfg;
      const auto assets = make_assets(scene, field, cfg, default_sky_light(scene->degree));

      const Camera cam = Camera::drone(Vec3(0, 0, 1.5), 0.0, cfg.image_width, cfg.image_height, kPi / 2);
      const auto colors = assets->relit->colors(assets->base_light);
      int frames = 0;
      auto t0 = Clock::now();
      while (std::chrono::duration<double>(Clock::now() - t0).count() < seconds) {
        assets->relit->render(cam, assets->base_light, colors);
        ++frames;
      }
      const double fps = frames / std::chrono::duration<double>(Clock::now() - t0).count();

      Environment env(assets, cfg);
      env.reset(1);
      int steps = 0;
      std::uint64_t episode = 1;
      t0 = Clock::now();
      while (std::chrono::duration<double>(Clock::now() - t0).count() < seconds) {
        if (env.step(0.0).done) env.reset(++episode);
        ++steps;
      }
      const double sps = steps / std::chrono::duration<double>(Clock::now() - t0).count();
      std::cout << "gaussians " << scene->gaussians.size() << " frames_per_s " << fps << " steps_per_s " << sps
                << " (" << cfg.image_height << "x" << cfg.image_width << ")\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
