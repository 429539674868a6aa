// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <random>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "rns/fileutil.hpp"

using namespace rns;

namespace {

RewardInputs inputs(double prev, double d, double dpsi, double d_obs, bool collided = false) {
  RewardInputs in;
  in.prev_distance = prev;
  in.distance = d;
  in.psi = 0.3;
  in.psi_target = 0.3 + dpsi;
  in.d_obs = d_obs;
  in.collided = collided;
  return in;
}

struct Stats {
  double n = 0, sum = 0, sq = 0, lo = 1e300, hi = -1e300;
  void add(double x) {
    ++n;
    sum += x;
    sq += x * x;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  double mean() const { return sum / n; }
  double sd() const { return std::sqrt(sq / n - mean() * mean()); }
};

// Sample mean within 3 standard errors of `mu`.
void check_uniform(const Stats& s, double a, double b) {
  CHECK(s.lo >= a);
  CHECK(s.hi <= b);
  const double sd = (b - a) / std::sqrt(12.0);
  CHECK(std::abs(s.mean() - 0.5 * (a + b)) <= 3.0 * sd / std::sqrt(s.n));
  CHECK(s.sd() == doctest::Approx(sd).epsilon(0.01));
}

void check_normal(const Stats& s, double sigma) {
  CHECK(std::abs(s.mean()) <= 3.0 * sigma / std::sqrt(s.n));
  // SE of the sample sd is about sigma / sqrt(2n).
  CHECK(std::abs(s.sd() - sigma) <= 3.0 * sigma / std::sqrt(2.0 * s.n));
}

EnvConfig quiet_config() {
  EnvConfig c;
  c.randomization.enabled = false;
  return c;
}

}  // namespace

TEST_CASE("reward arithmetic") {
  const CollisionSpec spec;
  const RewardWeights w;
  SUBCASE("stationary, aligned, clear") {
    const Reward r = compute_reward(inputs(10, 10, 0.0, std::numeric_limits<double>::infinity()), spec, w);
    CHECK(r.total == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(r.components.obstacle == 0.0);
  }
  SUBCASE("obstacle term") {
    CHECK(compute_reward(inputs(10, 10, 0.0, 2.0), spec, w).components.obstacle == 0.0);
    CHECK(compute_reward(inputs(10, 10, 0.0, 3.0), spec, w).components.obstacle == 0.0);
    const Reward r = compute_reward(inputs(10, 10, 0.0, 0.5), spec, w);
    CHECK(r.components.obstacle == -0.75);
    CHECK(w.obstacle * r.components.obstacle == doctest::Approx(-0.15).epsilon(1e-15));
  }
  SUBCASE("progress with a nearby obstacle") {
    for (double dpsi : {0.0, 0.7, kPi}) {
      const Reward r = compute_reward(inputs(10, 9.5, dpsi, 1.0), spec, w);
      CHECK(r.total == doctest::Approx(0.5 + 0.1 * std::cos(dpsi) - 0.1).epsilon(1e-15));
      CHECK(r.components.progress == 0.5);
      CHECK(r.components.obstacle == -0.5);
    }
  }
  SUBCASE("terminal events") {
    const Reward s = compute_reward(inputs(2.5, 1.9, 0.0, std::numeric_limits<double>::infinity()), spec, w);
    CHECK(s.components.success == 1.0);
    CHECK(s.total == doctest::Approx(0.6 + 0.1 + 100.0).epsilon(1e-15));
    CHECK(compute_reward(inputs(2.5, 2.0, 0.0, 5.0), spec, w).components.success == 0.0);
    const Reward c = compute_reward(inputs(10, 10, 0.0, 0.1, true), spec, w);
    CHECK(c.components.collision == 1.0);
    CHECK(c.total == doctest::Approx(0.1 + 0.2 * (0.1 - 2.0) / 2.0 - 50.0).epsilon(1e-15));
  }
}

TEST_CASE("randomisation draws follow their configured distributions") {
  const RandomizationConfig cfg;
  std::mt19937_64 rng(2024);
  const int n = 100000;
  Stats latency, interval, rot, inten, tint, cam_p, cam_r;
  for (int i = 0; i < n; ++i) {
    const RandomizationDraw d = draw_episode(cfg, Stage::kRandomLight, rng);
    latency.add(d.latency_ms);
    interval.add(draw_interval_ms(cfg, rng));
    rot.add(d.light.rotation);
    inten.add(d.light.intensity);
    tint.add(d.light.tint[i % 3]);
    cam_p.add(d.cam_pos_offset[i % 3]);
    cam_r.add(d.cam_rot_offset[i % 3]);
    CHECK(d.action_noise == 1.0);
  }
  check_uniform(latency, 0.0, 80.0);
  check_uniform(interval, 10.0, 100.0);
  check_uniform(rot, 0.0, 2.0 * kPi);
  check_uniform(inten, 0.3, 1.7);
  check_uniform(tint, 0.8, 1.2);
  check_uniform(cam_p, -0.1, 0.1);
  check_uniform(cam_r, -5.0, 5.0);

  // Noise terms, with a wide actuator envelope so the clamp never binds.
  Stats act, px, pz, vel;
  RandomizationDraw d = draw_episode(cfg, Stage::kStaticLight, rng);
  DroneState s = hover_state(Vec3(1.0, 2.0, 1.5), 0.0);
  s.v = Vec3(3.0, -1.0, 0.5);
  const Vec3 goal(1.0, 2.0, 1.5);
  for (int i = 0; i < n; ++i) {
    act.add(perturb_action(0.0, d.action_noise, 1e6, rng));
    const auto st = observed_state(s, goal, d, rng);
    px.add(-st[0]);
    pz.add(-st[2]);
    vel.add(st[3] - 3.0);
  }
  check_normal(act, 1.0);
  check_normal(px, 0.05);
  check_normal(pz, 0.03);
  check_normal(vel, 0.08);

  // With the default envelope every command stays inside [-1, 1].
  for (int i = 0; i < 1000; ++i) {
    const double u = perturb_action(5.0 * (i % 3 - 1), 1.0, 1.0, rng);
    CHECK(std::abs(u) <= 1.0);
  }
}

TEST_CASE("stage and enable switches") {
  RandomizationConfig cfg;
  std::mt19937_64 rng(1);
  const RandomizationDraw s1 = draw_episode(cfg, Stage::kStaticLight, rng);
  CHECK(s1.light.is_identity());
  CHECK(s1.latency_ms >= 0.0);
  cfg.enabled = false;
  const RandomizationDraw off = draw_episode(cfg, Stage::kRandomLight, rng);
  CHECK(off.action_noise == 0.0);
  CHECK(off.latency_ms == 0.0);
  CHECK(off.cam_pos_offset == Vec3::Zero());
  CHECK_FALSE(off.light.is_identity());
}

TEST_CASE("state readout is heading-relative") {
  RandomizationDraw none;
  std::mt19937_64 rng(0);
  DroneState s = hover_state(Vec3(0, 0, 1.5), kPi / 2);
  const auto st = observed_state(s, Vec3(0, 5, 1.5), none, rng);
  CHECK(st[0] == doctest::Approx(5.0));
  CHECK(std::abs(st[1]) < 1e-6);
  CHECK(st[6] == doctest::Approx(kPi / 2));
}

TEST_CASE("episodes are deterministic under a seed") {
  const auto assets = fixture::small_assets();
  EnvConfig cfg;
  cfg.stage = Stage::kRandomLight;
  Environment a(assets, cfg), b(assets, cfg);
  const Observation oa = a.reset(7), ob = b.reset(7);
  CHECK(oa.image.data == ob.image.data);
  CHECK(oa.state == ob.state);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 40; ++i) {
    const double action = u(rng);
    const StepResult ra = a.step(action), rb = b.step(action);
    CHECK(ra.reward == rb.reward);
    CHECK(ra.obs.image.data == rb.obs.image.data);
    CHECK(ra.obs.state == rb.obs.state);
    CHECK(a.state().p == b.state().p);
    if (ra.done) break;
  }
  Environment c(assets, cfg);
  c.reset(8);
  CHECK(c.task().start != a.task().start);
}

TEST_CASE("every step's reward is the weighted sum of its components") {
  const auto assets = fixture::small_assets();
  EnvConfig cfg;
  cfg.weights = {1.3, 0.7, 0.4, 55.0, -20.0};
  Environment env(assets, cfg);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int steps = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    env.reset(seed);
    for (int i = 0; i < 60; ++i) {
      const StepResult r = env.step(u(rng));
      CHECK(r.reward == weighted_sum(r.info.components, cfg.weights));
      ++steps;
      if (r.done) break;
    }
  }
  CHECK(steps > 100);
}

TEST_CASE("stage 1 renders under the unedited base light") {
  const auto assets = fixture::small_assets();
  Environment env(assets, quiet_config());
  const Observation o = env.reset(4, Stage::kStaticLight);
  CHECK(env.light().coeffs == assets->base_light.coeffs);
  const DroneState& s = env.state();
  const EnvConfig& c = env.config();
  const Camera cam = Camera::drone(s.p, s.psi, c.image_width, c.image_height, c.hfov_deg * kPi / 180.0);
  CHECK(o.image.data == to_rgb8(assets->relit->render(cam, assets->base_light)).data);
  CHECK(o.image.width == 96);
  CHECK(o.image.height == 64);

  env.reset(4, Stage::kRandomLight);
  CHECK_FALSE(env.light().coeffs == assets->base_light.coeffs);
}

TEST_CASE("latency delays the command and never lets it act early") {
  EnvConfig cfg;
  cfg.randomization.action_noise = 0.0;
  cfg.randomization.pos_xy_noise = cfg.randomization.pos_z_noise = cfg.randomization.vel_noise = 0.0;
  cfg.randomization.interval_ms[0] = cfg.randomization.interval_ms[1] = 100.0;
  cfg.randomization.latency_ms[0] = cfg.randomization.latency_ms[1] = 150.0;
  const auto assets = fixture::open_assets(cfg);
  Environment env(assets, cfg);
  env.reset(1);
  const StepResult r1 = env.step(0.8);
  CHECK(r1.info.command == 0.8);
  CHECK(r1.info.applied == 0.0);
  CHECK(env.state().psi_dot == 0.0);
  const StepResult r2 = env.step(-0.4);
  CHECK(r2.info.applied == 0.8);
  CHECK(env.state().psi_dot > 0.0);
  // Reference: 0.05 s idle, then 0.05 s under the first command, in 10 substeps.
  DroneState ref = hover_state(env.task().start, env.task().yaw);
  const double h = 0.1 / cfg.dynamics.substeps;
  for (int i = 0; i < 2 * cfg.dynamics.substeps; ++i) substep(ref, i * h < 0.15 - 1e-12 ? 0.0 : 0.8, h, cfg.dynamics);
  CHECK(env.state().psi_dot == doctest::Approx(ref.psi_dot).epsilon(1e-12));
  CHECK(env.state().p.x() == doctest::Approx(ref.p.x()).epsilon(1e-12));
  const StepResult r3 = env.step(0.0);
  CHECK(r3.info.applied == -0.4);

  cfg.randomization.latency_ms[0] = cfg.randomization.latency_ms[1] = 0.0;
  Environment now(fixture::open_assets(cfg), cfg);
  now.reset(1);
  CHECK(now.step(0.8).info.applied == 0.8);
}

TEST_CASE("termination reasons and precedence") {
  const auto assets = fixture::open_assets(quiet_config());
  Environment env(assets, quiet_config());
  CHECK_THROWS_AS(env.step(0.0), ProtocolError);
  env.reset(2);
  const Vec3 start(0.0, 0.0, 1.5);

  SUBCASE("success") {
    env.set_task({start, start + Vec3(2.5, 0, 0), 0.0});
    StepResult r;
    for (int i = 0; i < 10 && !r.done; ++i) r = env.step(0.0);
    CHECK(r.reason == Termination::kSuccess);
    CHECK(r.info.components.success == 1.0);
    CHECK(r.reward >= 100.0);
    CHECK_THROWS_AS(env.step(0.0), ProtocolError);
  }
  SUBCASE("timeout") {
    EnvConfig c = quiet_config();
    c.max_steps = 3;
    Environment t(assets, c);
    t.reset(2);
    StepResult r;
    for (int i = 0; i < 3; ++i) {
      CHECK_FALSE(r.done);
      r = t.step(0.0);
    }
    CHECK(r.reason == Termination::kTimeout);
    CHECK(r.info.step == 3);
  }
}

TEST_CASE("collision beats success on the same step") {
  // A single post right where the drone is, with the goal inside R_goal.
  SceneModel s = *fixture::small_forest();
  Gaussian post = s.gaussians.front();
  post.mean = Vec3f(0.0f, 0.1f, 1.5f);
  post.opacity = 0.9f;
  s.gaussians.push_back(post);
  const auto scene = std::make_shared<const SceneModel>(s);
  const EnvConfig cfg = quiet_config();
  const auto assets = make_assets(scene, fixture::small_field(), cfg, default_sky_light());
  Environment env(assets, cfg);
  env.reset(0);
  env.set_task({Vec3(0, 0, 1.5), Vec3(1.0, 0, 1.5), 0.0});
  const StepResult r = env.step(0.0);
  CHECK(r.reason == Termination::kCollision);
  CHECK(r.info.components.collision == 1.0);
  CHECK(r.info.components.success == 1.0);
  CHECK(r.reward == weighted_sum(r.info.components, cfg.weights));
  CHECK(r.done);
}

TEST_CASE("configuration files and environment overrides") {
  const EnvConfig d;
  const nlohmann::json j = config_to_json(d);
  CHECK(config_to_json(config_from_json(j)) == j);

  const EnvConfig c = config_from_json(nlohmann::json::parse(R"({"dt": 0.05, "dynamics": {"k_psi": 4}})"));
  CHECK(c.dt == 0.05);
  CHECK(c.dynamics.k_psi == 4.0);
  CHECK(c.dynamics.mass == d.dynamics.mass);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"dynamics": {"kpsi": 4}})")), InputError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"dt": -1})")), InputError);

  ::setenv("RNS_DYNAMICS_K_PSI", "7.5", 1);
  ::setenv("RNS_RANDOMIZATION_ENABLED", "false", 1);
  ::setenv("RNS_RANDOMIZATION_LATENCY_MS", "[5, 6]", 1);
  const EnvConfig o = config_from_json(apply_env_overrides(j));
  ::unsetenv("RNS_DYNAMICS_K_PSI");
  ::unsetenv("RNS_RANDOMIZATION_ENABLED");
  ::unsetenv("RNS_RANDOMIZATION_LATENCY_MS");
  CHECK(o.dynamics.k_psi == 7.5);
  CHECK_FALSE(o.randomization.enabled);
  CHECK(o.randomization.latency_ms[1] == 6.0);

  const auto path = std::filesystem::temp_directory_path() / "rns_env_config.json";
  write_file_atomic(path, R"({"max_steps": 12})");
  CHECK(load_env_config(path).max_steps == 12);
  CHECK(load_env_config(std::nullopt).max_steps == 600);
  std::filesystem::remove(path);
}

TEST_CASE("episode log rows") {
  LogRow row;
  row.episode = 3;
  row.info.step = 4;
  row.reward = 1.5;
  row.reason = Termination::kSuccess;
  const std::string csv = episode_csv({row});
  CHECK(csv.rfind("episode,step,time,action", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(csv.find("success") != std::string::npos);
  CHECK(csv.find("inf") != std::string::npos);
}
