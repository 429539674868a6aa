// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

// Navigation environment: episode lifecycle, observations, shaped reward
// and domain randomisation.

#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rns/dynamics.hpp"
#include "rns/image_io.hpp"
#include "rns/relight.hpp"
#include "rns/world.hpp"

namespace rns {

struct RewardWeights {
  double progress = 1.0;
  double align = 0.1;
  double obstacle = 0.2;
  double success = 100.0;
  double collision = -50.0;
};

struct RandomizationConfig {
  bool enabled = true;                   // sensing/actuation noise
  double action_noise = 1.0;             // rad/s, sigma
  double latency_ms[2] = {0.0, 80.0};
  double interval_ms[2] = {10.0, 100.0};
  double pos_xy_noise = 0.05;            // m, sigma
  double pos_z_noise = 0.03;             // m, sigma
  double vel_noise = 0.08;               // m/s, sigma
  double cam_pos_offset = 0.1;           // m, half range
  double cam_rot_offset_deg = 5.0;       // deg, half range
  double light_rotation[2] = {0.0, 2.0 * kPi};
  double light_intensity[2] = {0.3, 1.7};
  double light_tint[2] = {0.8, 1.2};
};

enum class Stage { kStaticLight = 1, kRandomLight = 2 };

struct EnvConfig {
  double dt = 0.1;
  int max_steps = 600;
  int image_height = 64;
  int image_width = 96;
  double hfov_deg = 90.0;
  CollisionSpec collision;
  DynParams dynamics;
  SamplerOptions sampler;
  RewardWeights weights;
  RandomizationConfig randomization;
  Stage stage = Stage::kStaticLight;

  void validate() const;
};

nlohmann::json config_to_json(const EnvConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
EnvConfig config_from_json(const nlohmann::json& j);
// Every leaf key may be overridden by RNS_<PATH> with the path upper-cased
// and joined by '_', e.g. RNS_DYNAMICS_K_PSI or RNS_RANDOMIZATION_ENABLED.
// Values parse as JSON, falling back to a plain string.
nlohmann::json apply_env_overrides(nlohmann::json j);
EnvConfig load_env_config(const std::optional<std::filesystem::path>& path);

struct RewardComponents {
  double progress = 0.0;
  double align = 0.0;
  double obstacle = 0.0;
  double success = 0.0;
  double collision = 0.0;
};

struct Reward {
  double total = 0.0;
  RewardComponents components;
};

struct RewardInputs {
  double prev_distance = 0.0;
  double distance = 0.0;
  double psi = 0.0;
  double psi_target = 0.0;
  double d_obs = std::numeric_limits<double>::infinity();
  bool collided = false;
};

Reward compute_reward(const RewardInputs& in, const CollisionSpec& spec, const RewardWeights& w);
double weighted_sum(const RewardComponents& c, const RewardWeights& w);

struct RandomizationDraw {
  double action_noise = 0.0;  // sigma
  double latency_ms = 0.0;
  double interval_ms = 0.0;   // most recent step
  double pos_xy_noise = 0.0;
  double pos_z_noise = 0.0;
  double vel_noise = 0.0;
  Vec3 cam_pos_offset = Vec3::Zero();   // body frame, m
  Vec3 cam_rot_offset = Vec3::Zero();   // roll, pitch, yaw, deg
  LightEdit light;
};

// Per-episode draw under `cfg`; light edits only in stage 2, sensing and
// actuation terms only when randomisation is enabled.
RandomizationDraw draw_episode(const RandomizationConfig& cfg, Stage stage, std::mt19937_64& rng);
double draw_interval_ms(const RandomizationConfig& cfg, std::mt19937_64& rng);

inline constexpr int kStateSize = 8;

// clamp -> add N(0, sigma^2) -> clamp again.
double perturb_action(double action, double sigma, double u_max, std::mt19937_64& rng);

// Noisy state readout: p_rel (yaw body frame), v (world), psi, psi_dot.
// Position and velocity noise come from `draw`; the true state is untouched.
std::array<float, kStateSize> observed_state(const DroneState& s, const Vec3& goal, const RandomizationDraw& draw,
                                             std::mt19937_64& rng);

struct Observation {
  Image8 image;
  std::array<float, kStateSize> state{};  // p_rel (body), v (world), psi, psi_dot
};

enum class Termination { kRunning, kSuccess, kCollision, kTimeout };
const char* termination_name(Termination t);

struct StepInfo {
  RewardComponents components;
  double distance = 0.0;
  double d_obs = std::numeric_limits<double>::infinity();
  double action = 0.0;         // as received
  double command = 0.0;        // after noise and clamp, entering the delay queue
  double applied = 0.0;        // command in effect at the end of the step
  double interval_ms = 0.0;
  double time = 0.0;           // simulated seconds
  int step = 0;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  Termination reason = Termination::kRunning;
  StepInfo info;
};

// Immutable assets shared by every environment instance.
struct EnvAssets {
  std::shared_ptr<const SceneModel> scene;
  std::shared_ptr<const RelitContext> relit;
  std::shared_ptr<const World> world;
  EnvLight base_light;
};

std::shared_ptr<const EnvAssets> make_assets(std::shared_ptr<const SceneModel> scene,
                                             std::shared_ptr<const OcclusionField> field, const EnvConfig& cfg,
                                             const EnvLight& base_light);

struct LogRow {
  int episode = 0;
  StepInfo info;
  double reward = 0.0;
  Vec3 p = Vec3::Zero();
  double psi = 0.0;
  Termination reason = Termination::kRunning;
};

std::string episode_csv(const std::vector<LogRow>& rows);

class Environment {
 public:
  Environment(std::shared_ptr<const EnvAssets> assets, EnvConfig config);

  Observation reset(std::uint64_t seed);
  Observation reset(std::uint64_t seed, Stage stage);
  // Throws ProtocolError before reset or after termination.
  StepResult step(double action);

  const EnvConfig& config() const { return config_; }
  const DroneState& state() const { return state_; }
  const StartGoal& task() const { return task_; }
  const RandomizationDraw& draw() const { return draw_; }
  const EnvLight& light() const { return light_; }
  bool active() const { return active_; }
  double time() const { return time_; }
  int steps() const { return steps_; }

  // Replaces the sampled start/goal of the current episode and puts the
  // drone back in hover at the new start.
  Observation set_task(const StartGoal& task);

 private:
  Observation observe();
  void advance_queue(double t);

  std::shared_ptr<const EnvAssets> assets_;
  EnvConfig config_;
  std::mt19937_64 rng_;
  DroneState state_;
  StartGoal task_;
  RandomizationDraw draw_;
  EnvLight light_;
  std::vector<Vec3f> colors_;
  struct Pending {
    double at;
    double u;
  };
  std::deque<Pending> queue_;
  double current_u_ = 0.0;
  double time_ = 0.0;
  double prev_distance_ = 0.0;
  int steps_ = 0;
  bool active_ = false;
  bool reset_done_ = false;
};

}  // namespace rns
