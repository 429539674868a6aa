// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#include "rns/env.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rns/fileutil.hpp"

namespace rns {

using json = nlohmann::json;

namespace {

json pair_json(const double (&r)[2]) { return json::array({r[0], r[1]}); }

void read_pair(const json& j, double (&r)[2]) {
  if (!j.is_array() || j.size() != 2) throw InputError("range must be [lo, hi]");
  r[0] = j[0].get<double>();
  r[1] = j[1].get<double>();
}

void check_keys(const json& defaults, const json& user, const std::string& path) {
  if (!user.is_object()) throw InputError("config section '" + path + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!defaults.contains(key)) throw InputError("unknown config key '" + here + "'");
    if (defaults.at(key).is_object()) check_keys(defaults.at(key), value, here);
  }
}

void override_leaves(json& node, const std::string& prefix) {
  for (auto& [key, value] : node.items()) {
    std::string name = prefix + "_" + key;
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::toupper(ch); });
    if (value.is_object()) {
      override_leaves(value, name);
      continue;
    }
    const char* env = std::getenv(name.c_str());
    if (!env) continue;
    try {
      value = json::parse(env);
    } catch (const json::parse_error&) {
      value = std::string(env);
    }
  }
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
}

double normal(std::mt19937_64& rng, double sigma) {
  return sigma > 0.0 ? std::normal_distribution<double>(0.0, sigma)(rng) : 0.0;
}

}  // namespace

void EnvConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("dt must be > 0");
  if (max_steps < 1) throw InputError("max_steps must be >= 1");
  if (image_height < 1 || image_width < 1) throw InputError("image size must be positive");
  if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) throw InputError("hfov_deg must lie in (0, 180)");
  for (double w : {weights.progress, weights.align, weights.obstacle, weights.success, weights.collision}) {
    if (!std::isfinite(w)) throw InputError("reward weights must be finite");
  }
  const auto& r = randomization;
  for (const double* range : {r.latency_ms, r.interval_ms, r.light_rotation, r.light_intensity, r.light_tint}) {
    if (!(range[0] <= range[1]) || !std::isfinite(range[0]) || !std::isfinite(range[1])) {
      throw InputError("randomization ranges need finite lo <= hi");
    }
  }
  if (r.latency_ms[0] < 0.0 || r.interval_ms[0] <= 0.0 || r.light_intensity[0] < 0.0 || r.light_tint[0] < 0.0) {
    throw InputError("randomization ranges out of domain");
  }
  for (double s : {r.action_noise, r.pos_xy_noise, r.pos_z_noise, r.vel_noise, r.cam_pos_offset, r.cam_rot_offset_deg}) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw InputError("noise magnitudes must be finite and >= 0");
  }
  collision.validate();
  dynamics.validate();
}

json config_to_json(const EnvConfig& c) {
  const auto& d = c.dynamics;
  const auto& r = c.randomization;
  return {
      {"dt", c.dt},
      {"max_steps", c.max_steps},
      {"image_height", c.image_height},
      {"image_width", c.image_width},
      {"hfov_deg", c.hfov_deg},
      {"stage", static_cast<int>(c.stage)},
      {"collision",
       {{"r_col", c.collision.r_col},
        {"h_tol", c.collision.h_tol},
        {"delta_safe", c.collision.delta_safe},
        {"r_safe", c.collision.r_safe},
        {"r_goal", c.collision.r_goal}}},
      {"dynamics",
       {{"k_psi", d.k_psi},
        {"c_d", d.c_d},
        {"mass", d.mass},
        {"g", d.g},
        {"k_v", d.k_v},
        {"kp", d.kp},
        {"ki", d.ki},
        {"kd", d.kd},
        {"integral_limit", d.integral_limit},
        {"z_ref", d.z_ref},
        {"substeps", d.substeps},
        {"u_max", d.u_max},
        {"v_base", d.v_base},
        {"v_min", d.v_min},
        {"thrust_enabled", d.thrust_enabled},
        {"drag_feedforward", d.drag_feedforward}}},
      {"sampler",
       {{"min_distance", c.sampler.min_distance},
        {"cell", c.sampler.cell},
        {"border", c.sampler.border},
        {"max_attempts", c.sampler.max_attempts}}},
      {"weights",
       {{"progress", c.weights.progress},
        {"align", c.weights.align},
        {"obstacle", c.weights.obstacle},
        {"success", c.weights.success},
        {"collision", c.weights.collision}}},
      {"randomization",
       {{"enabled", r.enabled},
        {"action_noise", r.action_noise},
        {"latency_ms", pair_json(r.latency_ms)},
        {"interval_ms", pair_json(r.interval_ms)},
        {"pos_xy_noise", r.pos_xy_noise},
        {"pos_z_noise", r.pos_z_noise},
        {"vel_noise", r.vel_noise},
        {"cam_pos_offset", r.cam_pos_offset},
        {"cam_rot_offset_deg", r.cam_rot_offset_deg},
        {"light_rotation", pair_json(r.light_rotation)},
        {"light_intensity", pair_json(r.light_intensity)},
        {"light_tint", pair_json(r.light_tint)}}},
  };
}

EnvConfig config_from_json(const json& user) {
  json j = config_to_json(EnvConfig{});
  check_keys(j, user, "");
  j.merge_patch(user);
  EnvConfig c;
  try {
    c.dt = j.at("dt").get<double>();
    c.max_steps = j.at("max_steps").get<int>();
    c.image_height = j.at("image_height").get<int>();
    c.image_width = j.at("image_width").get<int>();
    c.hfov_deg = j.at("hfov_deg").get<double>();
    const int stage = j.at("stage").get<int>();
    if (stage != 1 && stage != 2) throw InputError("stage must be 1 or 2");
    c.stage = static_cast<Stage>(stage);

    const auto& col = j.at("collision");
    c.collision = {col.at("r_col").get<double>(), col.at("h_tol").get<double>(), col.at("delta_safe").get<double>(),
                   col.at("r_safe").get<double>(), col.at("r_goal").get<double>()};

    const auto& d = j.at("dynamics");
    auto& p = c.dynamics;
    p.k_psi = d.at("k_psi").get<double>();
    p.c_d = d.at("c_d").get<double>();
    p.mass = d.at("mass").get<double>();
    p.g = d.at("g").get<double>();
    p.k_v = d.at("k_v").get<double>();
    p.kp = d.at("kp").get<double>();
    p.ki = d.at("ki").get<double>();
    p.kd = d.at("kd").get<double>();
    p.integral_limit = d.at("integral_limit").get<double>();
    p.z_ref = d.at("z_ref").get<double>();
    p.substeps = d.at("substeps").get<int>();
    p.u_max = d.at("u_max").get<double>();
    p.v_base = d.at("v_base").get<double>();
    p.v_min = d.at("v_min").get<double>();
    p.thrust_enabled = d.at("thrust_enabled").get<bool>();
    p.drag_feedforward = d.at("drag_feedforward").get<bool>();

    const auto& s = j.at("sampler");
    c.sampler.min_distance = s.at("min_distance").get<double>();
    c.sampler.cell = s.at("cell").get<double>();
    c.sampler.border = s.at("border").get<double>();
    c.sampler.max_attempts = s.at("max_attempts").get<int>();
    c.sampler.z = p.z_ref;

    const auto& w = j.at("weights");
    c.weights = {w.at("progress").get<double>(), w.at("align").get<double>(), w.at("obstacle").get<double>(),
                 w.at("success").get<double>(), w.at("collision").get<double>()};

    const auto& r = j.at("randomization");
    auto& q = c.randomization;
    q.enabled = r.at("enabled").get<bool>();
    q.action_noise = r.at("action_noise").get<double>();
    read_pair(r.at("latency_ms"), q.latency_ms);
    read_pair(r.at("interval_ms"), q.interval_ms);
    q.pos_xy_noise = r.at("pos_xy_noise").get<double>();
    q.pos_z_noise = r.at("pos_z_noise").get<double>();
    q.vel_noise = r.at("vel_noise").get<double>();
    q.cam_pos_offset = r.at("cam_pos_offset").get<double>();
    q.cam_rot_offset_deg = r.at("cam_rot_offset_deg").get<double>();
    read_pair(r.at("light_rotation"), q.light_rotation);
    read_pair(r.at("light_intensity"), q.light_intensity);
    read_pair(r.at("light_tint"), q.light_tint);
  } catch (const json::exception& e) {
    throw InputError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

json apply_env_overrides(json j) {
  override_leaves(j, "RNS");
  return j;
}

EnvConfig load_env_config(const std::optional<std::filesystem::path>& path) {
  json j = config_to_json(EnvConfig{});
  if (path) {
    json user;
    try {
      user = json::parse(read_file(*path));
    } catch (const json::parse_error& e) {
      throw InputError("config " + path->string() + " is not valid JSON: " + e.what());
    }
    check_keys(j, user, "");
    j.merge_patch(user);
  }
  return config_from_json(apply_env_overrides(std::move(j)));
}

double weighted_sum(const RewardComponents& c, const RewardWeights& w) {
  return w.progress * c.progress + w.align * c.align + w.obstacle * c.obstacle + w.success * c.success +
         w.collision * c.collision;
}

Reward compute_reward(const RewardInputs& in, const CollisionSpec& spec, const RewardWeights& w) {
  Reward r;
  auto& c = r.components;
  c.progress = in.prev_distance - in.distance;
  c.align = std::cos(in.psi_target - in.psi);
  c.obstacle = std::isfinite(in.d_obs) ? std::min(0.0, (in.d_obs - spec.r_safe) / spec.r_safe) : 0.0;
  c.success = in.distance < spec.r_goal ? 1.0 : 0.0;
  c.collision = in.collided ? 1.0 : 0.0;
  r.total = weighted_sum(c, w);
  return r;
}

RandomizationDraw draw_episode(const RandomizationConfig& cfg, Stage stage, std::mt19937_64& rng) {
  RandomizationDraw d;
  if (cfg.enabled) {
    d.action_noise = cfg.action_noise;
    d.latency_ms = uniform(rng, cfg.latency_ms[0], cfg.latency_ms[1]);
    d.pos_xy_noise = cfg.pos_xy_noise;
    d.pos_z_noise = cfg.pos_z_noise;
    d.vel_noise = cfg.vel_noise;
    for (int a = 0; a < 3; ++a) d.cam_pos_offset[a] = uniform(rng, -cfg.cam_pos_offset, cfg.cam_pos_offset);
    for (int a = 0; a < 3; ++a) d.cam_rot_offset[a] = uniform(rng, -cfg.cam_rot_offset_deg, cfg.cam_rot_offset_deg);
  }
  if (stage == Stage::kRandomLight) {
    d.light.rotation = uniform(rng, cfg.light_rotation[0], cfg.light_rotation[1]);
    d.light.intensity = uniform(rng, cfg.light_intensity[0], cfg.light_intensity[1]);
    for (int ch = 0; ch < 3; ++ch) d.light.tint[ch] = uniform(rng, cfg.light_tint[0], cfg.light_tint[1]);
  }
  return d;
}

double draw_interval_ms(const RandomizationConfig& cfg, std::mt19937_64& rng) {
  return uniform(rng, cfg.interval_ms[0], cfg.interval_ms[1]);
}

double perturb_action(double action, double sigma, double u_max, std::mt19937_64& rng) {
  const double u = std::clamp(action, -u_max, u_max);
  return std::clamp(u + normal(rng, sigma), -u_max, u_max);
}

std::array<float, kStateSize> observed_state(const DroneState& s, const Vec3& goal, const RandomizationDraw& draw,
                                             std::mt19937_64& rng) {
  Vec3 p = s.p;
  p.x() += normal(rng, draw.pos_xy_noise);
  p.y() += normal(rng, draw.pos_xy_noise);
  p.z() += normal(rng, draw.pos_z_noise);
  Vec3 v = s.v;
  for (int a = 0; a < 3; ++a) v[a] += normal(rng, draw.vel_noise);
  const Vec3 rel = Eigen::AngleAxisd(-s.psi, Vec3::UnitZ()) * (goal - p);
  return {static_cast<float>(rel.x()), static_cast<float>(rel.y()), static_cast<float>(rel.z()),
          static_cast<float>(v.x()),   static_cast<float>(v.y()),   static_cast<float>(v.z()),
          static_cast<float>(s.psi),   static_cast<float>(s.psi_dot)};
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::kRunning: return "running";
    case Termination::kSuccess: return "success";
    case Termination::kCollision: return "collision";
    case Termination::kTimeout: return "timeout";
  }
  return "running";
}

std::shared_ptr<const EnvAssets> make_assets(std::shared_ptr<const SceneModel> scene,
                                             std::shared_ptr<const OcclusionField> field, const EnvConfig& cfg,
                                             const EnvLight& base_light) {
  cfg.validate();
  auto assets = std::make_shared<EnvAssets>();
  assets->scene = scene;
  assets->relit = std::make_shared<RelitContext>(scene, std::move(field));
  SamplerOptions sampler = cfg.sampler;
  sampler.z = cfg.dynamics.z_ref;
  assets->world = std::make_shared<World>(*scene, cfg.collision, sampler);
  assets->base_light = base_light;
  return assets;
}

std::string episode_csv(const std::vector<LogRow>& rows) {
  std::ostringstream out;
  out.precision(9);
  out << "episode,step,time,action,command,applied,interval_ms,reward,progress,align,obstacle,success,collision,"
         "distance,d_obs,x,y,z,yaw,reason\n";
  for (const auto& r : rows) {
    const auto& i = r.info;
    const auto& c = i.components;
    out << r.episode << ',' << i.step << ',' << i.time << ',' << i.action << ',' << i.command << ',' << i.applied
        << ',' << i.interval_ms << ',' << r.reward << ',' << c.progress << ',' << c.align << ',' << c.obstacle << ','
        << c.success << ',' << c.collision << ',' << i.distance << ',' << i.d_obs << ',' << r.p.x() << ','
        << r.p.y() << ',' << r.p.z() << ',' << r.psi << ',' << termination_name(r.reason) << '\n';
  }
  return out.str();
}

Environment::Environment(std::shared_ptr<const EnvAssets> assets, EnvConfig config)
    : assets_(std::move(assets)), config_(std::move(config)) {
  config_.validate();
  if (!assets_ || !assets_->scene || !assets_->relit || !assets_->world) throw InputError("incomplete environment assets");
}

Observation Environment::reset(std::uint64_t seed) { return reset(seed, config_.stage); }

Observation Environment::reset(std::uint64_t seed, Stage stage) {
  rng_.seed(seed);
  task_ = assets_->world->sample_start_goal(rng_);
  draw_ = draw_episode(config_.randomization, stage, rng_);
  light_ = draw_.light.is_identity() ? assets_->base_light : edit_light(assets_->base_light, draw_.light);
  colors_ = assets_->relit->colors(light_);
  queue_.clear();
  current_u_ = 0.0;
  time_ = 0.0;
  steps_ = 0;
  active_ = true;
  reset_done_ = true;
  return set_task(task_);
}

Observation Environment::set_task(const StartGoal& task) {
  if (!reset_done_) throw ProtocolError("set_task before reset");
  task_ = task;
  state_ = hover_state(task.start, task.yaw);
  prev_distance_ = (task.goal - task.start).norm();
  return observe();
}

void Environment::advance_queue(double t) {
  while (!queue_.empty() && queue_.front().at <= t) {
    current_u_ = queue_.front().u;
    queue_.pop_front();
  }
}

StepResult Environment::step(double action) {
  if (!reset_done_) throw ProtocolError("step before reset");
  if (!active_) throw ProtocolError("step after episode end");
  if (!std::isfinite(action)) throw InputError("action must be finite");
  const auto& dyn = config_.dynamics;
  const auto& rnd = config_.randomization;

  StepResult res;
  auto& info = res.info;
  info.action = action;
  const double u = perturb_action(action, draw_.action_noise, dyn.u_max, rng_);
  info.command = u;
  queue_.push_back({time_ + draw_.latency_ms / 1000.0, u});

  const double interval = rnd.enabled ? draw_interval_ms(rnd, rng_) / 1000.0 : config_.dt;
  draw_.interval_ms = interval * 1000.0;
  const double h = interval / dyn.substeps;
  for (int i = 0; i < dyn.substeps; ++i) {
    advance_queue(time_ + i * h);
    substep(state_, current_u_, h, dyn);
  }
  time_ += interval;
  ++steps_;
  if (!state_.finite()) throw InputError("drone state became non-finite");

  const CollisionResult col = assets_->world->check(state_.p);
  const Vec3 to_goal = task_.goal - state_.p;
  RewardInputs in;
  in.prev_distance = prev_distance_;
  in.distance = to_goal.norm();
  in.psi = state_.psi;
  in.psi_target = std::atan2(to_goal.y(), to_goal.x());
  in.d_obs = col.d_obs;
  in.collided = col.collided;
  const Reward reward = compute_reward(in, config_.collision, config_.weights);
  prev_distance_ = in.distance;

  res.reward = reward.total;
  info.components = reward.components;
  info.distance = in.distance;
  info.d_obs = col.d_obs;
  info.applied = current_u_;
  info.interval_ms = draw_.interval_ms;
  info.time = time_;
  info.step = steps_;

  if (col.collided) {
    res.reason = Termination::kCollision;
  } else if (in.distance < config_.collision.r_goal) {
    res.reason = Termination::kSuccess;
  } else if (steps_ >= config_.max_steps) {
    res.reason = Termination::kTimeout;
  }
  res.done = res.reason != Termination::kRunning;
  active_ = !res.done;
  res.obs = observe();
  return res;
}

Observation Environment::observe() {
  const auto& rnd = draw_;
  Observation obs;
  obs.state = observed_state(state_, task_.goal, rnd, rng_);

  const Vec3 cam_pos = state_.p + Eigen::AngleAxisd(state_.psi, Vec3::UnitZ()) * rnd.cam_pos_offset;
  const Camera cam = Camera::drone(cam_pos, state_.psi, config_.image_width, config_.image_height,
                                   config_.hfov_deg * kPi / 180.0, rnd.cam_rot_offset * (kPi / 180.0));
  obs.image = to_rgb8(assets_->relit->render(cam, light_, colors_));
  return obs;
}

}  // namespace rns
