// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#include "rns/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace rns {

bool DroneState::finite() const {
  return p.allFinite() && v.allFinite() && std::isfinite(psi) && std::isfinite(psi_dot) &&
         std::isfinite(pid.integral) && std::isfinite(pid.prev_error);
}

void DynParams::validate() const {
  const double gains[] = {k_psi, c_d, mass, g, k_v, kp, ki, kd, integral_limit, u_max, v_base, v_min};
  for (double x : gains) {
    if (!(x > 0.0) || !std::isfinite(x)) throw InputError("dynamics gains must be finite and > 0");
  }
  if (v_min > v_base) throw InputError("v_min must not exceed v_base");
  if (substeps < 1) throw InputError("substeps must be >= 1");
  if (!std::isfinite(z_ref)) throw InputError("z_ref must be finite");
}

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

double target_speed(double u, const DynParams& params) {
  const double frac = std::min(std::abs(u), params.u_max) / params.u_max;
  return params.v_min + (params.v_base - params.v_min) * std::sqrt(1.0 - frac);
}

void substep(DroneState& s, double u, double h, const DynParams& prm) {
  const double psi_ddot = prm.k_psi * (u - s.psi_dot);
  const Vec3 d(std::cos(s.psi), std::sin(s.psi), 0.0);

  Vec3 force = Vec3::Zero();
  if (prm.thrust_enabled) {
    const double v_tar = target_speed(u, prm);
    double along = prm.mass * prm.k_v * (v_tar - s.v.dot(d));
    if (prm.drag_feedforward) along += prm.c_d * v_tar * v_tar;
    force += along * d;
  }
  force += -prm.c_d * s.v.norm() * s.v;
  force.z() -= prm.mass * prm.g;

  // Derivative on the measurement: z_ref is constant, so de/dt = -v_z.
  const double err = prm.z_ref - s.p.z();
  s.pid.integral = std::clamp(s.pid.integral + h * err, -prm.integral_limit, prm.integral_limit);
  s.pid.prev_error = err;
  const double pid = prm.kp * err + prm.ki * s.pid.integral - prm.kd * s.v.z();
  force.z() += prm.mass * prm.g + prm.mass * pid;

  s.v += h * force / prm.mass;
  s.p += h * s.v;
  s.psi_dot += h * psi_ddot;
  s.psi = wrap_angle(s.psi + h * s.psi_dot);
}

DroneState step(const DroneState& state, double u, double dt, const DynParams& params) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("dynamics step needs dt > 0");
  if (!state.finite() || !std::isfinite(u)) throw InputError("non-finite drone state or command");
  DroneState s = state;
  const double h = dt / params.substeps;
  for (int i = 0; i < params.substeps; ++i) substep(s, u, h, params);
  return s;
}

DroneState hover_state(const Vec3& p, double psi) {
  DroneState s;
  s.p = p;
  s.psi = wrap_angle(psi);
  return s;
}

}  // namespace rns
