// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

// Decoupled quadrotor model: first-order yaw, a speed servo along the
// heading, quadratic drag, gravity and an altitude PID, integrated with
// semi-implicit Euler substeps.

#pragma once

#include "rns/common.hpp"

namespace rns {

struct AltitudePid {
  double integral = 0.0;
  double prev_error = 0.0;
};

struct DroneState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  double psi = 0.0;
  double psi_dot = 0.0;
  AltitudePid pid;

  bool finite() const;
};

struct DynParams {
  double k_psi = 5.0;   // 1/s
  double c_d = 0.05;    // kg/m
  double mass = 0.6;    // kg
  double g = 9.81;      // m/s^2
  double k_v = 2.0;     // 1/s
  // Altitude PID gains in acceleration units (the force is mass times this).
  double kp = 6.0;
  double ki = 0.5;
  double kd = 3.0;
  double integral_limit = 2.0;  // m s
  double z_ref = 1.5;   // m
  int substeps = 10;
  double u_max = 1.0;   // rad/s
  double v_base = 10.0; // m/s
  double v_min = 2.0;   // m/s
  bool thrust_enabled = true;
  // Adds c_d v_tar^2 along the heading so the servo settles on v_tar
  // instead of where servo and drag forces balance.
  bool drag_feedforward = true;

  void validate() const;
};

// (-pi, pi].
double wrap_angle(double a);

double target_speed(double u, const DynParams& params);

// One integration substep of length h under yaw-rate command u.
void substep(DroneState& s, double u, double h, const DynParams& params);

// Δt split into params.substeps equal substeps. Throws InputError on a
// non-finite state or Δt <= 0.
DroneState step(const DroneState& state, double u, double dt, const DynParams& params);

// Hover at `p` with heading `psi`, PID at rest.
DroneState hover_state(const Vec3& p, double psi);

}  // namespace rns
