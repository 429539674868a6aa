// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>

#include "rns/dynamics.hpp"

using namespace rns;

namespace {

DroneState run(DroneState s, double u, double seconds, double dt, const DynParams& p) {
  const int n = static_cast<int>(std::lround(seconds / dt));
  for (int i = 0; i < n; ++i) s = step(s, u, dt, p);
  return s;
}

}  // namespace

TEST_CASE("target speed") {
  const DynParams p;
  CHECK(target_speed(0.0, p) == 10.0);
  CHECK(target_speed(1.0, p) == 2.0);
  CHECK(target_speed(-1.0, p) == 2.0);
  CHECK(target_speed(3.0, p) == 2.0);
  CHECK(target_speed(0.75, p) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(target_speed(-0.75, p) == doctest::Approx(6.0).epsilon(1e-12));
  double prev = 11.0;
  for (double u = 0.0; u <= 1.0; u += 0.05) {
    CHECK(target_speed(u, p) <= prev);
    prev = target_speed(u, p);
  }
}

TEST_CASE("angle wrapping") {
  CHECK(wrap_angle(3.5 * kPi) == doctest::Approx(-0.5 * kPi).epsilon(1e-12));
  CHECK(wrap_angle(kPi) == kPi);
  CHECK(wrap_angle(-kPi) == kPi);
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(2.0 * kPi + 0.1) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(wrap_angle(-2.0 * kPi - 0.1) == doctest::Approx(-0.1).epsilon(1e-12));
  for (double a = -20.0; a < 20.0; a += 0.37) {
    const double w = wrap_angle(a);
    CHECK(w > -kPi);
    CHECK(w <= kPi);
    CHECK(std::abs(std::remainder(w - a, 2.0 * kPi)) < 1e-12);
  }
}

TEST_CASE("hover with thrust disabled stays put") {
  DynParams p;
  p.thrust_enabled = false;
  const DroneState s0 = hover_state(Vec3(1.0, -2.0, p.z_ref), 0.4);
  const DroneState s = run(s0, 0.0, 10.0, 0.1, p);
  CHECK((s.p - s0.p).norm() < 1e-9);
  CHECK(s.v.norm() < 1e-9);
  CHECK(s.psi == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("yaw rate follows the first-order response") {
  DynParams p;
  // 400 substeps per yaw time constant keeps the Euler error well below 1e-3.
  p.substeps = static_cast<int>(std::lround(0.1 * p.k_psi * 400));
  const double u = 0.8;
  DroneState s = hover_state(Vec3(0, 0, p.z_ref), 0.0);
  for (int i = 1; i <= 20; ++i) {
    s = step(s, u, 0.1, p);
    const double t = 0.1 * i;
    const double rate = u * (1.0 - std::exp(-p.k_psi * t));
    const double angle = u * (t - (1.0 - std::exp(-p.k_psi * t)) / p.k_psi);
    CHECK(std::abs(s.psi_dot - rate) <= 1e-3);
    CHECK(std::abs(s.psi - wrap_angle(angle)) <= 1e-3);
  }
}

TEST_CASE("speed servo reaches the target within 5 / k_v") {
  const DynParams p;
  DroneState s = hover_state(Vec3(0, 0, p.z_ref), 0.3);
  s = run(s, 0.0, 5.0 / p.k_v, 0.1, p);
  const Vec3 d(std::cos(s.psi), std::sin(s.psi), 0.0);
  CHECK(std::abs(s.v.dot(d) - 10.0) <= 0.02 * 10.0);

  // A slower target reached from the fast one.
  DynParams slow = p;
  slow.v_base = 4.0;
  s = run(s, 0.0, 5.0 / p.k_v, 0.1, slow);
  CHECK(std::abs(s.v.dot(d) - 4.0) <= 0.02 * 4.0);
}

TEST_CASE("altitude hold recovers from a 0.5 m offset") {
  const DynParams p;
  for (double offset : {0.5, -0.5}) {
    DroneState s = hover_state(Vec3(0, 0, p.z_ref + offset), 0.0);
    s = run(s, 0.0, 3.0, 0.1, p);
    CHECK(std::abs(s.p.z() - p.z_ref) <= 0.1);
  }
}

TEST_CASE("kinetic energy never grows without thrust") {
  DynParams p;
  p.thrust_enabled = false;
  DroneState s = hover_state(Vec3(0, 0, p.z_ref), 0.0);
  s.v = Vec3(7.0, -3.0, 0.0);
  double prev = s.v.squaredNorm();
  for (int i = 0; i < 100; ++i) {
    s = step(s, 0.5, 0.1, p);
    const double e = s.v.squaredNorm();
    CHECK(e <= prev);
    prev = e;
  }
  CHECK(prev < 49.0 + 9.0);
}

TEST_CASE("invalid inputs") {
  const DynParams p;
  DroneState s = hover_state(Vec3::Zero(), 0.0);
  CHECK_THROWS_AS(step(s, std::numeric_limits<double>::quiet_NaN(), 0.1, p), InputError);
  CHECK_THROWS_AS(step(s, 0.0, 0.0, p), InputError);
  s.v.x() = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(step(s, 0.0, 0.1, p), InputError);
  DynParams bad = p;
  bad.v_min = 20.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = p;
  bad.substeps = 0;
  CHECK_THROWS_AS(bad.validate(), InputError);
}
