// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

// Real spherical harmonics.
//
// Coefficients are stored band by band, l ascending, and within a band m runs
// from -l to +l, so the flat index of (l, m) is l*l + l + m. The basis has no
// Condon-Shortley phase:
//
//   Y_l0      = K_l0 P_l(cos t)
//   Y_lm, m>0 = sqrt(2) K_lm cos(m p) P_l^m(cos t)
//   Y_lm, m<0 = sqrt(2) K_l|m| sin(|m| p) P_l^|m|(cos t)
//
// so that Y_1,-1 ~ y, Y_1,0 ~ z and Y_1,1 ~ x, all with positive sign.

#pragma once

#include <span>
#include <vector>

#include "rns/common.hpp"

namespace rns::sh {

inline constexpr int kMaxDegree = 4;
inline constexpr int kDefaultDegree = 2;

constexpr int coeff_count(int degree) { return (degree + 1) * (degree + 1); }
constexpr int index(int l, int m) { return l * l + l + m; }

// Real SH coefficients for 1 or 3 colour channels, channel-major.
class ShCoeffs {
 public:
  ShCoeffs() = default;
  ShCoeffs(int degree, int channels);
  ShCoeffs(int degree, int channels, std::vector<double> values);

  static ShCoeffs zeros(int degree, int channels) { return ShCoeffs(degree, channels); }

  int degree() const { return degree_; }
  int channels() const { return channels_; }
  int count() const { return coeff_count(degree_); }
  std::size_t size() const { return values_.size(); }

  double& operator()(int channel, int i) { return values_[channel * count() + i]; }
  double operator()(int channel, int i) const { return values_[channel * count() + i]; }

  std::span<double> channel(int c) { return {values_.data() + c * count(), static_cast<std::size_t>(count())}; }
  std::span<const double> channel(int c) const {
    return {values_.data() + c * count(), static_cast<std::size_t>(count())};
  }
  const std::vector<double>& values() const { return values_; }

  bool all_finite() const;

  // Evaluates the expansion in direction `dir` (one value per channel).
  std::vector<double> eval(const Vec3& dir) const;

  ShCoeffs& operator+=(const ShCoeffs& other);
  ShCoeffs& operator*=(double s);
  friend ShCoeffs operator+(ShCoeffs a, const ShCoeffs& b) { return a += b; }
  friend ShCoeffs operator*(ShCoeffs a, double s) { return a *= s; }
  friend ShCoeffs operator*(double s, ShCoeffs a) { return a *= s; }
  bool operator==(const ShCoeffs&) const = default;

 private:
  int degree_ = 0;
  int channels_ = 1;
  std::vector<double> values_ = std::vector<double>(1, 0.0);
};

// Y_lm(dir) for every (l, m) up to `degree`. Throws InputError when `dir`
// deviates from unit length by more than 1e-9 or degree is outside [0, 4].
std::vector<double> eval_basis(int degree, const Vec3& dir);

// Writes the basis into `out` (size coeff_count(degree)) without allocating
// or validating. `dir` must already be unit length.
void eval_basis_unchecked(int degree, const Vec3& dir, std::span<double> out);

// Rotation of the represented function about +z: the result evaluates at w
// to what `c` evaluates at R_z(-angle) w.
ShCoeffs rotate_z(const ShCoeffs& c, double angle);

// Per-channel sum over m of a^m b^m. A one-channel side is broadcast against
// a three-channel side.
std::vector<double> dot(const ShCoeffs& a, const ShCoeffs& b);

// Zonal coefficients of the clamped cosine max(0, n.w): A_l such that the
// projection about normal n is A_l Y_lm(n).
double clamped_cosine_zonal(int l);

// Projection of max(0, n.w) onto degree `degree`, one channel.
ShCoeffs clamped_cosine_lobe(int degree, const Vec3& normal);

// Uniform direction on the sphere from two uniforms in [0, 1).
Vec3 uniform_sphere(double u1, double u2);

}  // namespace rns::sh
