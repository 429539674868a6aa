// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#include "rns/sh.hpp"

#include <array>
#include <cmath>

namespace rns::sh {

namespace {

void check_degree(int degree) {
  if (degree < 0 || degree > kMaxDegree) {
    throw InputError("SH degree " + std::to_string(degree) + " outside [0, " +
                     std::to_string(kMaxDegree) + "]");
  }
}

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// Normalisation K_lm = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!), tabulated once.
struct NormTable {
  std::array<double, coeff_count(kMaxDegree)> k{};
  NormTable() {
    for (int l = 0; l <= kMaxDegree; ++l) {
      for (int m = 0; m <= l; ++m) {
        k[index(l, m)] = std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * factorial(l - m) / factorial(l + m));
      }
    }
  }
};

const NormTable& norms() {
  static const NormTable table;
  return table;
}

}  // namespace

ShCoeffs::ShCoeffs(int degree, int channels)
    : degree_(degree), channels_(channels), values_(static_cast<std::size_t>(channels) * coeff_count(degree), 0.0) {
  check_degree(degree);
  if (channels != 1 && channels != 3) throw InputError("SH channel count must be 1 or 3");
}

ShCoeffs::ShCoeffs(int degree, int channels, std::vector<double> values) : ShCoeffs(degree, channels) {
  if (values.size() != values_.size()) {
    throw InputError("SH coefficient count " + std::to_string(values.size()) + " does not match " +
                     std::to_string(values_.size()));
  }
  values_ = std::move(values);
  if (!all_finite()) throw InputError("SH coefficients must be finite");
}

bool ShCoeffs::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::vector<double> ShCoeffs::eval(const Vec3& dir) const {
  const std::vector<double> basis = eval_basis(degree_, dir);
  std::vector<double> out(channels_, 0.0);
  for (int c = 0; c < channels_; ++c) {
    auto ch = channel(c);
    for (int i = 0; i < count(); ++i) out[c] += ch[i] * basis[i];
  }
  return out;
}

ShCoeffs& ShCoeffs::operator+=(const ShCoeffs& other) {
  if (other.degree_ != degree_ || other.channels_ != channels_) {
    throw InputError("SH addition needs matching degree and channels");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

ShCoeffs& ShCoeffs::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

void eval_basis_unchecked(int degree, const Vec3& dir, std::span<double> out) {
  const double x = dir.x();
  const double y = dir.y();
  const double z = dir.z();
  const auto& k = norms().k;

  // Associated Legendre P_l^m(z) without the Condon-Shortley phase, and
  // cos(m p) sin^m(t), sin(m p) sin^m(t) from the complex power (x + iy)^m.
  std::array<std::array<double, kMaxDegree + 1>, kMaxDegree + 1> p{};
  // Here p[l][m] holds P_l^m(z) / sin^m(t), which is polynomial in z.
  for (int m = 0; m <= degree; ++m) {
    // P_m^m / sin^m = (2m-1)!!
    double pmm = 1.0;
    for (int i = 1; i <= m; ++i) pmm *= (2.0 * i - 1.0);
    p[m][m] = pmm;
    if (m + 1 <= degree) p[m + 1][m] = z * (2.0 * m + 1.0) * pmm;
    for (int l = m + 2; l <= degree; ++l) {
      p[l][m] = ((2.0 * l - 1.0) * z * p[l - 1][m] - (l + m - 1.0) * p[l - 2][m]) / (l - m);
    }
  }

  double cm = 1.0;  // Re (x + iy)^m
  double sm = 0.0;  // Im (x + iy)^m
  for (int m = 0; m <= degree; ++m) {
    for (int l = m; l <= degree; ++l) {
      if (m == 0) {
        out[index(l, 0)] = k[index(l, 0)] * p[l][0];
      } else {
        const double a = std::sqrt(2.0) * k[index(l, m)] * p[l][m];
        out[index(l, m)] = a * cm;
        out[index(l, -m)] = a * sm;
      }
    }
    const double next_c = cm * x - sm * y;
    sm = cm * y + sm * x;
    cm = next_c;
  }
}

std::vector<double> eval_basis(int degree, const Vec3& dir) {
  check_degree(degree);
  const double n = dir.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-9) {
    throw InputError("SH direction is not unit length (norm " + std::to_string(n) + ")");
  }
  std::vector<double> out(coeff_count(degree));
  eval_basis_unchecked(degree, dir, out);
  return out;
}

ShCoeffs rotate_z(const ShCoeffs& c, double angle) {
  ShCoeffs out = c;
  for (int ch = 0; ch < c.channels(); ++ch) {
    for (int l = 1; l <= c.degree(); ++l) {
      for (int m = 1; m <= l; ++m) {
        const double cs = std::cos(m * angle);
        const double sn = std::sin(m * angle);
        const double pos = c(ch, index(l, m));
        const double neg = c(ch, index(l, -m));
        out(ch, index(l, m)) = pos * cs - neg * sn;
        out(ch, index(l, -m)) = pos * sn + neg * cs;
      }
    }
  }
  return out;
}

std::vector<double> dot(const ShCoeffs& a, const ShCoeffs& b) {
  if (a.degree() != b.degree()) {
    throw InputError("SH dot product needs equal degree (" + std::to_string(a.degree()) + " vs " +
                     std::to_string(b.degree()) + ")");
  }
  const int channels = std::max(a.channels(), b.channels());
  std::vector<double> out(channels, 0.0);
  for (int c = 0; c < channels; ++c) {
    auto ca = a.channel(a.channels() == 1 ? 0 : c);
    auto cb = b.channel(b.channels() == 1 ? 0 : c);
    for (int i = 0; i < a.count(); ++i) out[c] += ca[i] * cb[i];
  }
  return out;
}

double clamped_cosine_zonal(int l) {
  switch (l) {
    case 0: return kPi;
    case 1: return 2.0 * kPi / 3.0;
    case 2: return kPi / 4.0;
    case 3: return 0.0;
    case 4: return -kPi / 24.0;
    default: throw InputError("clamped cosine only tabulated up to degree 4");
  }
}

ShCoeffs clamped_cosine_lobe(int degree, const Vec3& normal) {
  const std::vector<double> y = eval_basis(degree, normal);
  ShCoeffs out(degree, 1);
  for (int l = 0; l <= degree; ++l) {
    const double a = clamped_cosine_zonal(l);
    for (int m = -l; m <= l; ++m) out(0, index(l, m)) = a * y[index(l, m)];
  }
  return out;
}

Vec3 uniform_sphere(double u1, double u2) {
  const double z = 1.0 - 2.0 * u1;
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double phi = 2.0 * kPi * u2;
  return {r * std::cos(phi), r * std::sin(phi), z};
}

}  // namespace rns::sh
