// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace rns {

using Vec3 = Eigen::Vector3d;
using Vec3f = Eigen::Vector3f;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

// Invalid argument to a public operation (bad shape, out-of-range value).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed scene / field / image file. `offset` is the byte offset at which
// the problem was detected, `line` the 1-based header line when applicable.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset, std::size_t line = 0)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) +
                           (line ? ", line " + std::to_string(line) : std::string()) + ")"),
        offset_(offset),
        line_(line) {}

  std::size_t offset() const { return offset_; }
  std::size_t line() const { return line_; }

 private:
  std::size_t offset_;
  std::size_t line_;
};

// Environment used out of order (step before reset, step after termination).
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Start/goal sampling gave up.
class SceneTooDense : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rns
