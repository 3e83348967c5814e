// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace spfm {

using Scalar = double;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

// Polar condition c = (angle, radius). Angle in radians, radius >= 0.
struct PolarCondition {
  Scalar angle = 0.0;
  Scalar radius = 0.0;
};

// Bad caller-supplied values (out-of-range scalar, malformed file, ...).
// CLI maps these to exit code 1.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values produced during computation. CLI maps these to exit 2.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Inconsistent internal state (e.g. corrupted checkpoint dimensions).
struct InternalError : std::runtime_error {
  explicit InternalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace spfm
