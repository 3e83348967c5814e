// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spfm/net.hpp"
#include "spfm/types.hpp"

namespace spfm::sampler {

// omega == 0 turns guidance off entirely (no unconditional evaluations).
struct SamplerConfig {
  double omega = 0.0;
  int n_steps = 100;
  std::uint64_t seed = 0;
};

// Forward-pass counters, used to assert the omega=0 cost property.
struct SampleStats {
  long cond_evals = 0;
  long uncond_evals = 0;
};

// (1 + omega) * v_cond - omega * v_uncond.
Vec2 guided_velocity(const Vec2& v_cond, const Vec2& v_uncond, double omega);

// Explicit Euler from t=0 to t=1 with uniform steps and left-endpoint time
// evaluation: x <- x + (1/n) * v(x, k/n) for k = 0..n-1, starting from
// x0 ~ N(0, I).
//
// The noise stream is derived from {seed, kSampler, bits(angle),
// bits(radius)}, i.e. from the condition's value. Identical conditions
// therefore draw identical noise, and permuting a batch permutes its
// outputs. Throws NumericError (with the step index) if the state leaves
// the finite range.
Vec2 sample(const net::ModelParameters& p, const PolarCondition& condition,
            const SamplerConfig& cfg, SampleStats* stats = nullptr);

// Maps `sample` over the conditions; output order matches input order.
std::vector<Vec2> sample_batch(const net::ModelParameters& p,
                               std::span<const PolarCondition> conditions,
                               const SamplerConfig& cfg,
                               SampleStats* stats = nullptr);

}  // namespace spfm::sampler
