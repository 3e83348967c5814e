// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "spfm/sampler.hpp"

#include <bit>
#include <cmath>

#include "spfm/rng.hpp"

namespace spfm::sampler {

Vec2 guided_velocity(const Vec2& v_cond, const Vec2& v_uncond, double omega) {
  // Evaluated as v_cond + omega * (v_cond - v_uncond), which equals
  // (1 + omega) * v_cond - omega * v_uncond but keeps the omega=0 and
  // v_cond == v_uncond identities exact in floating point.
  return v_cond + omega * (v_cond - v_uncond);
}

Vec2 sample(const net::ModelParameters& p, const PolarCondition& condition,
            const SamplerConfig& cfg, SampleStats* stats) {
  if (cfg.n_steps < 1) throw InputError("sampler: n_steps must be >= 1");
  if (!(cfg.omega >= 0.0)) throw InputError("sampler: omega must be >= 0");

  Rng rng = Rng::derive({cfg.seed, stream::kSampler,
                         std::bit_cast<std::uint64_t>(condition.angle),
                         std::bit_cast<std::uint64_t>(condition.radius)});
  Vec2 x = rng.normal2();

  const Vector cond_embed = net::embed_condition(condition);
  const int cond_w = static_cast<int>(p.null_embedding.size());
  const double dt = 1.0 / static_cast<double>(cfg.n_steps);
  net::Workspace ws;
  net::NetInput in;

  for (int k = 0; k < cfg.n_steps; ++k) {
    in.x_t = x;
    in.t = static_cast<double>(k) / static_cast<double>(cfg.n_steps);
    in.condition = cond_embed;
    net::assemble_input(p, in, ws.input);
    const Vec2 v_cond = net::forward_assembled(p, ws.input, ws);
    if (stats) stats->cond_evals += 1;

    Vec2 v = v_cond;
    if (cfg.omega > 0.0) {
      ws.input.tail(cond_w) = p.null_embedding;
      const Vec2 v_uncond = net::forward_assembled(p, ws.input, ws);
      if (stats) stats->uncond_evals += 1;
      v = guided_velocity(v_cond, v_uncond, cfg.omega);
    }
    x += dt * v;
    if (!x.allFinite())
      throw NumericError("sampler: non-finite state at step " +
                         std::to_string(k));
  }
  return x;
}

std::vector<Vec2> sample_batch(const net::ModelParameters& p,
                               std::span<const PolarCondition> conditions,
                               const SamplerConfig& cfg, SampleStats* stats) {
  if (conditions.empty()) throw InputError("sample_batch: empty conditions");
  std::vector<Vec2> out;
  out.reserve(conditions.size());
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    try {
      out.push_back(sample(p, conditions[i], cfg, stats));
    } catch (const NumericError& err) {
      throw NumericError("sample_batch: condition " + std::to_string(i) + ": " +
                         err.what());
    }
  }
  return out;
}

}  // namespace spfm::sampler
