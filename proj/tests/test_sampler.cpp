// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>

#include "spfm/rng.hpp"
#include "spfm/sampler.hpp"

using namespace spfm;
using namespace spfm::sampler;

namespace {

net::ModelParameters constant_field_params(const Vec2& field) {
  net::ModelParameters p =
      net::init_params(0, std::vector<int>{net::kInputWidth, 2});
  p.weights[0].setZero();
  p.biases[0] = field;
  p.null_embedding.setZero();
  return p;
}

// The sampler's documented noise derivation, reproduced independently.
Vec2 expected_x0(const PolarCondition& c, std::uint64_t seed) {
  Rng rng = Rng::derive({seed, stream::kSampler,
                         std::bit_cast<std::uint64_t>(c.angle),
                         std::bit_cast<std::uint64_t>(c.radius)});
  return rng.normal2();
}

}  // namespace

TEST_CASE("guided_velocity identities") {
  const Vec2 vc(1.0, 0.0), vu(0.0, 1.0);
  CHECK(guided_velocity(vc, vu, 0.0) == vc);

  Rng rng = Rng::seeded(1);
  for (int i = 0; i < 30; ++i) {
    const Vec2 v = rng.normal2();
    const double w = rng.uniform(0.0, 4.0);
    CHECK(guided_velocity(v, v, w) == v);
  }

  const Vec2 g = guided_velocity(vc, vu, 1.0);
  CHECK(g.x() == 2.0);
  CHECK(g.y() == -1.0);

  // Affine in omega: g(w) = v_c + w (v_c - v_u).
  for (int i = 0; i < 20; ++i) {
    const Vec2 a = rng.normal2(), b = rng.normal2();
    const double w1 = rng.uniform(), w2 = rng.uniform();
    const Vec2 g1 = guided_velocity(a, b, w1);
    const Vec2 g2 = guided_velocity(a, b, w2);
    const Vec2 gm = guided_velocity(a, b, 0.5 * (w1 + w2));
    CHECK((0.5 * (g1 + g2) - gm).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("zero field returns the drawn noise unchanged") {
  const net::ModelParameters p = constant_field_params(Vec2(0, 0));
  const PolarCondition c{0.8, 1.7};
  SamplerConfig cfg{0.0, 50, 123};
  const Vec2 out = sample(p, c, cfg);
  const Vec2 x0 = expected_x0(c, cfg.seed);
  CHECK(out.x() == x0.x());
  CHECK(out.y() == x0.y());
}

TEST_CASE("constant field integrates to x0 + field") {
  SUBCASE("a single step is the identical expression, so bitwise equal") {
    const Vec2 field(1.5, -0.75);
    const net::ModelParameters p = constant_field_params(field);
    const PolarCondition c{0.3, 1.0};
    const Vec2 out = sample(p, c, SamplerConfig{0.0, 1, 9});
    const Vec2 want = expected_x0(c, 9) + field;
    CHECK(out.x() == want.x());
    CHECK(out.y() == want.y());
  }
  SUBCASE("independent of step count up to accumulated rounding") {
    const Vec2 field(0.3, 0.7);
    const net::ModelParameters p = constant_field_params(field);
    const PolarCondition c{2.1, 2.0};
    for (int steps : {1, 3, 7, 100, 250}) {
      SamplerConfig cfg{1.0, steps, 10};
      const Vec2 out = sample(p, c, cfg);
      const Vec2 want = expected_x0(c, 10) + field;
      CHECK((out - want).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("omega zero skips unconditional passes") {
  const net::ModelParameters p =
      net::init_params(4, std::vector<int>{net::kInputWidth, 16, 2});
  SampleStats stats;
  sample(p, {0.5, 1.0}, SamplerConfig{0.0, 40, 1}, &stats);
  CHECK(stats.cond_evals == 40);
  CHECK(stats.uncond_evals == 0);

  SampleStats stats2;
  sample(p, {0.5, 1.0}, SamplerConfig{0.5, 40, 1}, &stats2);
  CHECK(stats2.cond_evals == 40);
  CHECK(stats2.uncond_evals == 40);
}

TEST_CASE("sampler input validation") {
  const net::ModelParameters p = constant_field_params(Vec2(0, 0));
  CHECK_THROWS_AS(sample(p, {0, 1}, SamplerConfig{0.0, 0, 1}), InputError);
  CHECK_THROWS_AS(sample(p, {0, 1}, SamplerConfig{-0.5, 10, 1}), InputError);
}

TEST_CASE("divergent fields raise numeric errors with the step index") {
  net::ModelParameters p = constant_field_params(Vec2(0, 0));
  p.weights[0].setConstant(1e200);
  try {
    sample(p, {0.0, 1.0}, SamplerConfig{0.0, 10, 1});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("sample_batch equals mapping sample and is order stable") {
  const net::ModelParameters p =
      net::init_params(6, std::vector<int>{net::kInputWidth, 16, 2});
  std::vector<PolarCondition> conds;
  Rng rng = Rng::seeded(2);
  for (int i = 0; i < 12; ++i)
    conds.push_back({rng.uniform(0.0, 2 * M_PI), rng.uniform(0.5, 2.5)});
  const SamplerConfig cfg{0.5, 25, 77};

  const std::vector<Vec2> batch = sample_batch(p, conds, cfg);
  REQUIRE(batch.size() == conds.size());
  for (std::size_t i = 0; i < conds.size(); ++i) {
    const Vec2 single = sample(p, conds[i], cfg);
    CHECK(batch[i].x() == single.x());
    CHECK(batch[i].y() == single.y());
  }

  // Permuting the conditions permutes the outputs identically.
  std::vector<PolarCondition> shuffled = conds;
  std::reverse(shuffled.begin(), shuffled.end());
  const std::vector<Vec2> rev = sample_batch(p, shuffled, cfg);
  for (std::size_t i = 0; i < conds.size(); ++i) {
    CHECK(rev[conds.size() - 1 - i].x() == batch[i].x());
    CHECK(rev[conds.size() - 1 - i].y() == batch[i].y());
  }

  // Bitwise repeatability.
  const std::vector<Vec2> again = sample_batch(p, conds, cfg);
  for (std::size_t i = 0; i < conds.size(); ++i)
    CHECK(again[i] == batch[i]);

  CHECK_THROWS_AS(sample_batch(p, std::vector<PolarCondition>{}, cfg), InputError);
}
