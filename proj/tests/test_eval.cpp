// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "spfm/eval.hpp"
#include "spfm/rng.hpp"

using namespace spfm;
using namespace spfm::eval;

namespace {

net::ModelParameters zero_field() {
  net::ModelParameters p =
      net::init_params(0, std::vector<int>{net::kInputWidth, 2});
  p.weights[0].setZero();
  p.biases[0].setZero();
  p.null_embedding.setZero();
  return p;
}

// Linear probe responding only to the condition slot; see flow tests.
net::ModelParameters cond_probe(const Vec2& response) {
  net::ModelParameters p = zero_field();
  p.weights[0].col(net::kInputWidth - 3) = response;
  return p;
}

std::vector<LossDiffRecord> make_records(
    const std::vector<std::tuple<double, double, LabelState>>& rows) {
  std::vector<LossDiffRecord> out;
  int i = 0;
  for (const auto& [t, diff, label] : rows) {
    LossDiffRecord r;
    r.sample_index = i++;
    r.t_prime = t;
    r.loss_diff = diff;
    r.label = label;
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("conditional_mse basics") {
  std::vector<PolarCondition> conds = {{0.0, 1.0}, {M_PI / 2, 2.0}, {1.1, 0.5}};
  std::vector<Vec2> exact;
  for (const auto& c : conds) exact.push_back(data::polar_to_euclidean(c));
  CHECK(conditional_mse(exact, conds) == 0.0);

  const std::vector<PolarCondition> one = {{0.0, 1.0}};
  const std::vector<Vec2> zero = {Vec2(0.0, 0.0)};
  CHECK(conditional_mse(zero, one) == 1.0);

  CHECK_THROWS_AS(conditional_mse(zero, conds), InputError);
  CHECK_THROWS_AS(conditional_mse(std::vector<Vec2>{},
                                  std::vector<PolarCondition>{}),
                  InputError);
}

TEST_CASE("conditional_mse translation against direct recomputation") {
  Rng rng = Rng::seeded(21);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 5 + static_cast<int>(rng.uniform_index(10));
    std::vector<PolarCondition> conds;
    std::vector<Vec2> gen;
    for (int i = 0; i < n; ++i) {
      conds.push_back({rng.uniform(0.0, 2 * M_PI), rng.uniform(0.0, 2.5)});
      gen.push_back(rng.normal2());
    }
    const Vec2 d = rng.normal2();
    std::vector<Vec2> shifted;
    for (const Vec2& g : gen) shifted.push_back(g + d);

    // Direct recomputation oracle for the shifted set.
    double expect = 0.0;
    for (int i = 0; i < n; ++i)
      expect += (gen[static_cast<std::size_t>(i)] + d -
                 data::polar_to_euclidean(conds[static_cast<std::size_t>(i)]))
                    .squaredNorm();
    expect /= n;
    CHECK(conditional_mse(shifted, conds) ==
          doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("loss_diff_sweep on a zero field is identically zero") {
  const net::ModelParameters p = zero_field();
  std::vector<LabeledSample> samples;
  Rng rng = Rng::seeded(3);
  for (int i = 0; i < 8; ++i)
    samples.push_back({rng.normal2(),
                       {rng.uniform(0.0, 2 * M_PI), rng.uniform(0.5, 2.0)},
                       i % 2 ? LabelState::Incorrect : LabelState::Correct});
  const std::vector<double> ts = {0.1, 0.3, 0.5, 0.7, 0.9};
  const auto records = loss_diff_sweep(p, samples, ts, 7);
  REQUIRE(records.size() == samples.size() * ts.size());
  for (const auto& r : records) CHECK(r.loss_diff == 0.0);
}

TEST_CASE("loss_diff_sweep favors an exact conditional branch at every t'") {
  // Sample at (1,0) with condition (0,1): the probe maps that condition to
  // a velocity that is correct whenever x0 + v = x1.
  std::vector<LabeledSample> samples = {
      {Vec2(1.0, 0.0), {0.0, 1.0}, LabelState::Correct}};
  const std::vector<double> ts = {0.1, 0.3, 0.5, 0.7, 0.9};

  // Recover the drawn x0 to build the exact-response probe.
  Rng rng = Rng::derive({7, stream::kEvalNoise, 0});
  const Vec2 x0 = rng.normal2();
  const net::ModelParameters p = cond_probe(Vec2(1.0, 0.0) - x0);

  const auto records = loss_diff_sweep(p, samples, ts, 7);
  REQUIRE(records.size() == ts.size());
  for (const auto& r : records) {
    CHECK(r.loss_diff < 0.0);
    CHECK(r.sample_index == 0);
  }
}

TEST_CASE("loss_diff_sweep reuses one x0 across all t'") {
  const net::ModelParameters p =
      net::init_params(11, std::vector<int>{net::kInputWidth, 16, 2});
  std::vector<LabeledSample> samples;
  Rng rng = Rng::seeded(5);
  for (int i = 0; i < 4; ++i)
    samples.push_back({rng.normal2(),
                       {rng.uniform(0.0, 2 * M_PI), rng.uniform(0.5, 2.0)},
                       LabelState::Correct});
  const std::vector<double> ts = {0.2, 0.5, 0.8};
  const auto records = loss_diff_sweep(p, samples, ts, 13);

  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng sr = Rng::derive({13, stream::kEvalNoise, static_cast<std::uint64_t>(i)});
    const Vec2 x0 = sr.normal2();
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const auto& rec = records[i * ts.size() + k];
      const flow::GateRecord again =
          flow::spfm_gate(p, samples[i].x1, samples[i].condition, x0, ts[k]);
      CHECK(rec.loss_diff == again.l_cond - again.l_uncond);
    }
  }
}

TEST_CASE("loss_diff_sweep validates input") {
  const net::ModelParameters p = zero_field();
  std::vector<LabeledSample> samples = {
      {Vec2(1, 0), {0.0, 1.0}, LabelState::Correct}};
  CHECK_THROWS_AS(loss_diff_sweep(p, samples, std::vector<double>{0.0, 0.5}, 1),
                  InputError);
  CHECK_THROWS_AS(loss_diff_sweep(p, samples, std::vector<double>{1.0}, 1),
                  InputError);
  CHECK_THROWS_AS(loss_diff_sweep(p, std::vector<LabeledSample>{},
                                  std::vector<double>{0.5}, 1),
                  InputError);
  CHECK_THROWS_AS(loss_diff_sweep(p, samples, std::vector<double>{0.5}, 1, 0),
                  InputError);
}

TEST_CASE("detection_scores hand-enumerated confusion matrix") {
  const auto records = make_records({{0.5, 1.0, LabelState::Incorrect},
                                     {0.5, 1.0, LabelState::Correct},
                                     {0.5, -1.0, LabelState::Correct},
                                     {0.5, -1.0, LabelState::Incorrect}});
  const auto scores = detection_scores(records, 0.0);
  REQUIRE(scores.size() == 1);
  CHECK(scores[0].precision == 0.5);
  CHECK(scores[0].recall == 0.5);
  CHECK(scores[0].f1 == 0.5);
  CHECK_FALSE(scores[0].degenerate);
}

TEST_CASE("detection_scores perfect and degenerate cases") {
  SUBCASE("all predicted and labeled incorrect") {
    const auto records = make_records({{0.5, 2.0, LabelState::Incorrect},
                                       {0.5, 3.0, LabelState::Incorrect}});
    const auto scores = detection_scores(records, 0.0);
    CHECK(scores[0].precision == 1.0);
    CHECK(scores[0].recall == 1.0);
    CHECK(scores[0].f1 == 1.0);
  }
  SUBCASE("nothing predicted positive with positives present") {
    const auto records = make_records({{0.5, -2.0, LabelState::Incorrect},
                                       {0.5, -3.0, LabelState::Correct}});
    const auto scores = detection_scores(records, 0.0);
    CHECK(scores[0].recall == 0.0);
    CHECK(scores[0].f1 == 0.0);
    CHECK(scores[0].degenerate);
  }
  SUBCASE("no positives and no predictions sets the flag") {
    const auto records = make_records({{0.5, -1.0, LabelState::Correct}});
    const auto scores = detection_scores(records, 0.0);
    CHECK(scores[0].f1 == 0.0);
    CHECK(scores[0].degenerate);
  }
  CHECK_THROWS_AS(detection_scores(std::vector<LossDiffRecord>{}, 0.0),
                  InputError);
}

TEST_CASE("detection f1 identity and recall monotonicity in the threshold") {
  Rng rng = Rng::seeded(9);
  std::vector<std::tuple<double, double, LabelState>> rows;
  for (int i = 0; i < 200; ++i)
    rows.emplace_back(0.5, rng.normal(),
                      rng.uniform() < 0.4 ? LabelState::Incorrect
                                          : LabelState::Correct);
  const auto records = make_records(rows);

  double prev_recall = 1.0;
  for (double thr : {-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0}) {
    const auto scores = detection_scores(records, thr);
    REQUIRE(scores.size() == 1);
    const auto& s = scores[0];
    if (s.precision > 0.0 && s.recall > 0.0)
      CHECK(s.f1 == 2.0 * s.precision * s.recall / (s.precision + s.recall));
    CHECK(s.recall <= prev_recall);
    prev_recall = s.recall;
  }
}

TEST_CASE("detection groups by t' in first-appearance order") {
  const auto records = make_records({{0.1, 1.0, LabelState::Incorrect},
                                     {0.5, -1.0, LabelState::Correct},
                                     {0.1, -1.0, LabelState::Correct},
                                     {0.9, 1.0, LabelState::Incorrect}});
  const auto scores = detection_scores(records, 0.0);
  REQUIRE(scores.size() == 3);
  CHECK(scores[0].t_prime == 0.1);
  CHECK(scores[1].t_prime == 0.5);
  CHECK(scores[2].t_prime == 0.9);
}

TEST_CASE("purification_report partitions and validates coverage") {
  data::Dataset ds = data::corrupt_labels(data::gen_two_circles(50, 3), 0.4, 4);
  std::vector<flow::GateRecord> recs;
  for (int i = 0; i < 50; ++i) {
    flow::GateRecord r;
    r.sample_index = i;
    r.epoch = 10;
    r.decision = ds.samples[static_cast<std::size_t>(i)].corrupted
                     ? flow::GateDecision::TrainUnconditional
                     : flow::GateDecision::TrainConditional;
    recs.push_back(r);
  }

  SUBCASE("perfect filter") {
    const PurificationReport rep = purification_report(ds, recs);
    CHECK(rep.filtered_count == ds.corrupted_count());
    CHECK(rep.retained_count == 50 - ds.corrupted_count());
    CHECK(rep.filtered_corruption_rate == 1.0);
    CHECK(rep.retained_corruption_rate == 0.0);
  }

  SUBCASE("all conditional") {
    for (auto& r : recs) r.decision = flow::GateDecision::TrainConditional;
    const PurificationReport rep = purification_report(ds, recs);
    CHECK(rep.retained_count == 50);
    CHECK(rep.filtered_count == 0);
    CHECK(rep.filtered_corruption_rate == 0.0);
    CHECK(rep.retained_corruption_rate == doctest::Approx(0.4));
  }

  SUBCASE("missing record is an input error") {
    recs.pop_back();
    CHECK_THROWS_AS(purification_report(ds, recs), InputError);
  }

  SUBCASE("duplicate record is an input error") {
    recs.back().sample_index = 0;
    CHECK_THROWS_AS(purification_report(ds, recs), InputError);
  }
}

TEST_CASE("export_histogram basics") {
  SUBCASE("single record lands in one bin") {
    const auto records = make_records({{0.5, 0.37, LabelState::Correct}});
    const Histogram h = export_histogram(records, 0.5, 10);
    REQUIRE(h.counts_correct.size() == 10);
    CHECK(std::accumulate(h.counts_correct.begin(), h.counts_correct.end(), 0L) ==
          1);
    CHECK(std::accumulate(h.counts_incorrect.begin(), h.counts_incorrect.end(),
                          0L) == 0);
  }

  SUBCASE("counts are conserved per label") {
    Rng rng = Rng::seeded(14);
    std::vector<std::tuple<double, double, LabelState>> rows;
    int n_inc = 0;
    for (int i = 0; i < 500; ++i) {
      const bool inc = rng.uniform() < 0.3;
      n_inc += inc ? 1 : 0;
      rows.emplace_back(0.5, rng.normal(),
                        inc ? LabelState::Incorrect : LabelState::Correct);
    }
    const Histogram h = export_histogram(make_records(rows), 0.5, 17);
    CHECK(std::accumulate(h.counts_incorrect.begin(), h.counts_incorrect.end(),
                          0L) == n_inc);
    CHECK(std::accumulate(h.counts_correct.begin(), h.counts_correct.end(), 0L) ==
          500 - n_inc);
    REQUIRE(h.edges.size() == 18);
    for (std::size_t i = 1; i < h.edges.size(); ++i)
      CHECK(h.edges[i] > h.edges[i - 1]);
  }

  SUBCASE("one bin holds everything") {
    const auto records = make_records({{0.5, -1.0, LabelState::Correct},
                                       {0.5, 2.0, LabelState::Incorrect},
                                       {0.5, 0.5, LabelState::Correct}});
    const Histogram h = export_histogram(records, 0.5, 1);
    CHECK(h.counts_correct[0] == 2);
    CHECK(h.counts_incorrect[0] == 1);
  }

  SUBCASE("errors") {
    const auto records = make_records({{0.5, 0.0, LabelState::Correct}});
    CHECK_THROWS_AS(export_histogram(records, 0.5, 0), InputError);
    CHECK_THROWS_AS(export_histogram(records, 0.7, 10), InputError);
  }
}

TEST_CASE("zero field detection predicts nothing positive at threshold zero") {
  const net::ModelParameters p = zero_field();
  std::vector<LabeledSample> samples;
  Rng rng = Rng::seeded(15);
  for (int i = 0; i < 10; ++i)
    samples.push_back({rng.normal2(),
                       {rng.uniform(0.0, 2 * M_PI), 1.0},
                       i % 2 ? LabelState::Incorrect : LabelState::Correct});
  const auto records =
      loss_diff_sweep(p, samples, std::vector<double>{0.5}, 3);
  const auto scores = detection_scores(records, 0.0);
  REQUIRE(scores.size() == 1);
  CHECK(scores[0].recall == 0.0);
  CHECK(scores[0].f1 == 0.0);
}
