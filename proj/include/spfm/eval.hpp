// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spfm/data.hpp"
#include "spfm/flow.hpp"
#include "spfm/net.hpp"
#include "spfm/types.hpp"

namespace spfm::eval {

enum class LabelState { Correct, Incorrect };

std::string to_string(LabelState s);
LabelState label_state_from_string(const std::string& s);

struct LabeledSample {
  Vec2 x1 = Vec2::Zero();
  PolarCondition condition;
  LabelState label = LabelState::Correct;
};

struct LossDiffRecord {
  int sample_index = 0;
  double t_prime = 0.0;
  double loss_diff = 0.0;  // l_cond - l_uncond
  LabelState label = LabelState::Correct;
};

struct DetectionScore {
  double t_prime = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;
  // Set when the group has no actual or no predicted positives; the
  // affected ratios (and f1) are reported as 0.
  bool degenerate = false;
};

struct PurificationReport {
  int retained_count = 0;
  int filtered_count = 0;
  double retained_corruption_rate = 0.0;
  double filtered_corruption_rate = 0.0;
};

struct Histogram {
  double t_prime = 0.0;
  std::vector<double> edges;  // bins + 1 ascending edges
  std::vector<long> counts_correct;
  std::vector<long> counts_incorrect;
};

// Mean over i of || generated[i] - polar_to_euclidean(conditions[i]) ||^2.
double conditional_mse(std::span<const Vec2> generated,
                       std::span<const PolarCondition> conditions);

// Loss difference l_cond - l_uncond per (sample, t'). One noise draw per
// sample (stream {noise_seed, kEvalNoise, index}) is reused across every
// t'; with n_noise_draws > 1 the difference is averaged over that many
// draws. Both losses always share the identical x_{t'}. Gradient-free.
// Records are emitted sample-major (all t' for sample 0, then sample 1, ...).
std::vector<LossDiffRecord> loss_diff_sweep(const net::ModelParameters& p,
                                            std::span<const LabeledSample> samples,
                                            std::span<const double> t_list,
                                            std::uint64_t noise_seed,
                                            int n_noise_draws = 1);

// Per-t' precision/recall/F1 of "predict Incorrect iff loss_diff >
// threshold" against the records' label states. Groups appear in order of
// first appearance in the record sequence.
std::vector<DetectionScore> detection_scores(std::span<const LossDiffRecord> records,
                                             double threshold);

// Partition of the dataset by final-epoch gate decision with ground-truth
// corruption rates per side. Requires exactly one record per dataset row.
PurificationReport purification_report(const data::Dataset& ds,
                                       std::span<const flow::GateRecord> records);

// Equal-width bins over the observed loss_diff range at the given t', with
// per-label counts. A degenerate range (all values equal) widens to one unit.
Histogram export_histogram(std::span<const LossDiffRecord> records, double t_prime,
                           int bins);

}  // namespace spfm::eval
