// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spfm/data.hpp"
#include "spfm/net.hpp"
#include "spfm/rng.hpp"
#include "spfm/types.hpp"

namespace spfm::flow {

// ReuseGateT trains a gated sample at (t_gate, gate noise) so the gating
// loss is also the optimized loss; SeparateT keeps the standard objective
// with a fresh t ~ U(0,1) and fresh noise. SeparateT is the default.
enum class GateReuseMode { SeparateT, ReuseGateT };

enum class GateDecision { TrainConditional, TrainUnconditional };

std::string to_string(GateReuseMode m);
std::string to_string(GateDecision d);
GateReuseMode gate_reuse_from_string(const std::string& s);

struct TrainingConfig {
  int epochs = 100;
  int warmup_epochs = 4;
  int batch_size = 128;
  double cfg_dropout_rate = 0.1;
  double gate_time = 0.5;
  bool spfm_enabled = true;
  GateReuseMode gate_reuse = GateReuseMode::SeparateT;
  net::AdamHyper optimizer;
  std::vector<int> hidden_widths = {128, 128, 128};
  std::uint64_t data_seed = 1;
  std::uint64_t train_seed = 1;

  std::vector<int> widths() const;
  void validate() const;  // throws InputError
};

// One gate evaluation. epoch is 1-based (epoch 1 is the first).
struct GateRecord {
  int sample_index = 0;
  double l_cond = 0.0;
  double l_uncond = 0.0;
  GateDecision decision = GateDecision::TrainConditional;
  double t_gate = 0.5;
  int epoch = 0;
};

// x_t = (1-t)*x0 + t*x1. Throws InputError for t outside [0,1].
Vec2 interpolate(const Vec2& x0, const Vec2& x1, double t);

// Regression target x1 - x0.
Vec2 fm_target(const Vec2& x0, const Vec2& x1);

// Compares the conditional and unconditional losses at the shared
// interpolation point x_{t'} built from the given x0. Both forward passes
// are gradient-free. Flags TrainUnconditional only on strict
// l_cond > l_uncond; ties train conditionally. sample_index/epoch are left
// for the caller to fill.
GateRecord spfm_gate(const net::ModelParameters& p, const Vec2& x1,
                     const PolarCondition& c, const Vec2& x0, double t_gate,
                     net::Workspace* ws = nullptr);

// True with probability rate under the given stream.
bool cfg_dropout(Rng& rng, double rate);

struct StepMetrics {
  double mean_loss = 0.0;
  int n_conditional = 0;
  int n_gated_unconditional = 0;
  int n_dropped = 0;
};

struct StepResult {
  StepMetrics metrics;
  std::vector<GateRecord> gate_records;
};

// One optimizer step over the given dataset rows.
//
// Each sample draws from its own stream keyed by
// {train_seed, kTrainSample, epoch0, dataset index}, so decisions do not
// depend on batch order. Draw order per sample: gate noise x0 (2 normals,
// only when the gate is active), dropout uniform (only for samples not
// flagged unconditional), then training t (uniform) and training noise
// (2 normals) unless ReuseGateT reuses the gate draw.
//
// `precomputed` (same length/order as indices) replaces the gate's
// decisions without running its forward passes; the RNG draws are kept
// identical. Used to verify the gate contributes nothing but decisions.
StepResult train_step(net::ModelParameters& params, net::OptimizerState& opt,
                      const data::Dataset& ds, std::span<const int> indices,
                      const TrainingConfig& cfg, int epoch0,
                      const std::vector<GateDecision>* precomputed = nullptr);

// Per-epoch aggregates. epoch is 1-based. wall_ms is measured wall time and
// is the one non-deterministic field; file emitters zero it by default.
struct EpochMetrics {
  int epoch = 0;
  double mean_loss = 0.0;
  double gated_fraction = 0.0;
  double dropped_fraction = 0.0;
  double wall_ms = 0.0;
};

struct RunResult {
  net::ModelParameters params;
  net::OptimizerState opt;
  std::vector<EpochMetrics> metrics;
  std::vector<GateRecord> gate_records;
};

// Thrown by train_run on numeric failure; carries the state reached after
// the last completed optimizer step so callers can preserve a partial
// checkpoint.
struct TrainAbortError : NumericError {
  RunResult partial;
  TrainAbortError(const std::string& msg, RunResult p)
      : NumericError(msg), partial(std::move(p)) {}
};

// Full training run: init from train_seed, shuffle per epoch, iterate
// train_step over consecutive batches (last batch may be short).
// Deterministic given (dataset, config). Numeric failures abort with the
// offending epoch/batch in the message.
RunResult train_run(const data::Dataset& ds, const TrainingConfig& cfg);

// The final-epoch slice of a gate-record sequence (records are emitted in
// epoch order).
std::vector<GateRecord> final_epoch_records(std::span<const GateRecord> records);

}  // namespace spfm::flow
