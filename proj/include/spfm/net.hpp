// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "spfm/types.hpp"

namespace spfm::net {

// Network input layout: [ x_t (2) | time embedding (17) | condition (3) ].
inline constexpr int kDataDim = 2;
inline constexpr int kTimeEmbedPairs = 8;
inline constexpr int kTimeEmbedWidth = 1 + 2 * kTimeEmbedPairs;  // 17
inline constexpr int kCondEmbedWidth = 3;
inline constexpr int kInputWidth = kDataDim + kTimeEmbedWidth + kCondEmbedWidth;
inline constexpr int kOutputDim = 2;

// Velocity-field MLP: SiLU hidden layers, linear output, plus the learned
// null-condition embedding used for unconditional training and sampling.
// weights[l] has shape widths[l+1] x widths[l].
struct ModelParameters {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Vector null_embedding;

  int n_layers() const { return static_cast<int>(weights.size()); }
  int input_width() const;
  std::vector<int> widths() const;
  bool all_finite() const;
};

// Gradients mirror the parameter layout exactly.
using Gradients = ModelParameters;

// condition == nullopt selects the learned null embedding; gradients then
// flow into params.null_embedding.
struct NetInput {
  Vec2 x_t = Vec2::Zero();
  double t = 0.0;
  std::optional<Vector> condition;
};

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  std::vector<Matrix> m_w, v_w;
  std::vector<Vector> m_b, v_b;
  Vector m_null, v_null;
  std::uint64_t step = 0;

  static OptimizerState zeros_like(const ModelParameters& p);
  bool all_finite() const;
};

// (cos angle, sin angle, radius); angular periodicity is free.
Vector embed_condition(const PolarCondition& c);

// [t, sin(f_k t), cos(f_k t)]_{k=0..7} with f_k = 2*pi*2^k. Width 17.
Vector embed_time(double t);

// Weights ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)) drawn in column-major
// storage order, layer by layer; biases zero; null_embedding drawn last
// with fan_in = kCondEmbedWidth. widths must start at kInputWidth and end
// at kOutputDim.
ModelParameters init_params(std::uint64_t seed, std::span<const int> widths);

// Scratch buffers for repeated single-input forwards (gate loops, sampling).
struct Workspace {
  std::vector<Vector> act;
  Vector input;
};

// Single-input forward pass. The assembled variant takes a prebuilt input
// column (see assemble_input) so callers can swap the condition slot
// in place between two evaluations.
void assemble_input(const ModelParameters& p, const NetInput& in, Vector& out);
Vec2 forward_assembled(const ModelParameters& p, const Vector& u, Workspace& ws);
Vec2 forward(const ModelParameters& p, const NetInput& in);

struct BatchItem {
  NetInput input;
  Vec2 target = Vec2::Zero();
};

struct LossAndGrad {
  double loss = 0.0;
  Gradients grad;
};

// Mean over the batch of || v(input) - target ||^2 and its exact
// reverse-mode gradient (batched over columns internally). Gradients flow
// into null_embedding for items whose condition slot is the null embedding.
LossAndGrad loss_and_grad(const ModelParameters& p, std::span<const BatchItem> batch);

// Standard Adam with bias correction, in place; state.step increments by 1.
// Throws NumericError if any gradient entry is non-finite.
void optimizer_step(ModelParameters& p, const Gradients& g, OptimizerState& st,
                    const AdamHyper& h);

// Versioned little-endian binary container; round-trips bit-exactly.
struct Checkpoint {
  ModelParameters params;
  OptimizerState opt;
  std::uint64_t config_hash = 0;
};

inline constexpr std::uint8_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Raw parameter bytes (weights, biases, null embedding) in storage order;
// used for bitwise equality checks.
std::vector<std::uint8_t> serialize_params(const ModelParameters& p);

}  // namespace spfm::net
