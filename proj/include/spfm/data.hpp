// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spfm/rng.hpp"
#include "spfm/types.hpp"

namespace spfm::data {

enum class DatasetKind { TwoCircles, Spiral };

enum class CorruptionMode { SwapExisting, DrawUniform };

std::string to_string(DatasetKind k);
std::string to_string(CorruptionMode m);
DatasetKind dataset_kind_from_string(const std::string& s);
CorruptionMode corruption_mode_from_string(const std::string& s);

// One 2D training point. `condition` is the polar label the trainer sees;
// `original_condition` is the label the generator assigned. They differ
// exactly when `corrupted` is true.
struct Sample {
  Vec2 x1 = Vec2::Zero();
  PolarCondition condition;
  bool corrupted = false;
  PolarCondition original_condition;
};

// Generation constants. The spiral fields are ignored for two-circles and
// vice versa; defaults are the pinned values used by the shipped configs.
struct DatasetSpec {
  DatasetKind kind = DatasetKind::TwoCircles;
  int n = 10000;
  std::uint64_t seed = 1;
  double r_inner = 1.0;
  double r_outer = 2.0;
  double r_min = 0.5;
  double r_max = 2.5;
  double turns = 2.0;
  double sigma_jitter = 0.03;
  double corruption_rate = 0.0;
  CorruptionMode corruption_mode = CorruptionMode::SwapExisting;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<Sample> samples;

  int size() const { return static_cast<int>(samples.size()); }
  int corrupted_count() const;
};

// (r cos theta, r sin theta). Throws InputError on negative radius.
Vec2 polar_to_euclidean(const PolarCondition& c);

// Per-sample draws, in order: ring pick (uniform), angle (uniform),
// jitter x, jitter y (normals). Conditions are the pre-jitter polar pair,
// so polar_to_euclidean(condition) recovers the sample up to the jitter.
Dataset gen_two_circles(int n, std::uint64_t seed, const DatasetSpec& constants = {});

// Arc parameter u ~ U[0,1); r = r_min + (r_max-r_min)*u;
// theta = (turns*2*pi*u) mod 2*pi. Draws per sample: u, jitter x, jitter y.
Dataset gen_spiral(int n, std::uint64_t seed, const DatasetSpec& constants = {});

// Dispatch on spec.kind, then apply spec.corruption_rate.
Dataset generate(const DatasetSpec& spec);

// Replaces the condition of exactly lround(rate*n) samples, chosen by a
// seeded shuffle, processed in ascending index order. SwapExisting assigns
// the original condition of a uniformly chosen *other* sample (donor pool
// is the input dataset, not the partially rewritten one). DrawUniform
// draws angle ~ U[0,2pi) and radius ~ U[min observed, max observed].
// x1 and original_condition are never touched.
Dataset corrupt_labels(const Dataset& ds, double rate, std::uint64_t seed,
                       CorruptionMode mode = CorruptionMode::SwapExisting);

// A fresh condition from the generator's label distribution (pre-jitter law).
PolarCondition draw_condition(const DatasetSpec& spec, Rng& rng);

// Text format: one header line of key=value pairs, then one line per sample
// with fields x1_x x1_y angle radius corrupted orig_angle orig_radius.
// Doubles are printed with 17 significant digits, so save/load round-trips
// bit-exactly.
void save_text(const std::filesystem::path& path, const Dataset& ds);
Dataset load_text(const std::filesystem::path& path);

// Compact little-endian binary alternative: magic "SPFMDAT1", header
// fields, then raw IEEE-754 records.
void save_binary(const std::filesystem::path& path, const Dataset& ds);
Dataset load_binary(const std::filesystem::path& path);

// CSV import with header
// x1_x,x1_y,angle,radius,corrupted,orig_angle,orig_radius.
Dataset import_csv(const std::filesystem::path& path);

}  // namespace spfm::data
