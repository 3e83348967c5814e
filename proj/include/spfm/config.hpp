// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spfm/data.hpp"
#include "spfm/flow.hpp"
#include "spfm/types.hpp"

namespace spfm::cli {

struct SamplerBlock {
  std::vector<double> omega_list = {0.0, 0.25, 0.5, 0.75, 1.0};
  int n_steps = 100;
  std::uint64_t seed = 500;
  int eval_points = 2000;

  void validate() const;
};

// Whole-experiment configuration. File format: line-oriented key = value
// under [dataset] / [training] / [sampler] / [output] section headers;
// '#' starts a comment. canonical_serialize emits every key in a fixed
// order, which defines the hashed canonical form.
struct ExperimentConfig {
  data::DatasetSpec dataset;
  flow::TrainingConfig training;
  SamplerBlock sampler;
  std::string out_dir = "out";
  std::string run_label = "run";

  void validate() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);
std::string canonical_serialize(const ExperimentConfig& cfg);

// FNV-1a 64 over the canonical serialization.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t config_hash(const ExperimentConfig& cfg);

std::string hash_hex(std::uint64_t h);

}  // namespace spfm::cli
