// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spfm/config.hpp"
#include "spfm/data.hpp"
#include "spfm/eval.hpp"
#include "spfm/flow.hpp"
#include "spfm/types.hpp"

namespace spfm::cli {

// Entry point for the `spfm` binary (args exclude argv[0]).
// Exit codes: 0 success, 1 input/config error, 2 numeric failure.
int run(const std::vector<std::string>& args);

enum class GateCsvMode { Full, Final, Off };

// Stage implementations shared by the subcommands and `reproduce`.

struct GenDataResult {
  std::filesystem::path dataset_path;
  data::Dataset dataset;
};
GenDataResult do_gen_data(const ExperimentConfig& cfg,
                          const std::filesystem::path& out_dir);

struct TrainResult {
  std::filesystem::path checkpoint_path;
  std::filesystem::path metrics_path;
  std::filesystem::path gate_csv_path;  // empty when not written
  flow::RunResult run;
};
TrainResult do_train(const ExperimentConfig& cfg, const data::Dataset& ds,
                     const std::filesystem::path& out_dir,
                     GateCsvMode gate_mode = GateCsvMode::Full,
                     bool timings = false);

struct EvalResult {
  std::filesystem::path mse_csv_path;
  std::filesystem::path svg_path;
  std::vector<std::filesystem::path> sample_csv_paths;
  std::vector<double> omegas;
  std::vector<double> mses;
};
EvalResult do_eval(const ExperimentConfig& cfg,
                   const std::filesystem::path& checkpoint_path,
                   const std::filesystem::path& dataset_path,
                   std::vector<double> omegas, int n_steps, std::uint64_t seed,
                   int n_eval, const std::filesystem::path& out_dir);

struct AnalyzeResult {
  std::filesystem::path records_csv_path;
  std::filesystem::path scores_csv_path;
  std::vector<std::filesystem::path> histogram_paths;
  std::vector<eval::DetectionScore> scores;
};
AnalyzeResult do_analyze(const ExperimentConfig& cfg,
                         const std::filesystem::path& checkpoint_path,
                         const std::filesystem::path& dataset_path,
                         const std::vector<double>& t_list, double threshold,
                         std::uint64_t seed, int n_eval,
                         const std::filesystem::path& out_dir);

struct ReproduceResult {
  std::filesystem::path manifest_path;
  std::vector<std::filesystem::path> files;
};
ReproduceResult do_reproduce(const std::string& figure, const std::string& preset,
                             const std::filesystem::path& out_dir);

// Pinned configuration text for the reproduction runs. Names:
// fig2_two_circles, fig2_spiral, fig3_two_circles, each with a "_smoke"
// variant. Identical copies ship under configs/.
const std::string& pinned_config(const std::string& name);

// Filename-safe tag for a scalar flag value: 0.25 -> "0p25".
std::string value_tag(double v);

}  // namespace spfm::cli
