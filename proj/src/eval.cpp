// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "spfm/eval.hpp"

#include <algorithm>
#include <cmath>

#include "spfm/rng.hpp"

namespace spfm::eval {

std::string to_string(LabelState s) {
  return s == LabelState::Correct ? "correct" : "incorrect";
}

LabelState label_state_from_string(const std::string& s) {
  if (s == "correct") return LabelState::Correct;
  if (s == "incorrect") return LabelState::Incorrect;
  throw InputError("unknown label state: '" + s + "'");
}

double conditional_mse(std::span<const Vec2> generated,
                       std::span<const PolarCondition> conditions) {
  if (generated.size() != conditions.size())
    throw InputError("conditional_mse: length mismatch");
  if (generated.empty()) throw InputError("conditional_mse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < generated.size(); ++i)
    acc += (generated[i] - data::polar_to_euclidean(conditions[i])).squaredNorm();
  return acc / static_cast<double>(generated.size());
}

std::vector<LossDiffRecord> loss_diff_sweep(const net::ModelParameters& p,
                                            std::span<const LabeledSample> samples,
                                            std::span<const double> t_list,
                                            std::uint64_t noise_seed,
                                            int n_noise_draws) {
  if (samples.empty()) throw InputError("loss_diff_sweep: empty samples");
  if (t_list.empty()) throw InputError("loss_diff_sweep: empty t list");
  if (n_noise_draws < 1) throw InputError("loss_diff_sweep: need >= 1 noise draw");
  for (double t : t_list)
    if (!(t > 0.0 && t < 1.0))
      throw InputError("loss_diff_sweep: t' must be in (0,1)");

  std::vector<LossDiffRecord> out;
  out.reserve(samples.size() * t_list.size());
  net::Workspace ws;
  std::vector<Vec2> draws(static_cast<std::size_t>(n_noise_draws));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const LabeledSample& s = samples[i];
    Rng rng = Rng::derive({noise_seed, stream::kEvalNoise,
                           static_cast<std::uint64_t>(i)});
    for (Vec2& d : draws) d = rng.normal2();
    for (double t : t_list) {
      double acc = 0.0;
      for (const Vec2& x0 : draws) {
        flow::GateRecord r;
        try {
          r = flow::spfm_gate(p, s.x1, s.condition, x0, t, &ws);
        } catch (const NumericError& err) {
          throw NumericError("loss_diff_sweep: sample " + std::to_string(i) +
                             " t'=" + std::to_string(t) + ": " + err.what());
        }
        acc += r.l_cond - r.l_uncond;
      }
      LossDiffRecord rec;
      rec.sample_index = static_cast<int>(i);
      rec.t_prime = t;
      rec.loss_diff = acc / static_cast<double>(n_noise_draws);
      rec.label = s.label;
      out.push_back(rec);
    }
  }
  return out;
}

std::vector<DetectionScore> detection_scores(std::span<const LossDiffRecord> records,
                                             double threshold) {
  if (records.empty()) throw InputError("detection_scores: empty records");
  std::vector<double> t_order;
  for (const LossDiffRecord& r : records)
    if (std::find(t_order.begin(), t_order.end(), r.t_prime) == t_order.end())
      t_order.push_back(r.t_prime);

  std::vector<DetectionScore> out;
  for (double t : t_order) {
    long tp = 0, fp = 0, fn = 0;
    for (const LossDiffRecord& r : records) {
      if (r.t_prime != t) continue;
      const bool pred_incorrect = r.loss_diff > threshold;
      const bool is_incorrect = r.label == LabelState::Incorrect;
      if (pred_incorrect && is_incorrect) ++tp;
      if (pred_incorrect && !is_incorrect) ++fp;
      if (!pred_incorrect && is_incorrect) ++fn;
    }
    DetectionScore s;
    s.t_prime = t;
    s.threshold = threshold;
    s.degenerate = (tp + fp == 0) || (tp + fn == 0);
    s.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    s.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    s.f1 = s.precision > 0.0 && s.recall > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    out.push_back(s);
  }
  return out;
}

PurificationReport purification_report(const data::Dataset& ds,
                                       std::span<const flow::GateRecord> records) {
  const int n = ds.size();
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  PurificationReport rep;
  long retained_corrupt = 0, filtered_corrupt = 0;
  for (const flow::GateRecord& r : records) {
    if (r.sample_index < 0 || r.sample_index >= n)
      throw InputError("purification_report: record index out of range");
    char& flag = seen[static_cast<std::size_t>(r.sample_index)];
    if (flag) throw InputError("purification_report: duplicate record for sample " +
                               std::to_string(r.sample_index));
    flag = 1;
    const bool corrupted =
        ds.samples[static_cast<std::size_t>(r.sample_index)].corrupted;
    if (r.decision == flow::GateDecision::TrainUnconditional) {
      rep.filtered_count += 1;
      filtered_corrupt += corrupted ? 1 : 0;
    } else {
      rep.retained_count += 1;
      retained_corrupt += corrupted ? 1 : 0;
    }
  }
  for (int i = 0; i < n; ++i)
    if (!seen[static_cast<std::size_t>(i)])
      throw InputError("purification_report: missing gate record for sample " +
                       std::to_string(i));
  rep.retained_corruption_rate =
      rep.retained_count > 0
          ? static_cast<double>(retained_corrupt) / rep.retained_count
          : 0.0;
  rep.filtered_corruption_rate =
      rep.filtered_count > 0
          ? static_cast<double>(filtered_corrupt) / rep.filtered_count
          : 0.0;
  return rep;
}

Histogram export_histogram(std::span<const LossDiffRecord> records, double t_prime,
                           int bins) {
  if (bins < 1) throw InputError("export_histogram: bins must be >= 1");
  std::vector<const LossDiffRecord*> sel;
  for (const LossDiffRecord& r : records)
    if (r.t_prime == t_prime) sel.push_back(&r);
  if (sel.empty()) throw InputError("export_histogram: no records at given t'");

  double lo = sel.front()->loss_diff, hi = lo;
  for (const auto* r : sel) {
    lo = std::min(lo, r->loss_diff);
    hi = std::max(hi, r->loss_diff);
  }
  if (hi == lo) hi = lo + 1.0;

  Histogram h;
  h.t_prime = t_prime;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int k = 0; k <= bins; ++k)
    h.edges[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / bins;
  h.counts_correct.assign(static_cast<std::size_t>(bins), 0);
  h.counts_incorrect.assign(static_cast<std::size_t>(bins), 0);
  for (const auto* r : sel) {
    int idx = static_cast<int>((r->loss_diff - lo) / (hi - lo) * bins);
    idx = std::clamp(idx, 0, bins - 1);
    if (r->label == LabelState::Correct)
      h.counts_correct[static_cast<std::size_t>(idx)] += 1;
    else
      h.counts_incorrect[static_cast<std::size_t>(idx)] += 1;
  }
  return h;
}

}  // namespace spfm::eval
