// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "spfm/flow.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace spfm::flow {

std::string to_string(GateReuseMode m) {
  return m == GateReuseMode::SeparateT ? "separate_t" : "reuse_gate_t";
}

std::string to_string(GateDecision d) {
  return d == GateDecision::TrainConditional ? "conditional" : "unconditional";
}

GateReuseMode gate_reuse_from_string(const std::string& s) {
  if (s == "separate_t") return GateReuseMode::SeparateT;
  if (s == "reuse_gate_t") return GateReuseMode::ReuseGateT;
  throw InputError("unknown gate reuse mode: '" + s + "'");
}

std::vector<int> TrainingConfig::widths() const {
  std::vector<int> w;
  w.push_back(net::kInputWidth);
  w.insert(w.end(), hidden_widths.begin(), hidden_widths.end());
  w.push_back(net::kOutputDim);
  return w;
}

void TrainingConfig::validate() const {
  if (epochs < 0) throw InputError("training: epochs must be >= 0");
  if (warmup_epochs < 0 || warmup_epochs > epochs)
    throw InputError("training: need 0 <= warmup_epochs <= epochs");
  if (batch_size < 1) throw InputError("training: batch_size must be >= 1");
  if (!(cfg_dropout_rate >= 0.0 && cfg_dropout_rate <= 1.0))
    throw InputError("training: cfg_dropout_rate must be in [0,1]");
  if (!(gate_time > 0.0 && gate_time < 1.0))
    throw InputError("training: gate_time must be in (0,1)");
  for (int w : hidden_widths)
    if (w <= 0) throw InputError("training: hidden widths must be positive");
  if (!(optimizer.lr > 0.0)) throw InputError("training: lr must be > 0");
}

Vec2 interpolate(const Vec2& x0, const Vec2& x1, double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw InputError("interpolate: t must be in [0,1]");
  return (1.0 - t) * x0 + t * x1;
}

Vec2 fm_target(const Vec2& x0, const Vec2& x1) { return x1 - x0; }

GateRecord spfm_gate(const net::ModelParameters& p, const Vec2& x1,
                     const PolarCondition& c, const Vec2& x0, double t_gate,
                     net::Workspace* ws) {
  net::Workspace local;
  net::Workspace& w = ws ? *ws : local;

  const Vec2 x_t = interpolate(x0, x1, t_gate);
  const Vec2 target = fm_target(x0, x1);

  net::NetInput in;
  in.x_t = x_t;
  in.t = t_gate;
  in.condition = net::embed_condition(c);
  net::assemble_input(p, in, w.input);
  const Vec2 v_cond = net::forward_assembled(p, w.input, w);
  w.input.tail(p.null_embedding.size()) = p.null_embedding;
  const Vec2 v_uncond = net::forward_assembled(p, w.input, w);

  GateRecord r;
  r.t_gate = t_gate;
  r.l_cond = (v_cond - target).squaredNorm();
  r.l_uncond = (v_uncond - target).squaredNorm();
  if (!std::isfinite(r.l_cond) || !std::isfinite(r.l_uncond)) {
    std::ostringstream os;
    os << "spfm_gate: non-finite loss (l_cond=" << r.l_cond
       << ", l_uncond=" << r.l_uncond << ") at x1=(" << x1.x() << "," << x1.y()
       << ")";
    throw NumericError(os.str());
  }
  r.decision = r.l_cond > r.l_uncond ? GateDecision::TrainUnconditional
                                     : GateDecision::TrainConditional;
  return r;
}

bool cfg_dropout(Rng& rng, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0))
    throw InputError("cfg_dropout: rate must be in [0,1]");
  return rng.uniform() < rate;
}

StepResult train_step(net::ModelParameters& params, net::OptimizerState& opt,
                      const data::Dataset& ds, std::span<const int> indices,
                      const TrainingConfig& cfg, int epoch0,
                      const std::vector<GateDecision>* precomputed) {
  if (indices.empty()) throw InputError("train_step: empty batch");
  if (precomputed && precomputed->size() != indices.size())
    throw InputError("train_step: precomputed decision count mismatch");

  const bool gate_on = cfg.spfm_enabled && epoch0 >= cfg.warmup_epochs;
  StepResult out;
  std::vector<net::BatchItem> batch;
  batch.reserve(indices.size());
  net::Workspace ws;

  for (std::size_t k = 0; k < indices.size(); ++k) {
    const int idx = indices[k];
    const data::Sample& s = ds.samples.at(static_cast<std::size_t>(idx));
    Rng rs = Rng::derive({cfg.train_seed, stream::kTrainSample,
                          static_cast<std::uint64_t>(epoch0),
                          static_cast<std::uint64_t>(idx)});

    GateDecision decision = GateDecision::TrainConditional;
    Vec2 gate_x0 = Vec2::Zero();
    if (gate_on) {
      gate_x0 = rs.normal2();
      if (precomputed) {
        decision = (*precomputed)[k];
      } else {
        GateRecord r = spfm_gate(params, s.x1, s.condition, gate_x0,
                                 cfg.gate_time, &ws);
        r.sample_index = idx;
        r.epoch = epoch0 + 1;
        decision = r.decision;
        out.gate_records.push_back(r);
      }
    }

    bool dropped = false;
    if (decision == GateDecision::TrainConditional)
      dropped = cfg_dropout(rs, cfg.cfg_dropout_rate);

    net::BatchItem item;
    Vec2 x0;
    if (gate_on && cfg.gate_reuse == GateReuseMode::ReuseGateT) {
      item.input.t = cfg.gate_time;
      x0 = gate_x0;
    } else {
      item.input.t = rs.uniform();
      x0 = rs.normal2();
    }
    item.input.x_t = interpolate(x0, s.x1, item.input.t);
    item.target = fm_target(x0, s.x1);

    if (decision == GateDecision::TrainUnconditional) {
      out.metrics.n_gated_unconditional += 1;
    } else if (dropped) {
      out.metrics.n_dropped += 1;
    } else {
      item.input.condition = net::embed_condition(s.condition);
      out.metrics.n_conditional += 1;
    }
    batch.push_back(std::move(item));
  }

  const net::LossAndGrad lg = net::loss_and_grad(params, batch);
  out.metrics.mean_loss = lg.loss;
  net::optimizer_step(params, lg.grad, opt, cfg.optimizer);
  return out;
}

RunResult train_run(const data::Dataset& ds, const TrainingConfig& cfg) {
  cfg.validate();
  if (ds.samples.empty()) throw InputError("train_run: empty dataset");

  RunResult out;
  const auto widths = cfg.widths();
  out.params = net::init_params(cfg.train_seed, widths);
  out.opt = net::OptimizerState::zeros_like(out.params);

  const int n = ds.size();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int e = 0; e < cfg.epochs; ++e) {
    const auto t_start = std::chrono::steady_clock::now();
    Rng shuffle_rng = Rng::derive({cfg.train_seed, stream::kEpochShuffle,
                                   static_cast<std::uint64_t>(e)});
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    long gated = 0;
    long dropped = 0;
    int batch_no = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int len = std::min(cfg.batch_size, n - start);
      ++batch_no;
      StepResult sr;
      try {
        sr = train_step(out.params, out.opt, ds,
                        std::span<const int>(order.data() + start,
                                             static_cast<std::size_t>(len)),
                        cfg, e);
      } catch (const NumericError& err) {
        throw TrainAbortError("epoch " + std::to_string(e + 1) + " batch " +
                                  std::to_string(batch_no) + ": " + err.what(),
                              std::move(out));
      }
      loss_sum += sr.metrics.mean_loss * len;
      gated += sr.metrics.n_gated_unconditional;
      dropped += sr.metrics.n_dropped;
      out.gate_records.insert(out.gate_records.end(), sr.gate_records.begin(),
                              sr.gate_records.end());
    }
    const auto t_end = std::chrono::steady_clock::now();
    EpochMetrics m;
    m.epoch = e + 1;
    m.mean_loss = loss_sum / n;
    m.gated_fraction = static_cast<double>(gated) / n;
    m.dropped_fraction = static_cast<double>(dropped) / n;
    m.wall_ms =
        std::chrono::duration<double, std::milli>(t_end - t_start).count();
    out.metrics.push_back(m);
  }
  return out;
}

std::vector<GateRecord> final_epoch_records(std::span<const GateRecord> records) {
  std::vector<GateRecord> out;
  if (records.empty()) return out;
  const int last = records.back().epoch;
  for (const GateRecord& r : records)
    if (r.epoch == last) out.push_back(r);
  return out;
}

}  // namespace spfm::flow
