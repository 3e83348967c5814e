// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "spfm/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fcntl.h>
#include <unistd.h>

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "spfm/csv.hpp"
#include "spfm/net.hpp"
#include "spfm/sampler.hpp"
#include "spfm/svg.hpp"

namespace fs = std::filesystem;

namespace spfm::cli {

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw InputError("cannot create output directory '" + dir.string() +
                     "': " + ec.message());
}

// Cross-invocation guard on an output directory.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".spfm.lock") {
    ensure_dir(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw InputError("output directory '" + dir.string() +
                       "' is locked by another run (remove " + path_.string() +
                       " if stale)");
  }
  ~DirLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      std::error_code ec;
      fs::remove(path_, ec);
    }
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw InputError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open: " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::uint64_t hash_file(const fs::path& path) {
  const std::string bytes = read_text(path);
  return fnv1a64(bytes.data(), bytes.size());
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::string cur;
  auto flush = [&]() {
    if (cur.empty()) throw InputError(what + ": empty list entry");
    try {
      std::size_t pos = 0;
      const double v = std::stod(cur, &pos);
      if (pos != cur.size()) throw InputError("x");
      out.push_back(v);
    } catch (const std::exception&) {
      throw InputError(what + ": bad value '" + cur + "'");
    }
    cur.clear();
  };
  for (char c : s) {
    if (c == ',') flush();
    else if (c != ' ') cur.push_back(c);
  }
  flush();
  return out;
}

void write_metrics_csv(const fs::path& path,
                       const std::vector<flow::EpochMetrics>& metrics,
                       bool timings) {
  io::Table t;
  t.header = {"epoch", "mean_loss", "gated_fraction", "dropped_fraction",
              "wall_ms"};
  for (const auto& m : metrics)
    t.rows.push_back({std::to_string(m.epoch), io::format_double(m.mean_loss),
                      io::format_double(m.gated_fraction),
                      io::format_double(m.dropped_fraction),
                      timings ? io::format_double(m.wall_ms) : "0"});
  io::write_csv(path, t);
}

void write_gate_csv(const fs::path& path,
                    const std::vector<flow::GateRecord>& records) {
  io::Table t;
  t.header = {"sample_index", "epoch", "l_cond", "l_uncond", "decision"};
  for (const auto& r : records)
    t.rows.push_back({std::to_string(r.sample_index), std::to_string(r.epoch),
                      io::format_double(r.l_cond), io::format_double(r.l_uncond),
                      flow::to_string(r.decision)});
  io::write_csv(path, t);
}

}  // namespace

std::string value_tag(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  std::string s = buf;
  for (char& c : s)
    if (c == '.') c = 'p';
    else if (c == '-') c = 'm';
  return s;
}

GenDataResult do_gen_data(const ExperimentConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  ensure_dir(out_dir);
  GenDataResult res;
  res.dataset = data::generate(cfg.dataset);
  res.dataset_path = out_dir / "dataset.txt";
  data::save_text(res.dataset_path, res.dataset);
  std::cout << "gen-data: kind=" << data::to_string(cfg.dataset.kind)
            << " n=" << res.dataset.size()
            << " corrupted=" << res.dataset.corrupted_count()
            << " path=" << res.dataset_path.string() << "\n";
  return res;
}

TrainResult do_train(const ExperimentConfig& cfg, const data::Dataset& ds,
                     const fs::path& out_dir, GateCsvMode gate_mode,
                     bool timings) {
  cfg.validate();
  ensure_dir(out_dir);
  TrainResult res;
  res.checkpoint_path = out_dir / "checkpoint.bin";
  res.metrics_path = out_dir / "metrics.csv";

  try {
    res.run = flow::train_run(ds, cfg.training);
  } catch (flow::TrainAbortError& abort) {
    // Keep what the run produced so far, marked as failed.
    net::Checkpoint ck{std::move(abort.partial.params), std::move(abort.partial.opt),
                       config_hash(cfg)};
    net::save_checkpoint(res.checkpoint_path, ck);
    write_text(res.checkpoint_path.string() + ".failed",
               std::string(abort.what()) + "\n");
    write_metrics_csv(res.metrics_path, abort.partial.metrics, timings);
    throw NumericError("train aborted at " + std::string(abort.what()) +
                       " (partial checkpoint kept at " +
                       res.checkpoint_path.string() + ")");
  }

  net::Checkpoint ck{res.run.params, res.run.opt, config_hash(cfg)};
  net::save_checkpoint(res.checkpoint_path, ck);
  write_metrics_csv(res.metrics_path, res.run.metrics, timings);

  if (cfg.training.spfm_enabled && gate_mode != GateCsvMode::Off) {
    res.gate_csv_path = out_dir / "gate_records.csv";
    if (gate_mode == GateCsvMode::Full) {
      write_gate_csv(res.gate_csv_path, res.run.gate_records);
    } else {
      write_gate_csv(res.gate_csv_path,
                     flow::final_epoch_records(res.run.gate_records));
    }
  }

  const flow::EpochMetrics last =
      res.run.metrics.empty() ? flow::EpochMetrics{} : res.run.metrics.back();
  std::cout << "train: label=" << cfg.run_label
            << " spfm=" << (cfg.training.spfm_enabled ? "on" : "off")
            << " epochs=" << cfg.training.epochs
            << " final_loss=" << io::format_double(last.mean_loss)
            << " gated_fraction=" << io::format_double(last.gated_fraction)
            << " checkpoint=" << res.checkpoint_path.string() << "\n";
  return res;
}

EvalResult do_eval(const ExperimentConfig& cfg, const fs::path& checkpoint_path,
                   const fs::path& dataset_path, std::vector<double> omegas,
                   int n_steps, std::uint64_t seed, int n_eval,
                   const fs::path& out_dir) {
  cfg.validate();
  if (omegas.empty()) throw InputError("eval: omega list must be non-empty");
  for (double w : omegas)
    if (!(w >= 0.0)) throw InputError("eval: omega must be >= 0");
  if (n_eval < 1) throw InputError("eval: n_eval must be >= 1");
  ensure_dir(out_dir);

  std::vector<std::string> warnings;

  // Deduplicate while preserving first-appearance order.
  std::vector<double> uniq;
  for (double w : omegas)
    if (std::find(uniq.begin(), uniq.end(), w) == uniq.end()) uniq.push_back(w);
  if (uniq.size() != omegas.size())
    warnings.push_back("duplicate omega entries were deduplicated");
  omegas = std::move(uniq);

  const net::Checkpoint ck = net::load_checkpoint(checkpoint_path);
  if (ck.config_hash != config_hash(cfg))
    warnings.push_back("checkpoint config hash " + hash_hex(ck.config_hash) +
                       " does not match current config " +
                       hash_hex(config_hash(cfg)));
  const data::Dataset ds = data::load_text(dataset_path);

  // Fresh conditions from the generator's label distribution.
  Rng cond_rng = Rng::derive({seed, stream::kEvalConditions});
  std::vector<PolarCondition> conditions;
  conditions.reserve(static_cast<std::size_t>(n_eval));
  for (int i = 0; i < n_eval; ++i)
    conditions.push_back(data::draw_condition(ds.spec, cond_rng));

  EvalResult res;
  io::Table mse_table;
  mse_table.header = {"omega", "n_conditions", "n_steps", "mse"};
  for (double omega : omegas) {
    sampler::SamplerConfig scfg{omega, n_steps, seed};
    const std::vector<Vec2> generated =
        sampler::sample_batch(ck.params, conditions, scfg);
    const double mse = eval::conditional_mse(generated, conditions);

    io::Table st;
    st.header = {"condition_angle", "condition_radius", "gen_x", "gen_y",
                 "target_x",        "target_y",         "sq_error"};
    for (std::size_t i = 0; i < conditions.size(); ++i) {
      const Vec2 target = data::polar_to_euclidean(conditions[i]);
      const double se = (generated[i] - target).squaredNorm();
      st.rows.push_back({io::format_double(conditions[i].angle),
                         io::format_double(conditions[i].radius),
                         io::format_double(generated[i].x()),
                         io::format_double(generated[i].y()),
                         io::format_double(target.x()),
                         io::format_double(target.y()), io::format_double(se)});
    }
    const fs::path sp = out_dir / ("samples_omega_" + value_tag(omega) + ".csv");
    io::write_csv(sp, st);
    res.sample_csv_paths.push_back(sp);

    mse_table.rows.push_back({io::format_double(omega), std::to_string(n_eval),
                              std::to_string(n_steps), io::format_double(mse)});
    res.omegas.push_back(omega);
    res.mses.push_back(mse);
    std::cout << "eval: omega=" << io::format_double(omega)
              << " mse=" << io::format_double(mse) << "\n";
  }
  res.mse_csv_path = out_dir / "mse_by_omega.csv";
  io::write_csv(res.mse_csv_path, mse_table);

  // Chart is derived from the CSV just written, not from live state.
  const io::Table back = io::read_csv(res.mse_csv_path);
  plot::Series series;
  series.name = cfg.run_label;
  const int c_omega = back.column("omega");
  const int c_mse = back.column("mse");
  for (std::size_t r = 0; r < back.rows.size(); ++r) {
    series.x.push_back(io::cell_double(back, r, c_omega));
    series.y.push_back(io::cell_double(back, r, c_mse));
  }
  res.svg_path = out_dir / "mse_vs_omega.svg";
  write_text(res.svg_path,
             plot::line_chart_svg("conditional MSE vs guidance scale", "omega",
                                  "mse", {series}));

  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  if (!warnings.empty()) {
    std::string wtext;
    for (const std::string& w : warnings) wtext += w + "\n";
    write_text(out_dir / "warnings.txt", wtext);
  }
  return res;
}

AnalyzeResult do_analyze(const ExperimentConfig& cfg,
                         const fs::path& checkpoint_path,
                         const fs::path& dataset_path,
                         const std::vector<double>& t_list, double threshold,
                         std::uint64_t seed, int n_eval,
                         const fs::path& out_dir) {
  cfg.validate();
  if (t_list.empty()) throw InputError("analyze: t' list must be non-empty");
  for (double t : t_list)
    if (!(t > 0.0 && t < 1.0))
      throw InputError("analyze: t' values must be in (0,1)");
  if (n_eval < 2) throw InputError("analyze: n_eval must be >= 2");
  ensure_dir(out_dir);

  const net::Checkpoint ck = net::load_checkpoint(checkpoint_path);
  if (ck.config_hash != config_hash(cfg))
    std::cerr << "warning: checkpoint config hash "
              << hash_hex(ck.config_hash) << " does not match current config "
              << hash_hex(config_hash(cfg)) << "\n";
  const data::Dataset ds = data::load_text(dataset_path);

  std::vector<const data::Sample*> clean;
  for (const data::Sample& s : ds.samples)
    if (!s.corrupted) clean.push_back(&s);
  if (static_cast<int>(clean.size()) < 2)
    throw InputError("analyze: need at least 2 clean samples");
  const int m = std::min<int>(n_eval, static_cast<int>(clean.size()));

  // Correct records pair each point with its true label; incorrect records
  // reuse the same points with labels permuted so no index keeps its own.
  std::vector<eval::LabeledSample> correct, incorrect;
  correct.reserve(static_cast<std::size_t>(m));
  incorrect.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    correct.push_back({clean[static_cast<std::size_t>(i)]->x1,
                       clean[static_cast<std::size_t>(i)]->condition,
                       eval::LabelState::Correct});
  std::vector<int> perm(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng mrng = Rng::derive({seed, stream::kMismatch});
  mrng.shuffle(perm);
  for (int i = 0; i < m; ++i)
    if (perm[static_cast<std::size_t>(i)] == i)
      std::swap(perm[static_cast<std::size_t>(i)],
                perm[static_cast<std::size_t>((i + 1) % m)]);
  for (int i = 0; i < m; ++i)
    incorrect.push_back(
        {clean[static_cast<std::size_t>(i)]->x1,
         clean[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]
             ->condition,
         eval::LabelState::Incorrect});

  // Same noise seed, so sample i shares its x0 across both label states.
  std::vector<eval::LossDiffRecord> records =
      eval::loss_diff_sweep(ck.params, correct, t_list, seed);
  const std::vector<eval::LossDiffRecord> inc_records =
      eval::loss_diff_sweep(ck.params, incorrect, t_list, seed);
  records.insert(records.end(), inc_records.begin(), inc_records.end());

  AnalyzeResult res;
  io::Table rt;
  rt.header = {"sample_index", "t_prime", "loss_diff", "label_state"};
  for (const auto& r : records)
    rt.rows.push_back({std::to_string(r.sample_index),
                       io::format_double(r.t_prime),
                       io::format_double(r.loss_diff), eval::to_string(r.label)});
  res.records_csv_path = out_dir / "loss_diff_records.csv";
  io::write_csv(res.records_csv_path, rt);

  res.scores = eval::detection_scores(records, threshold);
  io::Table st;
  st.header = {"t_prime", "precision", "recall", "f1", "threshold", "degenerate"};
  for (const auto& s : res.scores)
    st.rows.push_back({io::format_double(s.t_prime), io::format_double(s.precision),
                       io::format_double(s.recall), io::format_double(s.f1),
                       io::format_double(s.threshold), s.degenerate ? "1" : "0"});
  res.scores_csv_path = out_dir / "detection_scores.csv";
  io::write_csv(res.scores_csv_path, st);

  // Histograms are rebuilt from the records CSV.
  const io::Table back = io::read_csv(res.records_csv_path);
  const int c_idx = back.column("sample_index");
  const int c_t = back.column("t_prime");
  const int c_diff = back.column("loss_diff");
  const int c_label = back.column("label_state");
  std::vector<eval::LossDiffRecord> from_csv;
  from_csv.reserve(back.rows.size());
  for (std::size_t r = 0; r < back.rows.size(); ++r) {
    eval::LossDiffRecord rec;
    rec.sample_index = static_cast<int>(io::cell_double(back, r, c_idx));
    rec.t_prime = io::cell_double(back, r, c_t);
    rec.loss_diff = io::cell_double(back, r, c_diff);
    rec.label = eval::label_state_from_string(
        back.rows[r][static_cast<std::size_t>(c_label)]);
    from_csv.push_back(rec);
  }
  for (double t : t_list) {
    const eval::Histogram h = eval::export_histogram(from_csv, t, 60);
    const fs::path hp = out_dir / ("hist_tprime_" + value_tag(t) + ".svg");
    write_text(hp, plot::histogram_svg(
                       "loss difference at t'=" + value_tag(t), h));
    res.histogram_paths.push_back(hp);
  }

  for (const auto& s : res.scores)
    std::cout << "analyze: t'=" << io::format_double(s.t_prime)
              << " precision=" << io::format_double(s.precision)
              << " recall=" << io::format_double(s.recall)
              << " f1=" << io::format_double(s.f1)
              << (s.degenerate ? " (degenerate)" : "") << "\n";
  return res;
}

namespace {

const std::map<std::string, std::string>& pinned_configs();

ExperimentConfig pinned(const std::string& name) {
  return parse_config_text(pinned_config(name));
}

struct ManifestBuilder {
  io::Table table;
  fs::path root;

  explicit ManifestBuilder(fs::path r) : root(std::move(r)) {
    table.header = {"kind", "name", "value"};
  }
  void meta(const std::string& name, const std::string& value) {
    table.rows.push_back({"meta", name, value});
  }
  void seed(const std::string& name, std::uint64_t v) {
    table.rows.push_back({"seed", name, std::to_string(v)});
  }
  void config(const std::string& name, const ExperimentConfig& cfg) {
    table.rows.push_back({"config_hash", name, hash_hex(config_hash(cfg))});
  }
  void file(const fs::path& p) {
    table.rows.push_back({"file", fs::relative(p, root).generic_string(),
                          hash_hex(hash_file(p))});
  }
};

// Scatter panels for one dataset: data references in column 0, generated
// samples per omega to the right, baseline on top of the SPFM row.
std::string render_fig2_svg(const fs::path& ds_path,
                            const fs::path& eval_baseline_dir,
                            const fs::path& eval_spfm_dir, int max_points) {
  const data::Dataset ds = data::load_text(ds_path);
  const double rad2deg = 180.0 / M_PI;

  std::vector<plot::ScatterPanel> panels;
  const int n_data =
      std::min<int>(ds.size(), max_points);

  plot::ScatterPanel noisy;
  noisy.title = "training data";
  noisy.note = "labels: " + io::format_double(ds.spec.corruption_rate * 100.0) +
               "% corrupted";
  for (int i = 0; i < n_data; ++i) {
    noisy.points.push_back(ds.samples[static_cast<std::size_t>(i)].x1);
    noisy.hue_deg.push_back(
        ds.samples[static_cast<std::size_t>(i)].condition.angle * rad2deg);
  }

  plot::ScatterPanel clean;
  clean.title = "clean reference";
  clean.note = "true labels";
  for (int i = 0; i < n_data; ++i) {
    clean.points.push_back(ds.samples[static_cast<std::size_t>(i)].x1);
    clean.hue_deg.push_back(
        ds.samples[static_cast<std::size_t>(i)].original_condition.angle *
        rad2deg);
  }

  auto model_row = [&](const fs::path& eval_dir, const std::string& model_name,
                       std::vector<plot::ScatterPanel>& row) {
    const io::Table mse = io::read_csv(eval_dir / "mse_by_omega.csv");
    const int c_omega = mse.column("omega");
    const int c_mse = mse.column("mse");
    for (std::size_t r = 0; r < mse.rows.size(); ++r) {
      const double omega = io::cell_double(mse, r, c_omega);
      const io::Table st = io::read_csv(
          eval_dir / ("samples_omega_" + value_tag(omega) + ".csv"));
      const int c_gx = st.column("gen_x");
      const int c_gy = st.column("gen_y");
      const int c_a = st.column("condition_angle");
      plot::ScatterPanel p;
      p.title = model_name + "  omega=" + value_tag(omega);
      char mse_short[32];
      std::snprintf(mse_short, sizeof(mse_short), "%.4f",
                    io::cell_double(mse, r, c_mse));
      p.note = std::string("mse=") + mse_short;
      for (std::size_t i = 0; i < st.rows.size(); ++i) {
        p.points.push_back(Vec2(io::cell_double(st, i, c_gx),
                                io::cell_double(st, i, c_gy)));
        p.hue_deg.push_back(io::cell_double(st, i, c_a) * rad2deg);
      }
      row.push_back(std::move(p));
    }
  };

  std::vector<plot::ScatterPanel> base_row, spfm_row;
  model_row(eval_baseline_dir, "baseline", base_row);
  model_row(eval_spfm_dir, "spfm", spfm_row);

  panels.push_back(std::move(noisy));
  for (auto& p : base_row) panels.push_back(std::move(p));
  panels.push_back(std::move(clean));
  for (auto& p : spfm_row) panels.push_back(std::move(p));

  const int n_cols = 1 + static_cast<int>(base_row.size());
  return plot::scatter_grid_svg(
      "generated samples, " + data::to_string(ds.spec.kind), panels, n_cols,
      3.0);
}

void reproduce_fig2(const std::string& preset, const fs::path& out_dir,
                    ManifestBuilder& mf, std::vector<fs::path>& files) {
  const std::string suffix = preset == "smoke" ? "_smoke" : "";
  for (const std::string ds_name : {"two_circles", "spiral"}) {
    const ExperimentConfig cfg = pinned("fig2_" + ds_name + suffix);
    const fs::path ds_dir = out_dir / ds_name;

    std::string stage = ds_name + ".gen_data";
    try {
      const GenDataResult gen = do_gen_data(cfg, ds_dir);
      files.push_back(gen.dataset_path);

      ExperimentConfig base_cfg = cfg;
      base_cfg.training.spfm_enabled = false;
      base_cfg.run_label = cfg.run_label + "_baseline";
      ExperimentConfig spfm_cfg = cfg;
      spfm_cfg.training.spfm_enabled = true;
      spfm_cfg.run_label = cfg.run_label + "_spfm";

      mf.seed(ds_name + ".data", cfg.dataset.seed);
      mf.seed(ds_name + ".train", cfg.training.train_seed);
      mf.seed(ds_name + ".sampler", cfg.sampler.seed);
      mf.config(ds_name + ".baseline", base_cfg);
      mf.config(ds_name + ".spfm", spfm_cfg);

      stage = ds_name + ".train_baseline";
      const TrainResult base_tr = do_train(base_cfg, gen.dataset,
                                           ds_dir / "baseline", GateCsvMode::Off);
      files.push_back(base_tr.checkpoint_path);
      files.push_back(base_tr.metrics_path);

      stage = ds_name + ".train_spfm";
      const TrainResult spfm_tr = do_train(spfm_cfg, gen.dataset,
                                           ds_dir / "spfm", GateCsvMode::Final);
      files.push_back(spfm_tr.checkpoint_path);
      files.push_back(spfm_tr.metrics_path);
      if (!spfm_tr.gate_csv_path.empty()) files.push_back(spfm_tr.gate_csv_path);

      stage = ds_name + ".eval_baseline";
      const EvalResult base_ev = do_eval(
          base_cfg, base_tr.checkpoint_path, gen.dataset_path,
          cfg.sampler.omega_list, cfg.sampler.n_steps, cfg.sampler.seed,
          cfg.sampler.eval_points, ds_dir / "eval_baseline");
      files.push_back(base_ev.mse_csv_path);
      files.push_back(base_ev.svg_path);
      for (const auto& p : base_ev.sample_csv_paths) files.push_back(p);

      stage = ds_name + ".eval_spfm";
      const EvalResult spfm_ev = do_eval(
          spfm_cfg, spfm_tr.checkpoint_path, gen.dataset_path,
          cfg.sampler.omega_list, cfg.sampler.n_steps, cfg.sampler.seed,
          cfg.sampler.eval_points, ds_dir / "eval_spfm");
      files.push_back(spfm_ev.mse_csv_path);
      files.push_back(spfm_ev.svg_path);
      for (const auto& p : spfm_ev.sample_csv_paths) files.push_back(p);

      stage = ds_name + ".figure";
      const fs::path fig_path = out_dir / ("fig2_" + ds_name + ".svg");
      write_text(fig_path,
                 render_fig2_svg(gen.dataset_path, ds_dir / "eval_baseline",
                                 ds_dir / "eval_spfm", cfg.sampler.eval_points));
      files.push_back(fig_path);
    } catch (const InputError& e) {
      throw InputError("reproduce stage " + stage + ": " + e.what());
    } catch (const NumericError& e) {
      throw NumericError("reproduce stage " + stage + ": " + e.what());
    }
  }
}

void reproduce_fig3(const std::string& preset, const fs::path& out_dir,
                    ManifestBuilder& mf, std::vector<fs::path>& files) {
  const std::string suffix = preset == "smoke" ? "_smoke" : "";
  const ExperimentConfig cfg = pinned("fig3_two_circles" + suffix);
  const std::vector<double> t_list = {0.1, 0.3, 0.5, 0.7, 0.9};

  std::string stage = "gen_data";
  try {
    const GenDataResult gen = do_gen_data(cfg, out_dir);
    files.push_back(gen.dataset_path);
    mf.seed("data", cfg.dataset.seed);
    mf.seed("train", cfg.training.train_seed);
    mf.seed("analysis", cfg.sampler.seed);
    mf.config("model", cfg);

    stage = "train";
    const TrainResult tr =
        do_train(cfg, gen.dataset, out_dir / "model", GateCsvMode::Final);
    files.push_back(tr.checkpoint_path);
    files.push_back(tr.metrics_path);
    if (!tr.gate_csv_path.empty()) files.push_back(tr.gate_csv_path);

    stage = "analyze";
    const AnalyzeResult an = do_analyze(
        cfg, tr.checkpoint_path, gen.dataset_path, t_list, 0.0,
        cfg.sampler.seed, cfg.sampler.eval_points, out_dir / "analysis");
    files.push_back(an.records_csv_path);
    files.push_back(an.scores_csv_path);
    for (const auto& p : an.histogram_paths) files.push_back(p);
  } catch (const InputError& e) {
    throw InputError("reproduce stage " + stage + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("reproduce stage " + stage + ": " + e.what());
  }
}

}  // namespace

ReproduceResult do_reproduce(const std::string& figure, const std::string& preset,
                             const fs::path& out_dir) {
  if (figure != "fig2" && figure != "fig3")
    throw InputError("reproduce: figure must be fig2 or fig3");
  if (preset != "full" && preset != "smoke")
    throw InputError("reproduce: preset must be full or smoke");
  ensure_dir(out_dir);

  ManifestBuilder mf(out_dir);
  mf.meta("figure", figure);
  mf.meta("preset", preset);
  ReproduceResult res;
  if (figure == "fig2")
    reproduce_fig2(preset, out_dir, mf, res.files);
  else
    reproduce_fig3(preset, out_dir, mf, res.files);

  for (const fs::path& p : res.files) mf.file(p);
  res.manifest_path = out_dir / "manifest.csv";
  io::write_csv(res.manifest_path, mf.table);
  std::cout << "reproduce: figure=" << figure << " preset=" << preset
            << " files=" << res.files.size()
            << " manifest=" << res.manifest_path.string() << "\n";
  return res;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"spfm: conditional flow matching with self-purifying label filtering"};
  app.require_subcommand(1);

  std::string config_path, out_override, dataset_override, checkpoint_path;
  std::string spfm_override, omega_list_str, tprime_list_str;
  std::string figure = "fig2", preset = "full", gate_records_str = "full";
  double threshold = 0.0;
  int steps_override = 0, n_eval_override = 0;
  std::uint64_t seed_override = 0;
  bool have_seed = false, timings = false;

  auto add_common = [&](CLI::App* cmd, bool with_config) {
    if (with_config)
      cmd->add_option("--config", config_path, "experiment config file")
          ->required();
    cmd->add_option("--out", out_override, "output directory override");
    cmd->add_option("--seed", seed_override, "seed override")
        ->each([&](const std::string&) { have_seed = true; });
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a dataset file");
  add_common(gen, true);

  CLI::App* train = app.add_subcommand("train", "train a model on a dataset file");
  add_common(train, true);
  train->add_option("--dataset", dataset_override, "dataset file path");
  train->add_option("--spfm", spfm_override, "on|off gate override")
      ->check(CLI::IsMember({"on", "off"}));
  train->add_option("--gate-records", gate_records_str,
                    "gate record csv: full|final|off")
      ->check(CLI::IsMember({"full", "final", "off"}));
  train->add_flag("--timings", timings, "write measured wall_ms to metrics csv");

  CLI::App* ev = app.add_subcommand("eval", "guidance sweep of conditional MSE");
  add_common(ev, true);
  ev->add_option("--checkpoint", checkpoint_path, "checkpoint path")->required();
  ev->add_option("--dataset", dataset_override, "dataset file path");
  ev->add_option("--omega", omega_list_str, "comma list of guidance scales");
  ev->add_option("--steps", steps_override, "Euler steps");
  ev->add_option("--n-eval", n_eval_override, "number of evaluation conditions");

  CLI::App* an = app.add_subcommand("analyze", "loss-difference sweep and F1 scores");
  add_common(an, true);
  an->add_option("--checkpoint", checkpoint_path, "checkpoint path")->required();
  an->add_option("--dataset", dataset_override, "dataset file path");
  an->add_option("--tprime", tprime_list_str, "comma list of t' values");
  an->add_option("--threshold", threshold, "detection threshold on loss_diff");
  an->add_option("--n-eval", n_eval_override, "number of analyzed samples");

  CLI::App* rep = app.add_subcommand("reproduce", "end-to-end figure bundles");
  rep->add_option("--figure", figure, "fig2|fig3")
      ->check(CLI::IsMember({"fig2", "fig3"}));
  rep->add_option("--preset", preset, "full|smoke")
      ->check(CLI::IsMember({"full", "smoke"}));
  rep->add_option("--out", out_override, "output directory");

  std::vector<std::string> rargs(args.rbegin(), args.rend());
  try {
    app.parse(rargs);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (rep->parsed()) {
      const fs::path out =
          out_override.empty() ? fs::path("out") / figure : fs::path(out_override);
      ensure_dir(out);
      DirLock lock(out);
      do_reproduce(figure, preset, out);
      return 0;
    }

    ExperimentConfig cfg = parse_config_file(config_path);
    const fs::path out =
        out_override.empty() ? fs::path(cfg.out_dir) : fs::path(out_override);
    const fs::path dataset_path = dataset_override.empty()
                                      ? fs::path(cfg.out_dir) / "dataset.txt"
                                      : fs::path(dataset_override);

    if (gen->parsed()) {
      if (have_seed) cfg.dataset.seed = seed_override;
      cfg.training.data_seed = cfg.dataset.seed;
      ensure_dir(out);
      DirLock lock(out);
      do_gen_data(cfg, out);
      return 0;
    }
    if (train->parsed()) {
      if (have_seed) cfg.training.train_seed = seed_override;
      if (spfm_override == "on") cfg.training.spfm_enabled = true;
      if (spfm_override == "off") cfg.training.spfm_enabled = false;
      if (!fs::exists(dataset_path))
        throw InputError("train: dataset file not found: " +
                         dataset_path.string() + " (run gen-data first)");
      const data::Dataset ds = data::load_text(dataset_path);
      const GateCsvMode mode = gate_records_str == "off"     ? GateCsvMode::Off
                               : gate_records_str == "final" ? GateCsvMode::Final
                                                             : GateCsvMode::Full;
      ensure_dir(out);
      DirLock lock(out);
      do_train(cfg, ds, out, mode, timings);
      return 0;
    }
    if (ev->parsed()) {
      const std::uint64_t seed = have_seed ? seed_override : cfg.sampler.seed;
      const std::vector<double> omegas =
          omega_list_str.empty() ? cfg.sampler.omega_list
                                 : parse_double_list(omega_list_str, "--omega");
      const int steps = steps_override > 0 ? steps_override : cfg.sampler.n_steps;
      const int n_eval =
          n_eval_override > 0 ? n_eval_override : cfg.sampler.eval_points;
      ensure_dir(out);
      DirLock lock(out);
      do_eval(cfg, checkpoint_path, dataset_path, omegas, steps, seed, n_eval,
              out);
      return 0;
    }
    if (an->parsed()) {
      const std::uint64_t seed = have_seed ? seed_override : cfg.sampler.seed;
      const std::vector<double> t_list =
          tprime_list_str.empty()
              ? std::vector<double>{0.1, 0.3, 0.5, 0.7, 0.9}
              : parse_double_list(tprime_list_str, "--tprime");
      const int n_eval = n_eval_override > 0 ? n_eval_override : 2000;
      ensure_dir(out);
      DirLock lock(out);
      do_analyze(cfg, checkpoint_path, dataset_path, t_list, threshold, seed,
                 n_eval, out);
      return 0;
    }
    throw InputError("no subcommand given");
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

namespace {

const std::map<std::string, std::string>& pinned_configs() {
  static const std::map<std::string, std::string> configs = {
      {"fig2_two_circles", R"(# two-circle reproduction, 40% polar label noise
[dataset]
kind = two_circles
n = 10000
seed = 1
corruption_rate = 0.4
corruption_mode = swap_existing
r_inner = 1
r_outer = 2
sigma_jitter = 0.03

[training]
epochs = 100
warmup_epochs = 4
batch_size = 128
cfg_dropout_rate = 0.1
gate_time = 0.5
spfm = on
gate_reuse = separate_t
lr = 0.001
beta1 = 0.9
beta2 = 0.999
eps = 1e-08
hidden_widths = 128,128,128
seed = 101

[sampler]
omega_list = 0,0.25,0.5,0.75,1
n_steps = 100
seed = 500
eval_points = 2000

[output]
dir = out/fig2_two_circles
run_label = fig2_two_circles
)"},
      {"fig2_spiral", R"(# spiral reproduction, 40% polar label noise
[dataset]
kind = spiral
n = 10000
seed = 2
corruption_rate = 0.4
corruption_mode = swap_existing
r_min = 0.5
r_max = 2.5
turns = 2
sigma_jitter = 0.03

[training]
epochs = 100
warmup_epochs = 4
batch_size = 128
cfg_dropout_rate = 0.1
gate_time = 0.5
spfm = on
gate_reuse = separate_t
lr = 0.001
beta1 = 0.9
beta2 = 0.999
eps = 1e-08
hidden_widths = 128,128,128
seed = 102

[sampler]
omega_list = 0,0.25,0.5,0.75,1
n_steps = 100
seed = 500
eval_points = 2000

[output]
dir = out/fig2_spiral
run_label = fig2_spiral
)"},
      {"fig3_two_circles", R"(# loss-difference analysis model (two-circles)
[dataset]
kind = two_circles
n = 10000
seed = 3
corruption_rate = 0.4
corruption_mode = swap_existing
r_inner = 1
r_outer = 2
sigma_jitter = 0.03

[training]
epochs = 100
warmup_epochs = 4
batch_size = 128
cfg_dropout_rate = 0.1
gate_time = 0.5
spfm = on
gate_reuse = separate_t
lr = 0.001
beta1 = 0.9
beta2 = 0.999
eps = 1e-08
hidden_widths = 128,128,128
seed = 103

[sampler]
omega_list = 0,0.5,1
n_steps = 100
seed = 500
eval_points = 2000

[output]
dir = out/fig3_two_circles
run_label = fig3_two_circles
)"},
      {"fig2_two_circles_smoke", R"(# reduced two-circle pipeline for smoke runs
[dataset]
kind = two_circles
n = 600
seed = 1
corruption_rate = 0.4
corruption_mode = swap_existing
r_inner = 1
r_outer = 2
sigma_jitter = 0.03

[training]
epochs = 6
warmup_epochs = 2
batch_size = 64
cfg_dropout_rate = 0.1
gate_time = 0.5
spfm = on
gate_reuse = separate_t
lr = 0.001
beta1 = 0.9
beta2 = 0.999
eps = 1e-08
hidden_widths = 128,128,128
seed = 101

[sampler]
omega_list = 0,1
n_steps = 20
seed = 500
eval_points = 200

[output]
dir = out/fig2_two_circles_smoke
run_label = fig2_two_circles_smoke
)"},
      {"fig2_spiral_smoke", R"(# reduced spiral pipeline for smoke runs
[dataset]
kind = spiral
n = 600
seed = 2
corruption_rate = 0.4
corruption_mode = swap_existing
r_min = 0.5
r_max = 2.5
turns = 2
sigma_jitter = 0.03

[training]
epochs = 6
warmup_epochs = 2
batch_size = 64
cfg_dropout_rate = 0.1
gate_time = 0.5
spfm = on
gate_reuse = separate_t
lr = 0.001
beta1 = 0.9
beta2 = 0.999
eps = 1e-08
hidden_widths = 128,128,128
seed = 102

[sampler]
omega_list = 0,1
n_steps = 20
seed = 500
eval_points = 200

[output]
dir = out/fig2_spiral_smoke
run_label = fig2_spiral_smoke
)"},
      {"fig3_two_circles_smoke", R"(# reduced analysis pipeline for smoke runs
[dataset]
kind = two_circles
n = 600
seed = 3
corruption_rate = 0.4
corruption_mode = swap_existing
r_inner = 1
r_outer = 2
sigma_jitter = 0.03

[training]
epochs = 6
warmup_epochs = 2
batch_size = 64
cfg_dropout_rate = 0.1
gate_time = 0.5
spfm = on
gate_reuse = separate_t
lr = 0.001
beta1 = 0.9
beta2 = 0.999
eps = 1e-08
hidden_widths = 128,128,128
seed = 103

[sampler]
omega_list = 0,1
n_steps = 20
seed = 500
eval_points = 200

[output]
dir = out/fig3_two_circles_smoke
run_label = fig3_two_circles_smoke
)"},
  };
  return configs;
}

}  // namespace

const std::string& pinned_config(const std::string& name) {
  const auto& configs = pinned_configs();
  const auto it = configs.find(name);
  if (it == configs.end())
    throw InputError("unknown pinned config '" + name + "'");
  return it->second;
}

}  // namespace spfm::cli
