// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdint>
#include <bit>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "spfm/cli.hpp"
#include "spfm/csv.hpp"
#include "spfm/net.hpp"
#include "spfm/rng.hpp"
#include "spfm/sampler.hpp"

using namespace spfm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("spfm_cli_" + std::to_string(Rng::mix64(
                              static_cast<std::uint64_t>(::getpid()) ^
                              reinterpret_cast<std::uintptr_t>(this))));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "exp.cfg";
  std::ofstream out(p);
  out << body;
  return p;
}

std::string small_config(const fs::path& out_dir, int n = 256,
                         const std::string& extra_training = "") {
  std::ostringstream os;
  os << "[dataset]\nkind = two_circles\nn = " << n
     << "\nseed = 4\ncorruption_rate = 0.4\n"
     << "[training]\nepochs = 6\nwarmup_epochs = 4\nbatch_size = 64\n"
     << "hidden_widths = 16\nseed = 21\n"
     << extra_training << "[sampler]\nomega_list = 0,1\nn_steps = 10\nseed = 33\n"
     << "eval_points = 40\n[output]\ndir = " << out_dir.string()
     << "\nrun_label = cli_test\n";
  return os.str();
}

}  // namespace

TEST_CASE("gen-data writes a dataset with the exact corruption count") {
  TempDir tmp;
  const fs::path cfg = write_config(tmp.path, small_config(tmp.path / "o", 10000));
  CHECK(cli::run({"gen-data", "--config", cfg.string()}) == 0);
  const data::Dataset ds = data::load_text(tmp.path / "o" / "dataset.txt");
  CHECK(ds.size() == 10000);
  CHECK(ds.corrupted_count() == 4000);
  CHECK_FALSE(fs::exists(tmp.path / "o" / ".spfm.lock"));
}

TEST_CASE("gen-data with zero corruption") {
  TempDir tmp;
  std::string body = small_config(tmp.path / "o", 500);
  body.replace(body.find("corruption_rate = 0.4"),
               std::string("corruption_rate = 0.4").size(),
               "corruption_rate = 0");
  const fs::path cfg = write_config(tmp.path, body);
  CHECK(cli::run({"gen-data", "--config", cfg.string()}) == 0);
  CHECK(data::load_text(tmp.path / "o" / "dataset.txt").corrupted_count() == 0);
}

TEST_CASE("gen-data creates missing directories and rejects unwritable paths") {
  TempDir tmp;
  const fs::path nested = tmp.path / "a" / "b" / "c";
  const fs::path cfg = write_config(tmp.path, small_config(nested, 50));
  CHECK(cli::run({"gen-data", "--config", cfg.string()}) == 0);
  CHECK(fs::exists(nested / "dataset.txt"));

  // A regular file cannot become a directory.
  const fs::path blocker = tmp.path / "blocker";
  std::ofstream(blocker) << "x";
  const fs::path cfg2 =
      write_config(nested, small_config(blocker / "sub", 50));
  CHECK(cli::run({"gen-data", "--config", cfg2.string()}) == 1);
}

TEST_CASE("missing config and bad flags exit with code 1") {
  CHECK(cli::run({"gen-data", "--config", "/nonexistent/x.cfg"}) == 1);
  CHECK(cli::run({"gen-data"}) == 1);
  CHECK(cli::run({"frobnicate"}) == 1);
  CHECK(cli::run({}) == 1);
}

TEST_CASE("train writes checkpoint, metrics, and warm-up-gated records") {
  TempDir tmp;
  const fs::path out = tmp.path / "o";
  const fs::path cfg = write_config(tmp.path, small_config(out));
  REQUIRE(cli::run({"gen-data", "--config", cfg.string()}) == 0);
  REQUIRE(cli::run({"train", "--config", cfg.string()}) == 0);
  CHECK(fs::exists(out / "checkpoint.bin"));
  CHECK(fs::exists(out / "metrics.csv"));

  const io::Table metrics = io::read_csv(out / "metrics.csv");
  CHECK(metrics.header ==
        std::vector<std::string>{"epoch", "mean_loss", "gated_fraction",
                                 "dropped_fraction", "wall_ms"});
  REQUIRE(metrics.rows.size() == 6);
  // wall_ms is zeroed by default so reruns are byte-identical.
  for (const auto& row : metrics.rows) CHECK(row[4] == "0");

  const io::Table gates = io::read_csv(out / "gate_records.csv");
  const int c_epoch = gates.column("epoch");
  REQUIRE(!gates.rows.empty());
  int min_epoch = 999;
  for (std::size_t r = 0; r < gates.rows.size(); ++r)
    min_epoch = std::min(min_epoch,
                         static_cast<int>(io::cell_double(gates, r, c_epoch)));
  CHECK(min_epoch == 5);  // 4 warm-up epochs, gate starts at epoch 5

  const net::Checkpoint ck = net::load_checkpoint(out / "checkpoint.bin");
  CHECK(ck.params.all_finite());
  CHECK(ck.opt.step == 6 * 4);  // 6 epochs x ceil(256/64) batches
}

TEST_CASE("train without a dataset file fails cleanly") {
  TempDir tmp;
  const fs::path cfg = write_config(tmp.path, small_config(tmp.path / "o"));
  CHECK(cli::run({"train", "--config", cfg.string()}) == 1);
}

TEST_CASE("spfm off suppresses the gate record csv") {
  TempDir tmp;
  const fs::path out = tmp.path / "o";
  const fs::path cfg = write_config(tmp.path, small_config(out));
  REQUIRE(cli::run({"gen-data", "--config", cfg.string()}) == 0);
  REQUIRE(cli::run({"train", "--config", cfg.string(), "--spfm", "off", "--out",
                    (tmp.path / "off").string()}) == 0);
  CHECK(fs::exists(tmp.path / "off" / "checkpoint.bin"));
  CHECK_FALSE(fs::exists(tmp.path / "off" / "gate_records.csv"));
}

TEST_CASE("identical train runs produce byte-identical outputs") {
  TempDir tmp;
  const fs::path out = tmp.path / "o";
  const fs::path cfg = write_config(tmp.path, small_config(out));
  REQUIRE(cli::run({"gen-data", "--config", cfg.string()}) == 0);
  const std::string ds = (out / "dataset.txt").string();
  REQUIRE(cli::run({"train", "--config", cfg.string(), "--dataset", ds, "--out",
                    (tmp.path / "a").string()}) == 0);
  REQUIRE(cli::run({"train", "--config", cfg.string(), "--dataset", ds, "--out",
                    (tmp.path / "b").string()}) == 0);
  CHECK(read_file(tmp.path / "a" / "metrics.csv") ==
        read_file(tmp.path / "b" / "metrics.csv"));
  CHECK(read_file(tmp.path / "a" / "gate_records.csv") ==
        read_file(tmp.path / "b" / "gate_records.csv"));
  CHECK(read_file(tmp.path / "a" / "checkpoint.bin") ==
        read_file(tmp.path / "b" / "checkpoint.bin"));
}

TEST_CASE("numeric blowup exits 2 and leaves a failed marker") {
  TempDir tmp;
  const fs::path out = tmp.path / "o";
  const fs::path cfg =
      write_config(tmp.path, small_config(out, 256, "lr = 1e300\n"));
  REQUIRE(cli::run({"gen-data", "--config", cfg.string()}) == 0);
  CHECK(cli::run({"train", "--config", cfg.string()}) == 2);
  CHECK(fs::exists(out / "checkpoint.bin"));
  CHECK(fs::exists(out / "checkpoint.bin.failed"));
  const std::string note = read_file(out / "checkpoint.bin.failed");
  CHECK(note.find("epoch") != std::string::npos);
}

TEST_CASE("eval on a zero-field checkpoint matches the noise-mse oracle") {
  TempDir tmp;
  const fs::path out = tmp.path / "o";
  const fs::path cfg_path = write_config(tmp.path, small_config(out, 300));
  REQUIRE(cli::run({"gen-data", "--config", cfg_path.string()}) == 0);

  const cli::ExperimentConfig cfg = cli::parse_config_file(cfg_path);
  net::ModelParameters zero =
      net::init_params(0, std::vector<int>{net::kInputWidth, 2});
  zero.weights[0].setZero();
  zero.biases[0].setZero();
  zero.null_embedding.setZero();
  const fs::path ck_path = tmp.path / "zero.bin";
  net::save_checkpoint(ck_path, {zero, net::OptimizerState::zeros_like(zero),
                                 cli::config_hash(cfg)});

  const fs::path eval_out = tmp.path / "eval";
  REQUIRE(cli::run({"eval", "--config", cfg_path.string(), "--checkpoint",
                    ck_path.string(), "--dataset",
                    (out / "dataset.txt").string(), "--omega", "0", "--out",
                    eval_out.string()}) == 0);

  const io::Table mse = io::read_csv(eval_out / "mse_by_omega.csv");
  REQUIRE(mse.rows.size() == 1);
  const double got = io::cell_double(mse, 0, mse.column("mse"));

  // Direct recomputation through the documented streams: generated points
  // equal the drawn noise when the field is zero.
  const data::Dataset ds = data::load_text(out / "dataset.txt");
  Rng cond_rng = Rng::derive({cfg.sampler.seed, stream::kEvalConditions});
  double acc = 0.0;
  const int n_eval = cfg.sampler.eval_points;
  for (int i = 0; i < n_eval; ++i) {
    const PolarCondition c = data::draw_condition(ds.spec, cond_rng);
    Rng noise = Rng::derive({cfg.sampler.seed, stream::kSampler,
                             std::bit_cast<std::uint64_t>(c.angle),
                             std::bit_cast<std::uint64_t>(c.radius)});
    const Vec2 x0 = noise.normal2();
    acc += (x0 - data::polar_to_euclidean(c)).squaredNorm();
  }
  CHECK(got == acc / n_eval);
  CHECK(fs::exists(eval_out / "mse_vs_omega.svg"));
  CHECK(fs::exists(eval_out / "samples_omega_0.csv"));
}

TEST_CASE("eval deduplicates omegas and rejects an empty list") {
  TempDir tmp;
  const fs::path out = tmp.path / "o";
  const fs::path cfg_path = write_config(tmp.path, small_config(out, 128));
  REQUIRE(cli::run({"gen-data", "--config", cfg_path.string()}) == 0);
  REQUIRE(cli::run({"train", "--config", cfg_path.string()}) == 0);
  const std::string ck = (out / "checkpoint.bin").string();
  const std::string ds = (out / "dataset.txt").string();

  const fs::path dup_out = tmp.path / "dup";
  REQUIRE(cli::run({"eval", "--config", cfg_path.string(), "--checkpoint", ck,
                    "--dataset", ds, "--omega", "0,0,1", "--n-eval", "10",
                    "--steps", "5", "--out", dup_out.string()}) == 0);
  CHECK(io::read_csv(dup_out / "mse_by_omega.csv").rows.size() == 2);
  CHECK(fs::exists(dup_out / "warnings.txt"));

  CHECK(cli::run({"eval", "--config", cfg_path.string(), "--checkpoint", ck,
                  "--dataset", ds, "--omega", ",", "--out",
                  (tmp.path / "bad").string()}) == 1);
}

TEST_CASE("eval refuses a checkpoint with a different format version") {
  TempDir tmp;
  const fs::path out = tmp.path / "o";
  const fs::path cfg_path = write_config(tmp.path, small_config(out, 128));
  REQUIRE(cli::run({"gen-data", "--config", cfg_path.string()}) == 0);
  REQUIRE(cli::run({"train", "--config", cfg_path.string()}) == 0);

  const fs::path tampered = tmp.path / "tampered.bin";
  std::string bytes = read_file(out / "checkpoint.bin");
  bytes[8] = 9;  // version byte
  std::ofstream(tampered, std::ios::binary) << bytes;

  CHECK(cli::run({"eval", "--config", cfg_path.string(), "--checkpoint",
                  tampered.string(), "--dataset",
                  (out / "dataset.txt").string(), "--omega", "0", "--out",
                  (tmp.path / "e").string()}) == 1);
}

TEST_CASE("eval warns but proceeds on a config hash mismatch") {
  TempDir tmp;
  const fs::path out = tmp.path / "o";
  const fs::path cfg_path = write_config(tmp.path, small_config(out, 100));
  REQUIRE(cli::run({"gen-data", "--config", cfg_path.string()}) == 0);

  net::ModelParameters zero =
      net::init_params(0, std::vector<int>{net::kInputWidth, 2});
  zero.weights[0].setZero();
  zero.biases[0].setZero();
  zero.null_embedding.setZero();
  const fs::path ck_path = tmp.path / "zero.bin";
  net::save_checkpoint(
      ck_path, {zero, net::OptimizerState::zeros_like(zero), 0xbad0ull});

  const fs::path eval_out = tmp.path / "eval";
  CHECK(cli::run({"eval", "--config", cfg_path.string(), "--checkpoint",
                  ck_path.string(), "--dataset", (out / "dataset.txt").string(),
                  "--omega", "0", "--n-eval", "5", "--steps", "3", "--out",
                  eval_out.string()}) == 0);
  REQUIRE(fs::exists(eval_out / "warnings.txt"));
  CHECK(read_file(eval_out / "warnings.txt").find("hash") != std::string::npos);
}

TEST_CASE("analyze emits one score row per t-prime and histograms") {
  TempDir tmp;
  const fs::path out = tmp.path / "o";
  const fs::path cfg_path = write_config(tmp.path, small_config(out, 300));
  REQUIRE(cli::run({"gen-data", "--config", cfg_path.string()}) == 0);
  REQUIRE(cli::run({"train", "--config", cfg_path.string()}) == 0);

  const fs::path an_out = tmp.path / "an";
  REQUIRE(cli::run({"analyze", "--config", cfg_path.string(), "--checkpoint",
                    (out / "checkpoint.bin").string(), "--dataset",
                    (out / "dataset.txt").string(), "--n-eval", "60", "--out",
                    an_out.string()}) == 0);

  const io::Table scores = io::read_csv(an_out / "detection_scores.csv");
  REQUIRE(scores.rows.size() == 5);  // default t' list
  const int c_thr = scores.column("threshold");
  for (std::size_t r = 0; r < scores.rows.size(); ++r)
    CHECK(io::cell_double(scores, r, c_thr) == 0.0);  // default threshold
  for (const char* tag : {"0p1", "0p3", "0p5", "0p7", "0p9"})
    CHECK(fs::exists(an_out / (std::string("hist_tprime_") + tag + ".svg")));
  CHECK(fs::exists(an_out / "loss_diff_records.csv"));

  CHECK(cli::run({"analyze", "--config", cfg_path.string(), "--checkpoint",
                  (out / "checkpoint.bin").string(), "--dataset",
                  (out / "dataset.txt").string(), "--tprime", "1.5", "--out",
                  (tmp.path / "bad").string()}) == 1);
}

TEST_CASE("analyze on a zero-field checkpoint yields degenerate zero f1") {
  TempDir tmp;
  const fs::path out = tmp.path / "o";
  const fs::path cfg_path = write_config(tmp.path, small_config(out, 200));
  REQUIRE(cli::run({"gen-data", "--config", cfg_path.string()}) == 0);

  const cli::ExperimentConfig cfg = cli::parse_config_file(cfg_path);
  net::ModelParameters zero =
      net::init_params(0, std::vector<int>{net::kInputWidth, 2});
  zero.weights[0].setZero();
  zero.biases[0].setZero();
  zero.null_embedding.setZero();
  const fs::path ck_path = tmp.path / "zero.bin";
  net::save_checkpoint(ck_path, {zero, net::OptimizerState::zeros_like(zero),
                                 cli::config_hash(cfg)});

  const fs::path an_out = tmp.path / "an";
  REQUIRE(cli::run({"analyze", "--config", cfg_path.string(), "--checkpoint",
                    ck_path.string(), "--dataset",
                    (out / "dataset.txt").string(), "--n-eval", "40", "--out",
                    an_out.string()}) == 0);
  const io::Table scores = io::read_csv(an_out / "detection_scores.csv");
  const int c_f1 = scores.column("f1");
  const int c_deg = scores.column("degenerate");
  for (std::size_t r = 0; r < scores.rows.size(); ++r) {
    CHECK(io::cell_double(scores, r, c_f1) == 0.0);
    CHECK(scores.rows[r][static_cast<std::size_t>(c_deg)] == "1");
  }
}

TEST_CASE("output directory lock blocks concurrent use") {
  TempDir tmp;
  const fs::path out = tmp.path / "o";
  const fs::path cfg = write_config(tmp.path, small_config(out, 64));
  fs::create_directories(out);
  std::ofstream(out / ".spfm.lock") << "held";
  CHECK(cli::run({"gen-data", "--config", cfg.string()}) == 1);
  fs::remove(out / ".spfm.lock");
  CHECK(cli::run({"gen-data", "--config", cfg.string()}) == 0);
}
