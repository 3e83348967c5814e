// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "spfm/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "spfm/csv.hpp"

namespace spfm::cli {

void SamplerBlock::validate() const {
  if (omega_list.empty()) throw InputError("sampler: omega_list must be non-empty");
  for (double w : omega_list)
    if (!(w >= 0.0)) throw InputError("sampler: omega values must be >= 0");
  if (n_steps < 1) throw InputError("sampler: n_steps must be >= 1");
  if (eval_points < 1) throw InputError("sampler: eval_points must be >= 1");
}

void ExperimentConfig::validate() const {
  if (dataset.n < 1) throw InputError("dataset: n must be >= 1");
  if (!(dataset.corruption_rate >= 0.0 && dataset.corruption_rate <= 1.0))
    throw InputError("dataset: corruption_rate must be in [0,1]");
  if (!(dataset.sigma_jitter >= 0.0))
    throw InputError("dataset: sigma_jitter must be >= 0");
  training.validate();
  sampler.validate();
  if (run_label.empty()) throw InputError("output: run_label must be non-empty");
  if (out_dir.empty()) throw InputError("output: dir must be non-empty");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw InputError("x");
    return d;
  } catch (const std::exception&) {
    throw InputError("config: bad numeric value for '" + key + "': '" + v + "'");
  }
}

long to_int(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw InputError("x");
    return d;
  } catch (const std::exception&) {
    throw InputError("config: bad integer value for '" + key + "': '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const std::uint64_t d = std::stoull(v, &pos);
    if (pos != v.size()) throw InputError("x");
    return d;
  } catch (const std::exception&) {
    throw InputError("config: bad seed value for '" + key + "': '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw InputError("config: bad flag value for '" + key + "': '" + v +
                   "' (expected on|off)");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += io::format_double(v[i]);
  }
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

void apply_key(ExperimentConfig& cfg, const std::string& section,
               const std::string& key, const std::string& val) {
  if (section == "dataset") {
    if (key == "kind") cfg.dataset.kind = data::dataset_kind_from_string(val);
    else if (key == "n") cfg.dataset.n = static_cast<int>(to_int(val, key));
    else if (key == "seed") cfg.dataset.seed = to_u64(val, key);
    else if (key == "corruption_rate") cfg.dataset.corruption_rate = to_double(val, key);
    else if (key == "corruption_mode")
      cfg.dataset.corruption_mode = data::corruption_mode_from_string(val);
    else if (key == "r_inner") cfg.dataset.r_inner = to_double(val, key);
    else if (key == "r_outer") cfg.dataset.r_outer = to_double(val, key);
    else if (key == "r_min") cfg.dataset.r_min = to_double(val, key);
    else if (key == "r_max") cfg.dataset.r_max = to_double(val, key);
    else if (key == "turns") cfg.dataset.turns = to_double(val, key);
    else if (key == "sigma_jitter") cfg.dataset.sigma_jitter = to_double(val, key);
    else throw InputError("config: unknown key '[dataset] " + key + "'");
  } else if (section == "training") {
    if (key == "epochs") cfg.training.epochs = static_cast<int>(to_int(val, key));
    else if (key == "warmup_epochs")
      cfg.training.warmup_epochs = static_cast<int>(to_int(val, key));
    else if (key == "batch_size")
      cfg.training.batch_size = static_cast<int>(to_int(val, key));
    else if (key == "cfg_dropout_rate")
      cfg.training.cfg_dropout_rate = to_double(val, key);
    else if (key == "gate_time") cfg.training.gate_time = to_double(val, key);
    else if (key == "spfm") cfg.training.spfm_enabled = to_bool(val, key);
    else if (key == "gate_reuse")
      cfg.training.gate_reuse = flow::gate_reuse_from_string(val);
    else if (key == "lr") cfg.training.optimizer.lr = to_double(val, key);
    else if (key == "beta1") cfg.training.optimizer.beta1 = to_double(val, key);
    else if (key == "beta2") cfg.training.optimizer.beta2 = to_double(val, key);
    else if (key == "eps") cfg.training.optimizer.eps = to_double(val, key);
    else if (key == "hidden_widths") {
      cfg.training.hidden_widths.clear();
      for (const std::string& s : split_list(val))
        cfg.training.hidden_widths.push_back(static_cast<int>(to_int(s, key)));
    } else if (key == "seed") {
      cfg.training.train_seed = to_u64(val, key);
    } else {
      throw InputError("config: unknown key '[training] " + key + "'");
    }
  } else if (section == "sampler") {
    if (key == "omega_list") {
      cfg.sampler.omega_list.clear();
      for (const std::string& s : split_list(val))
        cfg.sampler.omega_list.push_back(to_double(s, key));
    } else if (key == "n_steps") {
      cfg.sampler.n_steps = static_cast<int>(to_int(val, key));
    } else if (key == "seed") {
      cfg.sampler.seed = to_u64(val, key);
    } else if (key == "eval_points") {
      cfg.sampler.eval_points = static_cast<int>(to_int(val, key));
    } else {
      throw InputError("config: unknown key '[sampler] " + key + "'");
    }
  } else if (section == "output") {
    if (key == "dir") cfg.out_dir = val;
    else if (key == "run_label") cfg.run_label = val;
    else throw InputError("config: unknown key '[output] " + key + "'");
  } else {
    throw InputError("config: unknown section '[" + section + "]'");
  }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw InputError("config line " + std::to_string(lineno) +
                         ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError("config line " + std::to_string(lineno) +
                       ": expected key = value");
    if (section.empty())
      throw InputError("config line " + std::to_string(lineno) +
                       ": key outside any section");
    apply_key(cfg, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.training.data_seed = cfg.dataset.seed;
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string canonical_serialize(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "[dataset]\n";
  os << "kind = " << data::to_string(cfg.dataset.kind) << "\n";
  os << "n = " << cfg.dataset.n << "\n";
  os << "seed = " << cfg.dataset.seed << "\n";
  os << "corruption_rate = " << io::format_double(cfg.dataset.corruption_rate) << "\n";
  os << "corruption_mode = " << data::to_string(cfg.dataset.corruption_mode) << "\n";
  os << "r_inner = " << io::format_double(cfg.dataset.r_inner) << "\n";
  os << "r_outer = " << io::format_double(cfg.dataset.r_outer) << "\n";
  os << "r_min = " << io::format_double(cfg.dataset.r_min) << "\n";
  os << "r_max = " << io::format_double(cfg.dataset.r_max) << "\n";
  os << "turns = " << io::format_double(cfg.dataset.turns) << "\n";
  os << "sigma_jitter = " << io::format_double(cfg.dataset.sigma_jitter) << "\n";
  os << "[training]\n";
  os << "epochs = " << cfg.training.epochs << "\n";
  os << "warmup_epochs = " << cfg.training.warmup_epochs << "\n";
  os << "batch_size = " << cfg.training.batch_size << "\n";
  os << "cfg_dropout_rate = " << io::format_double(cfg.training.cfg_dropout_rate)
     << "\n";
  os << "gate_time = " << io::format_double(cfg.training.gate_time) << "\n";
  os << "spfm = " << (cfg.training.spfm_enabled ? "on" : "off") << "\n";
  os << "gate_reuse = " << flow::to_string(cfg.training.gate_reuse) << "\n";
  os << "lr = " << io::format_double(cfg.training.optimizer.lr) << "\n";
  os << "beta1 = " << io::format_double(cfg.training.optimizer.beta1) << "\n";
  os << "beta2 = " << io::format_double(cfg.training.optimizer.beta2) << "\n";
  os << "eps = " << io::format_double(cfg.training.optimizer.eps) << "\n";
  os << "hidden_widths = " << join_ints(cfg.training.hidden_widths) << "\n";
  os << "seed = " << cfg.training.train_seed << "\n";
  os << "[sampler]\n";
  os << "omega_list = " << join_doubles(cfg.sampler.omega_list) << "\n";
  os << "n_steps = " << cfg.sampler.n_steps << "\n";
  os << "seed = " << cfg.sampler.seed << "\n";
  os << "eval_points = " << cfg.sampler.eval_points << "\n";
  os << "[output]\n";
  os << "dir = " << cfg.out_dir << "\n";
  os << "run_label = " << cfg.run_label << "\n";
  return os.str();
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string s = canonical_serialize(cfg);
  return fnv1a64(s.data(), s.size());
}

std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace spfm::cli
