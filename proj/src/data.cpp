// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "spfm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "spfm/csv.hpp"

namespace spfm::data {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw InputError("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw InputError("bad numeric value for " + what + ": '" + s + "'");
  }
}

}  // namespace

std::string to_string(DatasetKind k) {
  return k == DatasetKind::TwoCircles ? "two_circles" : "spiral";
}

std::string to_string(CorruptionMode m) {
  return m == CorruptionMode::SwapExisting ? "swap_existing" : "draw_uniform";
}

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "two_circles") return DatasetKind::TwoCircles;
  if (s == "spiral") return DatasetKind::Spiral;
  throw InputError("unknown dataset kind: '" + s + "'");
}

CorruptionMode corruption_mode_from_string(const std::string& s) {
  if (s == "swap_existing") return CorruptionMode::SwapExisting;
  if (s == "draw_uniform") return CorruptionMode::DrawUniform;
  throw InputError("unknown corruption mode: '" + s + "'");
}

int Dataset::corrupted_count() const {
  return static_cast<int>(
      std::count_if(samples.begin(), samples.end(),
                    [](const Sample& s) { return s.corrupted; }));
}

Vec2 polar_to_euclidean(const PolarCondition& c) {
  if (!(c.radius >= 0.0))
    throw InputError("polar_to_euclidean: radius must be >= 0, got " +
                     fmt17(c.radius));
  return Vec2(c.radius * std::cos(c.angle), c.radius * std::sin(c.angle));
}

Dataset gen_two_circles(int n, std::uint64_t seed, const DatasetSpec& constants) {
  if (n < 1) throw InputError("gen_two_circles: n must be >= 1");
  Dataset ds;
  ds.spec = constants;
  ds.spec.kind = DatasetKind::TwoCircles;
  ds.spec.n = n;
  ds.spec.seed = seed;
  ds.spec.corruption_rate = 0.0;
  ds.samples.reserve(static_cast<std::size_t>(n));
  Rng rng = Rng::derive({seed, stream::kDataGen});
  for (int i = 0; i < n; ++i) {
    Sample s;
    const double r =
        rng.uniform() < 0.5 ? constants.r_inner : constants.r_outer;
    const double theta = rng.uniform(0.0, kTwoPi);
    s.condition = {theta, r};
    s.original_condition = s.condition;
    s.x1 = polar_to_euclidean(s.condition) + constants.sigma_jitter * rng.normal2();
    ds.samples.push_back(s);
  }
  return ds;
}

Dataset gen_spiral(int n, std::uint64_t seed, const DatasetSpec& constants) {
  if (n < 1) throw InputError("gen_spiral: n must be >= 1");
  Dataset ds;
  ds.spec = constants;
  ds.spec.kind = DatasetKind::Spiral;
  ds.spec.n = n;
  ds.spec.seed = seed;
  ds.spec.corruption_rate = 0.0;
  ds.samples.reserve(static_cast<std::size_t>(n));
  Rng rng = Rng::derive({seed, stream::kDataGen});
  for (int i = 0; i < n; ++i) {
    Sample s;
    const double u = rng.uniform();
    const double r = constants.r_min + (constants.r_max - constants.r_min) * u;
    const double theta = std::fmod(constants.turns * kTwoPi * u, kTwoPi);
    s.condition = {theta, r};
    s.original_condition = s.condition;
    s.x1 = polar_to_euclidean(s.condition) + constants.sigma_jitter * rng.normal2();
    ds.samples.push_back(s);
  }
  return ds;
}

Dataset generate(const DatasetSpec& spec) {
  Dataset ds = spec.kind == DatasetKind::TwoCircles
                   ? gen_two_circles(spec.n, spec.seed, spec)
                   : gen_spiral(spec.n, spec.seed, spec);
  if (spec.corruption_rate > 0.0)
    ds = corrupt_labels(ds, spec.corruption_rate, spec.seed, spec.corruption_mode);
  return ds;
}

Dataset corrupt_labels(const Dataset& ds, double rate, std::uint64_t seed,
                       CorruptionMode mode) {
  if (!(rate >= 0.0 && rate <= 1.0))
    throw InputError("corrupt_labels: rate must be in [0,1]");
  Dataset out = ds;
  out.spec.corruption_rate = rate;
  out.spec.corruption_mode = mode;
  const int n = ds.size();
  const int k = static_cast<int>(std::lround(rate * n));
  if (k == 0) return out;

  Rng rng = Rng::derive({seed, stream::kCorrupt});
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<int> chosen(perm.begin(), perm.begin() + k);
  std::sort(chosen.begin(), chosen.end());

  double rad_lo = 0.0, rad_hi = 0.0;
  if (mode == CorruptionMode::DrawUniform) {
    rad_lo = ds.samples.front().original_condition.radius;
    rad_hi = rad_lo;
    for (const Sample& s : ds.samples) {
      rad_lo = std::min(rad_lo, s.original_condition.radius);
      rad_hi = std::max(rad_hi, s.original_condition.radius);
    }
  }

  for (int i : chosen) {
    Sample& s = out.samples[static_cast<std::size_t>(i)];
    if (mode == CorruptionMode::SwapExisting) {
      // Donor index uniform over [0,n-1] minus self, without rejection.
      std::uint64_t j = rng.uniform_index(static_cast<std::uint64_t>(n - 1));
      if (static_cast<int>(j) >= i) ++j;
      s.condition = ds.samples[static_cast<std::size_t>(j)].original_condition;
    } else {
      s.condition.angle = rng.uniform(0.0, kTwoPi);
      s.condition.radius = rng.uniform(rad_lo, rad_hi);
    }
    s.corrupted = true;
  }
  return out;
}

PolarCondition draw_condition(const DatasetSpec& spec, Rng& rng) {
  if (spec.kind == DatasetKind::TwoCircles) {
    const double r = rng.uniform() < 0.5 ? spec.r_inner : spec.r_outer;
    return {rng.uniform(0.0, kTwoPi), r};
  }
  const double u = rng.uniform();
  return {std::fmod(spec.turns * kTwoPi * u, kTwoPi),
          spec.r_min + (spec.r_max - spec.r_min) * u};
}

namespace {

std::string header_line(const DatasetSpec& spec) {
  std::ostringstream os;
  os << "spfm_dataset=1 kind=" << to_string(spec.kind) << " n=" << spec.n
     << " seed=" << spec.seed << " corruption_rate=" << fmt17(spec.corruption_rate)
     << " corruption_mode=" << to_string(spec.corruption_mode)
     << " r_inner=" << fmt17(spec.r_inner) << " r_outer=" << fmt17(spec.r_outer)
     << " r_min=" << fmt17(spec.r_min) << " r_max=" << fmt17(spec.r_max)
     << " turns=" << fmt17(spec.turns)
     << " sigma_jitter=" << fmt17(spec.sigma_jitter);
  return os.str();
}

DatasetSpec parse_header(const std::string& line) {
  DatasetSpec spec;
  std::istringstream is(line);
  std::string tok;
  bool magic_seen = false;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos)
      throw InputError("dataset header: expected key=value, got '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    if (key == "spfm_dataset") {
      if (val != "1") throw InputError("unsupported dataset format version " + val);
      magic_seen = true;
    } else if (key == "kind") {
      spec.kind = dataset_kind_from_string(val);
    } else if (key == "n") {
      spec.n = static_cast<int>(parse_double(val, key));
    } else if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(std::stoull(val));
    } else if (key == "corruption_rate") {
      spec.corruption_rate = parse_double(val, key);
    } else if (key == "corruption_mode") {
      spec.corruption_mode = corruption_mode_from_string(val);
    } else if (key == "r_inner") {
      spec.r_inner = parse_double(val, key);
    } else if (key == "r_outer") {
      spec.r_outer = parse_double(val, key);
    } else if (key == "r_min") {
      spec.r_min = parse_double(val, key);
    } else if (key == "r_max") {
      spec.r_max = parse_double(val, key);
    } else if (key == "turns") {
      spec.turns = parse_double(val, key);
    } else if (key == "sigma_jitter") {
      spec.sigma_jitter = parse_double(val, key);
    } else {
      throw InputError("dataset header: unknown key '" + key + "'");
    }
  }
  if (!magic_seen) throw InputError("not a spfm dataset file (missing magic)");
  return spec;
}

}  // namespace

void save_text(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  out << header_line(ds.spec) << '\n';
  for (const Sample& s : ds.samples) {
    out << fmt17(s.x1.x()) << ' ' << fmt17(s.x1.y()) << ' '
        << fmt17(s.condition.angle) << ' ' << fmt17(s.condition.radius) << ' '
        << (s.corrupted ? 1 : 0) << ' ' << fmt17(s.original_condition.angle)
        << ' ' << fmt17(s.original_condition.radius) << '\n';
  }
  if (!out) throw InputError("write failed: " + path.string());
}

Dataset load_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty dataset file: " + path.string());
  Dataset ds;
  ds.spec = parse_header(line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    Sample s;
    int corrupted = 0;
    if (!(is >> s.x1.x() >> s.x1.y() >> s.condition.angle >> s.condition.radius >>
          corrupted >> s.original_condition.angle >> s.original_condition.radius))
      throw InputError("dataset record parse error at line " +
                       std::to_string(lineno));
    s.corrupted = corrupted != 0;
    ds.samples.push_back(s);
  }
  if (ds.size() != ds.spec.n)
    throw InputError("dataset record count " + std::to_string(ds.size()) +
                     " does not match header n=" + std::to_string(ds.spec.n));
  return ds;
}

namespace {

constexpr char kBinMagic[8] = {'S', 'P', 'F', 'M', 'D', 'A', 'T', '1'};

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InputError("truncated dataset binary");
  return v;
}

}  // namespace

void save_binary(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  out.write(kBinMagic, sizeof(kBinMagic));
  put(out, static_cast<std::uint8_t>(ds.spec.kind));
  put(out, static_cast<std::uint8_t>(ds.spec.corruption_mode));
  put(out, static_cast<std::int32_t>(ds.spec.n));
  put(out, ds.spec.seed);
  put(out, ds.spec.corruption_rate);
  put(out, ds.spec.r_inner);
  put(out, ds.spec.r_outer);
  put(out, ds.spec.r_min);
  put(out, ds.spec.r_max);
  put(out, ds.spec.turns);
  put(out, ds.spec.sigma_jitter);
  for (const Sample& s : ds.samples) {
    put(out, s.x1.x());
    put(out, s.x1.y());
    put(out, s.condition.angle);
    put(out, s.condition.radius);
    put(out, static_cast<std::uint8_t>(s.corrupted ? 1 : 0));
    put(out, s.original_condition.angle);
    put(out, s.original_condition.radius);
  }
  if (!out) throw InputError("write failed: " + path.string());
}

Dataset load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open dataset file: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kBinMagic, sizeof(magic)) != 0)
    throw InputError("not a spfm binary dataset: " + path.string());
  Dataset ds;
  ds.spec.kind = static_cast<DatasetKind>(get<std::uint8_t>(in));
  ds.spec.corruption_mode = static_cast<CorruptionMode>(get<std::uint8_t>(in));
  ds.spec.n = get<std::int32_t>(in);
  ds.spec.seed = get<std::uint64_t>(in);
  ds.spec.corruption_rate = get<double>(in);
  ds.spec.r_inner = get<double>(in);
  ds.spec.r_outer = get<double>(in);
  ds.spec.r_min = get<double>(in);
  ds.spec.r_max = get<double>(in);
  ds.spec.turns = get<double>(in);
  ds.spec.sigma_jitter = get<double>(in);
  ds.samples.resize(static_cast<std::size_t>(ds.spec.n));
  for (Sample& s : ds.samples) {
    s.x1.x() = get<double>(in);
    s.x1.y() = get<double>(in);
    s.condition.angle = get<double>(in);
    s.condition.radius = get<double>(in);
    s.corrupted = get<std::uint8_t>(in) != 0;
    s.original_condition.angle = get<double>(in);
    s.original_condition.radius = get<double>(in);
  }
  return ds;
}

Dataset import_csv(const std::filesystem::path& path) {
  const io::Table t = io::read_csv(path);
  const std::vector<std::string> want = {"x1_x",      "x1_y",       "angle",
                                         "radius",    "corrupted",  "orig_angle",
                                         "orig_radius"};
  if (t.header != want)
    throw InputError("import_csv: unexpected header in " + path.string());
  Dataset ds;
  ds.spec.n = static_cast<int>(t.rows.size());
  if (ds.spec.n == 0) throw InputError("import_csv: no records in " + path.string());
  ds.samples.reserve(t.rows.size());
  int corrupted = 0;
  for (const auto& row : t.rows) {
    Sample s;
    s.x1.x() = parse_double(row[0], "x1_x");
    s.x1.y() = parse_double(row[1], "x1_y");
    s.condition.angle = parse_double(row[2], "angle");
    s.condition.radius = parse_double(row[3], "radius");
    s.corrupted = parse_double(row[4], "corrupted") != 0.0;
    s.original_condition.angle = parse_double(row[5], "orig_angle");
    s.original_condition.radius = parse_double(row[6], "orig_radius");
    if (s.corrupted) ++corrupted;
    ds.samples.push_back(s);
  }
  ds.spec.corruption_rate =
      static_cast<double>(corrupted) / static_cast<double>(ds.spec.n);
  return ds;
}

}  // namespace spfm::data
