// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "spfm/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "spfm/rng.hpp"

namespace spfm::net {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double silu(double z) { return z * sigmoid(z); }
inline double silu_deriv(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

void check_t_range(double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw InputError("time t must be in [0,1], got " + std::to_string(t));
}

}  // namespace

int ModelParameters::input_width() const {
  if (weights.empty()) throw InternalError("empty parameter set");
  return static_cast<int>(weights.front().cols());
}

std::vector<int> ModelParameters::widths() const {
  std::vector<int> w;
  w.push_back(input_width());
  for (const Matrix& m : weights) w.push_back(static_cast<int>(m.rows()));
  return w;
}

bool ModelParameters::all_finite() const {
  for (const Matrix& m : weights)
    if (!m.allFinite()) return false;
  for (const Vector& b : biases)
    if (!b.allFinite()) return false;
  return null_embedding.allFinite();
}

OptimizerState OptimizerState::zeros_like(const ModelParameters& p) {
  OptimizerState st;
  for (const Matrix& w : p.weights) {
    st.m_w.push_back(Matrix::Zero(w.rows(), w.cols()));
    st.v_w.push_back(Matrix::Zero(w.rows(), w.cols()));
  }
  for (const Vector& b : p.biases) {
    st.m_b.push_back(Vector::Zero(b.size()));
    st.v_b.push_back(Vector::Zero(b.size()));
  }
  st.m_null = Vector::Zero(p.null_embedding.size());
  st.v_null = Vector::Zero(p.null_embedding.size());
  return st;
}

bool OptimizerState::all_finite() const {
  for (const Matrix& m : m_w)
    if (!m.allFinite()) return false;
  for (const Matrix& m : v_w)
    if (!m.allFinite()) return false;
  for (const Vector& v : m_b)
    if (!v.allFinite()) return false;
  for (const Vector& v : v_b)
    if (!v.allFinite()) return false;
  return m_null.allFinite() && v_null.allFinite();
}

Vector embed_condition(const PolarCondition& c) {
  if (!std::isfinite(c.angle) || !std::isfinite(c.radius))
    throw InputError("embed_condition: non-finite condition");
  if (c.radius < 0.0) throw InputError("embed_condition: negative radius");
  Vector e(kCondEmbedWidth);
  e << std::cos(c.angle), std::sin(c.angle), c.radius;
  return e;
}

Vector embed_time(double t) {
  check_t_range(t);
  Vector e(kTimeEmbedWidth);
  e(0) = t;
  double freq = 2.0 * M_PI;
  for (int k = 0; k < kTimeEmbedPairs; ++k) {
    e(1 + 2 * k) = std::sin(freq * t);
    e(2 + 2 * k) = std::cos(freq * t);
    freq *= 2.0;
  }
  return e;
}

ModelParameters init_params(std::uint64_t seed, std::span<const int> widths) {
  if (widths.size() < 2)
    throw InputError("init_params: need at least input and output widths");
  for (int w : widths)
    if (w <= 0) throw InputError("init_params: widths must be positive");
  if (widths.front() != kInputWidth)
    throw InputError("init_params: input width must be " +
                     std::to_string(kInputWidth));
  if (widths.back() != kOutputDim)
    throw InputError("init_params: output width must be " +
                     std::to_string(kOutputDim));

  Rng rng = Rng::derive({seed, stream::kParamInit});
  ModelParameters p;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.size(); ++i)
      w.data()[i] = rng.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Vector::Zero(fan_out));
  }
  const double nb = 1.0 / std::sqrt(static_cast<double>(kCondEmbedWidth));
  p.null_embedding = Vector(kCondEmbedWidth);
  for (Eigen::Index i = 0; i < p.null_embedding.size(); ++i)
    p.null_embedding(i) = rng.uniform(-nb, nb);
  return p;
}

void assemble_input(const ModelParameters& p, const NetInput& in, Vector& out) {
  check_t_range(in.t);
  const Vector& cond = in.condition ? *in.condition : p.null_embedding;
  if (cond.size() != p.null_embedding.size())
    throw InputError("condition embedding width " + std::to_string(cond.size()) +
                     " does not match null embedding width " +
                     std::to_string(p.null_embedding.size()));
  out.resize(kDataDim + kTimeEmbedWidth + static_cast<int>(cond.size()));
  out.head<kDataDim>() = in.x_t;
  out.segment(kDataDim, kTimeEmbedWidth) = embed_time(in.t);
  out.tail(cond.size()) = cond;
}

Vec2 forward_assembled(const ModelParameters& p, const Vector& u, Workspace& ws) {
  const int L = p.n_layers();
  if (L == 0) throw InternalError("forward: empty parameter set");
  if (u.size() != p.weights.front().cols())
    throw InternalError("forward: input width " + std::to_string(u.size()) +
                        " does not match first layer " +
                        std::to_string(p.weights.front().cols()));
  ws.act.resize(static_cast<std::size_t>(L));
  const Vector* prev = &u;
  for (int l = 0; l < L; ++l) {
    if (p.weights[static_cast<std::size_t>(l)].cols() != prev->size() ||
        p.weights[static_cast<std::size_t>(l)].rows() !=
            p.biases[static_cast<std::size_t>(l)].size())
      throw InternalError("forward: layer dimension mismatch at layer " +
                          std::to_string(l));
    Vector& a = ws.act[static_cast<std::size_t>(l)];
    a.noalias() = p.weights[static_cast<std::size_t>(l)] * (*prev);
    a += p.biases[static_cast<std::size_t>(l)];
    if (l + 1 < L)
      for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = silu(a(i));
    prev = &a;
  }
  return Vec2(ws.act.back()(0), ws.act.back()(1));
}

Vec2 forward(const ModelParameters& p, const NetInput& in) {
  Workspace ws;
  assemble_input(p, in, ws.input);
  return forward_assembled(p, ws.input, ws);
}

LossAndGrad loss_and_grad(const ModelParameters& p, std::span<const BatchItem> batch) {
  if (batch.empty()) throw InputError("loss_and_grad: empty batch");
  const int L = p.n_layers();
  const int B = static_cast<int>(batch.size());
  const int in_w = p.input_width();

  Matrix U(in_w, B);
  Matrix Y(kOutputDim, B);
  std::vector<char> uses_null(static_cast<std::size_t>(B), 0);
  Vector col(in_w);
  for (int j = 0; j < B; ++j) {
    const BatchItem& item = batch[static_cast<std::size_t>(j)];
    assemble_input(p, item.input, col);
    U.col(j) = col;
    Y.col(j) = item.target;
    uses_null[static_cast<std::size_t>(j)] = item.input.condition ? 0 : 1;
  }

  // Forward, keeping preactivations for the backward pass.
  std::vector<Matrix> z(static_cast<std::size_t>(L));
  std::vector<Matrix> a(static_cast<std::size_t>(L));
  const Matrix* prev = &U;
  for (int l = 0; l < L; ++l) {
    Matrix& zl = z[static_cast<std::size_t>(l)];
    zl.noalias() = p.weights[static_cast<std::size_t>(l)] * (*prev);
    zl.colwise() += p.biases[static_cast<std::size_t>(l)];
    if (l + 1 < L) {
      Matrix& al = a[static_cast<std::size_t>(l)];
      al = zl;
      for (Eigen::Index i = 0; i < al.size(); ++i) al.data()[i] = silu(al.data()[i]);
      prev = &al;
    } else {
      prev = &zl;
    }
  }

  const Matrix diff = z.back() - Y;
  LossAndGrad out;
  out.loss = diff.squaredNorm() / static_cast<double>(B);
  if (!std::isfinite(out.loss))
    throw NumericError("loss_and_grad: non-finite loss");

  out.grad.weights.resize(static_cast<std::size_t>(L));
  out.grad.biases.resize(static_cast<std::size_t>(L));

  // delta_l = d(mean loss)/d z_l, walked backwards with GEMMs.
  Matrix delta = (2.0 / static_cast<double>(B)) * diff;
  for (int l = L - 1; l >= 0; --l) {
    const Matrix& a_prev = l == 0 ? U : a[static_cast<std::size_t>(l - 1)];
    out.grad.weights[static_cast<std::size_t>(l)].noalias() =
        delta * a_prev.transpose();
    out.grad.biases[static_cast<std::size_t>(l)] = delta.rowwise().sum();
    if (l > 0) {
      Matrix next;
      next.noalias() = p.weights[static_cast<std::size_t>(l)].transpose() * delta;
      const Matrix& zl = z[static_cast<std::size_t>(l - 1)];
      for (Eigen::Index i = 0; i < next.size(); ++i)
        next.data()[i] *= silu_deriv(zl.data()[i]);
      delta = std::move(next);
    } else {
      // Input-layer sensitivities: only the condition slot carries learnable
      // inputs (the null embedding).
      const int cond_w = static_cast<int>(p.null_embedding.size());
      Matrix d_input;
      d_input.noalias() =
          p.weights.front().transpose().bottomRows(cond_w) * delta;
      Vector g = Vector::Zero(cond_w);
      for (int j = 0; j < B; ++j)
        if (uses_null[static_cast<std::size_t>(j)]) g += d_input.col(j);
      out.grad.null_embedding = std::move(g);
    }
  }
  if (!out.grad.all_finite())
    throw NumericError("loss_and_grad: non-finite gradient");
  return out;
}

namespace {

template <typename T>
void adam_update(T& param, const T& grad, T& m, T& v, const AdamHyper& h,
                 double bc1, double bc2) {
  m.array() = h.beta1 * m.array() + (1.0 - h.beta1) * grad.array();
  v.array() = h.beta2 * v.array() + (1.0 - h.beta2) * grad.array().square();
  param.array() -=
      h.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + h.eps);
}

}  // namespace

void optimizer_step(ModelParameters& p, const Gradients& g, OptimizerState& st,
                    const AdamHyper& h) {
  if (g.weights.size() != p.weights.size() ||
      g.biases.size() != p.biases.size() ||
      g.null_embedding.size() != p.null_embedding.size())
    throw InternalError("optimizer_step: gradient shape mismatch");
  if (!g.all_finite())
    throw NumericError("optimizer_step: non-finite gradient");

  st.step += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(st.step));
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    if (g.weights[l].rows() != p.weights[l].rows() ||
        g.weights[l].cols() != p.weights[l].cols())
      throw InternalError("optimizer_step: weight shape mismatch at layer " +
                          std::to_string(l));
    adam_update(p.weights[l], g.weights[l], st.m_w[l], st.v_w[l], h, bc1, bc2);
    adam_update(p.biases[l], g.biases[l], st.m_b[l], st.v_b[l], h, bc1, bc2);
  }
  adam_update(p.null_embedding, g.null_embedding, st.m_null, st.v_null, h, bc1,
              bc2);
  if (!p.all_finite() || !st.all_finite())
    throw NumericError("optimizer_step: overflow at step " +
                       std::to_string(st.step));
}

namespace {

constexpr char kCkptMagic[8] = {'S', 'P', 'F', 'M', 'C', 'K', 'P', 'T'};

void put_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put(std::ofstream& out, T v) {
  put_bytes(out, &v, sizeof(T));
}

void put_matrix(std::ofstream& out, const Matrix& m) {
  put_bytes(out, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

void put_vector(std::ofstream& out, const Vector& v) {
  put_bytes(out, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

void get_bytes(std::ifstream& in, void* p, std::size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in) throw InputError("truncated checkpoint");
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  get_bytes(in, &v, sizeof(T));
  return v;
}

void get_matrix(std::ifstream& in, Matrix& m) {
  get_bytes(in, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

void get_vector(std::ifstream& in, Vector& v) {
  get_bytes(in, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  out.write(kCkptMagic, sizeof(kCkptMagic));
  put(out, kCheckpointVersion);
  put(out, ck.config_hash);
  const auto widths = ck.params.widths();
  put(out, static_cast<std::uint32_t>(widths.size()));
  for (int w : widths) put(out, static_cast<std::uint32_t>(w));
  put(out, static_cast<std::uint32_t>(ck.params.null_embedding.size()));
  for (std::size_t l = 0; l < ck.params.weights.size(); ++l) {
    put_matrix(out, ck.params.weights[l]);
    put_vector(out, ck.params.biases[l]);
  }
  put_vector(out, ck.params.null_embedding);
  put(out, ck.opt.step);
  for (std::size_t l = 0; l < ck.params.weights.size(); ++l) {
    put_matrix(out, ck.opt.m_w[l]);
    put_matrix(out, ck.opt.v_w[l]);
    put_vector(out, ck.opt.m_b[l]);
    put_vector(out, ck.opt.v_b[l]);
  }
  put_vector(out, ck.opt.m_null);
  put_vector(out, ck.opt.v_null);
  if (!out) throw InputError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path.string());
  char magic[8];
  get_bytes(in, magic, sizeof(magic));
  if (std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
    throw InputError("not a spfm checkpoint: " + path.string());
  const auto version = get<std::uint8_t>(in);
  if (version != kCheckpointVersion)
    throw InputError("unsupported checkpoint version " + std::to_string(version) +
                     " (expected " + std::to_string(kCheckpointVersion) + ")");
  Checkpoint ck;
  ck.config_hash = get<std::uint64_t>(in);
  const auto n_widths = get<std::uint32_t>(in);
  if (n_widths < 2 || n_widths > 64)
    throw InputError("checkpoint: implausible width count");
  std::vector<int> widths(n_widths);
  for (auto& w : widths) {
    w = static_cast<int>(get<std::uint32_t>(in));
    if (w <= 0 || w > 1 << 20) throw InputError("checkpoint: bad layer width");
  }
  const auto cond_w = get<std::uint32_t>(in);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    ck.params.weights.emplace_back(widths[l + 1], widths[l]);
    get_matrix(in, ck.params.weights.back());
    ck.params.biases.emplace_back(widths[l + 1]);
    get_vector(in, ck.params.biases.back());
  }
  ck.params.null_embedding.resize(cond_w);
  get_vector(in, ck.params.null_embedding);
  ck.opt = OptimizerState::zeros_like(ck.params);
  ck.opt.step = get<std::uint64_t>(in);
  for (std::size_t l = 0; l < ck.params.weights.size(); ++l) {
    get_matrix(in, ck.opt.m_w[l]);
    get_matrix(in, ck.opt.v_w[l]);
    get_vector(in, ck.opt.m_b[l]);
    get_vector(in, ck.opt.v_b[l]);
  }
  get_vector(in, ck.opt.m_null);
  get_vector(in, ck.opt.v_null);
  return ck;
}

std::vector<std::uint8_t> serialize_params(const ModelParameters& p) {
  std::vector<std::uint8_t> bytes;
  auto append = [&bytes](const double* d, std::size_t n) {
    const auto* raw = reinterpret_cast<const std::uint8_t*>(d);
    bytes.insert(bytes.end(), raw, raw + n * sizeof(double));
  };
  for (const Matrix& w : p.weights) append(w.data(), static_cast<std::size_t>(w.size()));
  for (const Vector& b : p.biases) append(b.data(), static_cast<std::size_t>(b.size()));
  append(p.null_embedding.data(), static_cast<std::size_t>(p.null_embedding.size()));
  return bytes;
}

}  // namespace spfm::net
