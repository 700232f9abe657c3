//
// Copyright 2026 The inrunshap Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "inrun/model.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>

namespace inrun {

void ModelSpec::validate() const {
  if (dims.size() < 2) throw ContractError("ModelSpec: need at least one layer");
  for (std::size_t d : dims)
    if (d == 0) throw ContractError("ModelSpec: zero layer dimension");
  if (seq_len == 0) throw ContractError("ModelSpec: seq_len must be >= 1");
  if (hidden_acts.size() != layer_count() - 1) {
    throw ContractError("ModelSpec: expected one activation per hidden boundary");
  }
  if (has_bias.size() != layer_count()) {
    throw ContractError("ModelSpec: expected one bias flag per layer");
  }
}

ModelParams ModelParams::zeros_like(const ModelSpec& spec) {
  ModelParams p;
  p.weights.reserve(spec.layer_count());
  p.biases.resize(spec.layer_count());
  for (std::size_t i = 0; i + 1 < spec.dims.size(); ++i) {
    p.weights.emplace_back(spec.dims[i], spec.dims[i + 1], 0.0);
    if (spec.has_bias[i]) p.biases[i].assign(spec.dims[i + 1], 0.0);
  }
  return p;
}

void ModelParams::check_shape(const ModelSpec& spec) const {
  if (weights.size() != spec.layer_count() || biases.size() != spec.layer_count()) {
    throw ContractError("ModelParams: layer count mismatch");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].rows != spec.dims[i] || weights[i].cols != spec.dims[i + 1]) {
      throw ContractError("ModelParams: weight shape mismatch at layer " + std::to_string(i));
    }
    const std::size_t want_bias = spec.has_bias[i] ? spec.dims[i + 1] : 0;
    if (biases[i].size() != want_bias) {
      throw ContractError("ModelParams: bias shape mismatch at layer " + std::to_string(i));
    }
  }
}

std::size_t ModelParams::flat_size() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

std::vector<double> ModelParams::to_flat() const {
  std::vector<double> flat;
  flat.reserve(flat_size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    flat.insert(flat.end(), weights[i].data.begin(), weights[i].data.end());
    flat.insert(flat.end(), biases[i].begin(), biases[i].end());
  }
  return flat;
}

void ModelParams::from_flat(std::span<const double> flat) {
  if (flat.size() != flat_size()) throw ContractError("ModelParams::from_flat: length mismatch");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    std::copy(flat.begin() + pos, flat.begin() + pos + weights[i].size(),
              weights[i].data.begin());
    pos += weights[i].size();
    std::copy(flat.begin() + pos, flat.begin() + pos + biases[i].size(), biases[i].begin());
    pos += biases[i].size();
  }
}

void ModelParams::add_scaled(const ModelParams& other, double alpha) {
  if (other.weights.size() != weights.size()) {
    throw ContractError("ModelParams::add_scaled: layer count mismatch");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (other.weights[i].size() != weights[i].size() || other.biases[i].size() != biases[i].size()) {
      throw ContractError("ModelParams::add_scaled: shape mismatch at layer " + std::to_string(i));
    }
    for (std::size_t k = 0; k < weights[i].data.size(); ++k) {
      weights[i].data[k] += alpha * other.weights[i].data[k];
    }
    for (std::size_t k = 0; k < biases[i].size(); ++k) {
      biases[i][k] += alpha * other.biases[i][k];
    }
  }
}

double ModelParams::dot_with(const ModelParams& other) const {
  if (other.weights.size() != weights.size()) {
    throw ContractError("ModelParams::dot_with: layer count mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    s += frobenius_dot(weights[i], other.weights[i]);
    s += dot(biases[i], other.biases[i]);
  }
  return s;
}

double ModelParams::max_abs() const {
  double m = 0.0;
  for (const auto& w : weights)
    for (double v : w.data) m = std::max(m, std::fabs(v));
  for (const auto& b : biases)
    for (double v : b) m = std::max(m, std::fabs(v));
  return m;
}

ModelParams init_params(const ModelSpec& spec, SeededRng& rng) {
  spec.validate();
  ModelParams p = ModelParams::zeros_like(spec);
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(spec.dims[i]));
    for (double& v : p.weights[i].data) v = scale * rng.next_gaussian();
  }
  return p;
}

namespace {

std::atomic<std::uint64_t> g_backward_passes{0};

double act_apply(Activation a, double x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Tanh: return std::tanh(x);
  }
  return x;
}

// Derivative expressed through the activation output y = act(x); for ReLU the
// subgradient at 0 is fixed to 0.
double act_deriv_from_output(Activation a, double y) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: return 1.0 - y * y;
  }
  return 1.0;
}

void check_example(const ModelSpec& spec, const Example& ex) {
  if (ex.features.size() != spec.feature_len()) {
    throw ContractError("example id=" + std::to_string(ex.id) + ": feature length " +
                        std::to_string(ex.features.size()) + " != d0*T = " +
                        std::to_string(spec.feature_len()));
  }
  if (spec.loss == Loss::Mse) {
    if (ex.regression_target.size() != spec.output_dim() * spec.seq_len) {
      throw ContractError("example id=" + std::to_string(ex.id) +
                          ": regression target length must be dL*T");
    }
  } else {
    if (ex.class_index < 0 || ex.class_index >= static_cast<std::int64_t>(spec.output_dim())) {
      throw ContractError("example id=" + std::to_string(ex.id) + ": class index out of range");
    }
  }
}

// Loss value and output gradient for the rows of one sample.
// out rows: T x dL slice of the final pre-activation.
double loss_and_out_grad(const ModelSpec& spec, const Example& ex, const Matrix2D& outs,
                         std::size_t row0, Matrix2D* grad_rows) {
  const std::size_t T = spec.seq_len;
  const std::size_t dl = spec.output_dim();
  double loss = 0.0;
  if (spec.loss == Loss::Mse) {
    for (std::size_t t = 0; t < T; ++t) {
      const double* o = outs.row_ptr(row0 + t);
      const double* y = ex.regression_target.data() + t * dl;
      for (std::size_t k = 0; k < dl; ++k) {
        const double r = o[k] - y[k];
        loss += 0.5 * r * r;
        if (grad_rows != nullptr) (*grad_rows)(row0 + t, k) = r;
      }
    }
  } else {
    const auto y = static_cast<std::size_t>(ex.class_index);
    for (std::size_t t = 0; t < T; ++t) {
      const double* o = outs.row_ptr(row0 + t);
      double m = o[0];
      for (std::size_t k = 1; k < dl; ++k) m = std::max(m, o[k]);
      double z = 0.0;
      for (std::size_t k = 0; k < dl; ++k) z += std::exp(o[k] - m);
      loss += -(o[y] - m - std::log(z));
      if (grad_rows != nullptr) {
        for (std::size_t k = 0; k < dl; ++k) {
          (*grad_rows)(row0 + t, k) = std::exp(o[k] - m) / z - (k == y ? 1.0 : 0.0);
        }
      }
    }
  }
  return loss;
}

}  // namespace

Matrix2D LayerTrace::activation(std::size_t layer, std::size_t sample) const {
  const Matrix2D& x = inputs.at(layer);
  Matrix2D a(x.cols, seq_len);
  for (std::size_t t = 0; t < seq_len; ++t)
    for (std::size_t j = 0; j < x.cols; ++j) a(j, t) = x(sample * seq_len + t, j);
  return a;
}

Matrix2D LayerTrace::out_grad(std::size_t layer, std::size_t sample) const {
  const Matrix2D& g = out_grads.at(layer);
  Matrix2D b(seq_len, g.cols);
  for (std::size_t t = 0; t < seq_len; ++t)
    for (std::size_t j = 0; j < g.cols; ++j) b(t, j) = g(sample * seq_len + t, j);
  return b;
}

LayerTrace forward(const ModelParams& params, const ModelSpec& spec,
                   std::span<const Example> samples) {
  spec.validate();
  params.check_shape(spec);
  const std::size_t n = samples.size();
  const std::size_t T = spec.seq_len;
  const std::size_t L = spec.layer_count();

  LayerTrace trace;
  trace.n_samples = n;
  trace.seq_len = T;
  trace.inputs.resize(L);
  trace.preacts.resize(L);
  trace.losses.resize(n);

  Matrix2D x(n * T, spec.input_dim());
  for (std::size_t s = 0; s < n; ++s) {
    check_example(spec, samples[s]);
    for (std::size_t t = 0; t < T; ++t) {
      const double* src = samples[s].features.data() + t * spec.input_dim();
      std::memcpy(x.row_ptr(s * T + t), src, spec.input_dim() * sizeof(double));
    }
  }

  for (std::size_t i = 0; i < L; ++i) {
    trace.inputs[i] = x;
    Matrix2D s = matmul(x, params.weights[i]);
    if (spec.has_bias[i]) {
      const auto& b = params.biases[i];
      for (std::size_t r = 0; r < s.rows; ++r) {
        double* row = s.row_ptr(r);
        for (std::size_t j = 0; j < s.cols; ++j) row[j] += b[j];
      }
    }
    trace.preacts[i] = s;
    if (i + 1 < L) {
      const Activation act = spec.hidden_acts[i];
      x = std::move(s);
      for (double& v : x.data) v = act_apply(act, v);
    }
  }

  const Matrix2D& outs = trace.preacts[L - 1];
  trace.loss_grads = Matrix2D(n * T, spec.output_dim(), 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    trace.losses[s] = loss_and_out_grad(spec, samples[s], outs, s * T, &trace.loss_grads);
    if (!std::isfinite(trace.losses[s])) {
      throw NumericError("non-finite loss for example id=" + std::to_string(samples[s].id));
    }
  }
  trace.has_forward = true;
  return trace;
}

void backward_joint(const ModelParams& params, const ModelSpec& spec, LayerTrace& trace) {
  if (!trace.has_forward) {
    throw ContractError("backward_joint: missing forward cache");
  }
  const std::size_t L = spec.layer_count();
  trace.out_grads.assign(L, Matrix2D());
  trace.out_grads[L - 1] = trace.loss_grads;

  for (std::size_t i = L - 1; i > 0; --i) {
    // dX_i = B_i * W_i^T, then through the activation of boundary i-1.
    Matrix2D dx = matmul_transposed_b(trace.out_grads[i], params.weights[i]);
    const Activation act = spec.hidden_acts[i - 1];
    const Matrix2D& y = trace.inputs[i];  // activation outputs of boundary i-1
    for (std::size_t k = 0; k < dx.data.size(); ++k) {
      dx.data[k] *= act_deriv_from_output(act, y.data[k]);
    }
    trace.out_grads[i - 1] = std::move(dx);
  }
  trace.has_backward = true;
  note_backward_pass();
}

ModelParams grad_from_trace(const ModelSpec& spec, const LayerTrace& trace,
                            std::span<const std::size_t> sample_indices) {
  if (!trace.has_backward) {
    throw ContractError("grad_from_trace: trace has no backward data");
  }
  const std::size_t T = trace.seq_len;
  ModelParams g = ModelParams::zeros_like(spec);
  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    for (std::size_t s : sample_indices) {
      if (s >= trace.n_samples) {
        throw ContractError("grad_from_trace: sample index " + std::to_string(s) +
                            " not covered by trace");
      }
      add_at_b_rows(g.weights[i], trace.inputs[i], trace.out_grads[i], s * T, (s + 1) * T);
      if (spec.has_bias[i]) {
        for (std::size_t t = 0; t < T; ++t) {
          const double* row = trace.out_grads[i].row_ptr(s * T + t);
          for (std::size_t j = 0; j < g.biases[i].size(); ++j) g.biases[i][j] += row[j];
        }
      }
    }
  }
  return g;
}

ModelParams tape_grad_for_sample(const ModelParams& params, const ModelSpec& spec,
                                 const LayerTrace& trace, std::size_t sample) {
  if (!trace.has_forward) {
    throw ContractError("tape_grad_for_sample: missing forward cache");
  }
  if (sample >= trace.n_samples) {
    throw ContractError("tape_grad_for_sample: sample index out of range");
  }
  const std::size_t L = spec.layer_count();
  const std::size_t T = trace.seq_len;
  const std::size_t total_rows = trace.n_samples * T;

  Matrix2D b(total_rows, spec.output_dim(), 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t r = sample * T + t;
    std::memcpy(b.row_ptr(r), trace.loss_grads.row_ptr(r), b.cols * sizeof(double));
  }

  ModelParams g = ModelParams::zeros_like(spec);
  for (std::size_t i = L; i-- > 0;) {
    add_at_b_rows(g.weights[i], trace.inputs[i], b, 0, total_rows);
    if (spec.has_bias[i]) {
      for (std::size_t r = 0; r < total_rows; ++r) {
        const double* row = b.row_ptr(r);
        for (std::size_t j = 0; j < g.biases[i].size(); ++j) g.biases[i][j] += row[j];
      }
    }
    if (i > 0) {
      Matrix2D dx = matmul_transposed_b(b, params.weights[i]);
      const Activation act = spec.hidden_acts[i - 1];
      const Matrix2D& y = trace.inputs[i];
      for (std::size_t k = 0; k < dx.data.size(); ++k) {
        dx.data[k] *= act_deriv_from_output(act, y.data[k]);
      }
      b = std::move(dx);
    }
  }
  note_backward_pass();
  return g;
}

double loss_of(const ModelParams& params, const ModelSpec& spec, const Example& ex) {
  const LayerTrace t = forward(params, spec, std::span<const Example>(&ex, 1));
  return t.losses[0];
}

std::uint64_t backward_pass_count() { return g_backward_passes.load(); }
void reset_backward_pass_count() { g_backward_passes.store(0); }
void note_backward_pass() { g_backward_passes.fetch_add(1); }

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw IoError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

double get_f64(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw IoError("checkpoint: truncated file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 8;
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

constexpr char kMagic[] = "IRSV1";

}  // namespace

void save_checkpoint(const std::string& path, const ModelSpec& spec, const ModelParams& params) {
  params.check_shape(spec);
  std::string out;
  out.append(kMagic, 5);
  put_u32(out, static_cast<std::uint32_t>(spec.layer_count()));
  for (std::size_t d : spec.dims) put_u32(out, static_cast<std::uint32_t>(d));
  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    out.push_back(spec.has_bias[i] ? '\1' : '\0');
  }
  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    for (double v : params.weights[i].data) put_f64(out, v);
    for (double v : params.biases[i]) put_f64(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("checkpoint: cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("checkpoint: write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path, ModelSpec& spec_out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open " + path);
  std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < 5 || in.compare(0, 5, kMagic, 5) != 0) {
    throw IoError("checkpoint: bad magic in " + path);
  }
  std::size_t pos = 5;
  const std::uint32_t layers = get_u32(in, pos);
  if (layers == 0 || layers > 1024) throw IoError("checkpoint: implausible layer count");
  ModelSpec spec;
  spec.dims.resize(layers + 1);
  for (auto& d : spec.dims) d = get_u32(in, pos);
  spec.has_bias.resize(layers);
  for (std::uint32_t i = 0; i < layers; ++i) {
    if (pos >= in.size()) throw IoError("checkpoint: truncated file");
    spec.has_bias[i] = in[pos++] != '\0';
  }
  spec.hidden_acts.assign(layers - 1, Activation::Identity);
  spec.validate();
  ModelParams params = ModelParams::zeros_like(spec);
  for (std::uint32_t i = 0; i < layers; ++i) {
    for (double& v : params.weights[i].data) v = get_f64(in, pos);
    for (double& v : params.biases[i]) v = get_f64(in, pos);
  }
  if (pos != in.size()) throw IoError("checkpoint: trailing bytes in " + path);
  spec_out = spec;
  return params;
}

}  // namespace inrun
