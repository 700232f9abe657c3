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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "inrun/numerics.hpp"

namespace inrun {

enum class Activation { Identity, Relu, Tanh };
enum class Loss { Mse, SoftmaxCrossEntropy };

// Stack of linear layers with elementwise activations between them.
// dims = [d0, d1, ..., dL]; layer i maps d_i -> d_{i+1}; the activation
// after the last layer is always identity (the loss consumes raw outputs).
// seq_len > 1 applies the same weights at every position and sums the loss
// over positions.
struct ModelSpec {
  std::vector<std::size_t> dims;
  std::vector<Activation> hidden_acts;  // one per hidden boundary (L-1 entries)
  Loss loss = Loss::Mse;
  std::size_t seq_len = 1;
  std::vector<bool> has_bias;  // one per layer

  std::size_t layer_count() const { return dims.empty() ? 0 : dims.size() - 1; }
  std::size_t input_dim() const { return dims.front(); }
  std::size_t output_dim() const { return dims.back(); }
  std::size_t feature_len() const { return input_dim() * seq_len; }

  void validate() const;
};

// Per-layer weights plus optional biases. Doubles as the shape of gradients
// and Hessian-vector products (a point in parameter space).
struct ModelParams {
  std::vector<Matrix2D> weights;             // weights[i]: d_i x d_{i+1}
  std::vector<std::vector<double>> biases;   // biases[i]: d_{i+1} or empty

  static ModelParams zeros_like(const ModelSpec& spec);

  void check_shape(const ModelSpec& spec) const;
  std::size_t flat_size() const;
  std::vector<double> to_flat() const;
  void from_flat(std::span<const double> flat);

  void add_scaled(const ModelParams& other, double alpha);
  double dot_with(const ModelParams& other) const;
  double max_abs() const;
};

// Gaussian init with per-layer scale 1/sqrt(fan_in); biases start at zero.
ModelParams init_params(const ModelSpec& spec, SeededRng& rng);

// One training or validation point. Features are position-major:
// positions 0..T-1, each a block of d0 values. For MSE the target is a
// vector of length dL*T (position-major); for cross-entropy it is a class
// index applied at every position.
struct Example {
  std::int64_t id = 0;
  std::vector<double> features;
  std::int64_t class_index = -1;
  std::vector<double> regression_target;
  std::string domain;
};

// Per-sample forward and backward state for one joint pass. Sample s owns
// rows [s*T, (s+1)*T) of every stacked matrix:
//   inputs[i]   : (n*T) x d_i     rows of layer-i input (a, transposed view)
//   preacts[i]  : (n*T) x d_{i+1} pre-activation s
//   out_grads[i]: (n*T) x d_{i+1} per-sample loss gradient b = dl/ds
// b rows hold the gradient of that sample's own loss; other samples in the
// pass contribute nothing to them.
struct LayerTrace {
  std::vector<Matrix2D> inputs;
  std::vector<Matrix2D> preacts;
  std::vector<Matrix2D> out_grads;
  Matrix2D loss_grads;  // (n*T) x dL, dl/ds at the output, filled by forward
  std::vector<double> losses;
  std::size_t n_samples = 0;
  std::size_t seq_len = 1;
  bool has_forward = false;
  bool has_backward = false;

  // Copies in the a / b orientation used by the pairwise-dot algebra:
  // a: d_i x T, b: T x d_{i+1}.
  Matrix2D activation(std::size_t layer, std::size_t sample) const;
  Matrix2D out_grad(std::size_t layer, std::size_t sample) const;
};

// Forward pass over a set of samples; fills inputs/preacts/losses.
// Throws NumericError naming the offending sample if a loss is non-finite.
LayerTrace forward(const ModelParams& params, const ModelSpec& spec,
                   std::span<const Example> samples);

// Per-sample backward over an existing forward trace. One call counts as one
// backward pass regardless of how many samples the trace covers.
void backward_joint(const ModelParams& params, const ModelSpec& spec, LayerTrace& trace);

// Sum of per-sample gradients a (x) b for the given trace samples, assembled
// from the recorded trace without another backward pass. Indices must be
// ascending-unique positions within the trace.
ModelParams grad_from_trace(const ModelSpec& spec, const LayerTrace& trace,
                            std::span<const std::size_t> sample_indices);

// Materializes one sample's gradient the way an autodiff tape over a batched
// graph does: the backward traversal is seeded with only this sample's loss
// gradient but sweeps the full stacked graph, so every call costs a whole
// joint backward. Counts as one backward pass. Only needs a forward trace.
ModelParams tape_grad_for_sample(const ModelParams& params, const ModelSpec& spec,
                                 const LayerTrace& trace, std::size_t sample);

double loss_of(const ModelParams& params, const ModelSpec& spec, const Example& ex);

// Monotone counter of backward-style passes (joint backwards, per-sample tape
// backwards, Hessian-vector passes). Drives the cost-model assertions.
std::uint64_t backward_pass_count();
void reset_backward_pass_count();
void note_backward_pass();

// Checkpoint file: magic "IRSV1", u32 layer count, u32 dims[L+1],
// u8 bias flags[L], then per layer little-endian f64 weights (row-major)
// followed by the bias vector when present. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelSpec& spec,
                     const ModelParams& params);
ModelParams load_checkpoint(const std::string& path, ModelSpec& spec_out);

}  // namespace inrun
