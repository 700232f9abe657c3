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

#include "inrun/ghost.hpp"

#include <cmath>

namespace inrun {

namespace {

void check_trace(const ModelSpec& spec, const LayerTrace& trace) {
  if (!trace.has_backward) {
    throw ContractError("ghost: trace has no backward data");
  }
  if (trace.inputs.size() != spec.layer_count() ||
      trace.out_grads.size() != spec.layer_count()) {
    throw ContractError("ghost: trace layer count does not match spec");
  }
  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    if (trace.inputs[i].cols != spec.dims[i] || trace.out_grads[i].cols != spec.dims[i + 1] ||
        trace.inputs[i].rows != trace.n_samples * trace.seq_len) {
      throw ContractError("ghost: trace layer shapes inconsistent at layer " + std::to_string(i));
    }
  }
}

bool use_txt_branch(GhostBranch branch, std::size_t T, std::size_t d_in, std::size_t d_out) {
  switch (branch) {
    case GhostBranch::InnerTxT: return true;
    case GhostBranch::OuterProduct: return false;
    case GhostBranch::Auto: break;
  }
  return 2 * T * T < d_in * d_out;
}

// Dot between contiguous row blocks [i0,i0+len) of x and [j0,j0+len) of y.
double block_dot(const Matrix2D& x, std::size_t i0, const Matrix2D& y, std::size_t j0,
                 std::size_t len) {
  double s = 0.0;
  for (std::size_t r = 0; r < len; ++r) {
    const double* a = x.row_ptr(i0 + r);
    const double* b = y.row_ptr(j0 + r);
    for (std::size_t c = 0; c < x.cols; ++c) s += a[c] * b[c];
  }
  return s;
}

Matrix2D slice_rows(const Matrix2D& m, std::size_t row0, std::size_t count) {
  Matrix2D out(count, m.cols);
  for (std::size_t r = 0; r < count; ++r) {
    const double* src = m.row_ptr(row0 + r);
    std::copy(src, src + m.cols, out.row_ptr(r));
  }
  return out;
}

void act_derivs(Activation act, double y, double& d1, double& d2) {
  switch (act) {
    case Activation::Identity: d1 = 1.0; d2 = 0.0; return;
    case Activation::Relu: d1 = y > 0.0 ? 1.0 : 0.0; d2 = 0.0; return;
    case Activation::Tanh: {
      d1 = 1.0 - y * y;
      d2 = -2.0 * y * d1;
      return;
    }
  }
}

}  // namespace

PairwiseDots ghost_pairwise_dots(const ModelSpec& spec, const LayerTrace& trace,
                                 GhostBranch branch) {
  check_trace(spec, trace);
  const std::size_t n = trace.n_samples;
  const std::size_t T = trace.seq_len;

  PairwiseDots dots;
  dots.values = Matrix2D(n, n, 0.0);

  for (std::size_t layer = 0; layer < spec.layer_count(); ++layer) {
    const Matrix2D& x = trace.inputs[layer];     // (n*T) x d_in, rows are a^T
    const Matrix2D& b = trace.out_grads[layer];  // (n*T) x d_out
    const std::size_t d_in = x.cols;
    const std::size_t d_out = b.cols;

    if (use_txt_branch(branch, T, d_in, d_out)) {
      if (T == 1) {
        // Scalar factorization: (a_i . a_j) * (b_i . b_j).
        parallel_for(n, [&](std::size_t i0, std::size_t i1) {
          for (std::size_t i = i0; i < i1; ++i) {
            for (std::size_t j = i; j < n; ++j) {
              dots.values(i, j) += block_dot(x, i, x, j, 1) * block_dot(b, i, b, j, 1);
            }
          }
        });
      } else {
        // (b_i b_j^T) (.) (a_i^T a_j) over T x T blocks.
        parallel_for(n, [&](std::size_t i0, std::size_t i1) {
          for (std::size_t i = i0; i < i1; ++i) {
            for (std::size_t j = i; j < n; ++j) {
              double acc = 0.0;
              for (std::size_t t1 = 0; t1 < T; ++t1) {
                const double* xi = x.row_ptr(i * T + t1);
                const double* bi = b.row_ptr(i * T + t1);
                for (std::size_t t2 = 0; t2 < T; ++t2) {
                  const double* xj = x.row_ptr(j * T + t2);
                  const double* bj = b.row_ptr(j * T + t2);
                  double ax = 0.0;
                  for (std::size_t c = 0; c < d_in; ++c) ax += xi[c] * xj[c];
                  double bb = 0.0;
                  for (std::size_t c = 0; c < d_out; ++c) bb += bi[c] * bj[c];
                  acc += ax * bb;
                }
              }
              dots.values(i, j) += acc;
            }
          }
        });
      }
    } else {
      // Materialize the layer gradient block a (x) b per sample, then take
      // plain Frobenius dots between blocks.
      std::vector<Matrix2D> blocks(n);
      parallel_for(n, [&](std::size_t s0, std::size_t s1) {
        for (std::size_t s = s0; s < s1; ++s) {
          Matrix2D g(d_in, d_out, 0.0);
          add_at_b_rows(g, x, b, s * T, (s + 1) * T);
          blocks[s] = std::move(g);
        }
      });
      parallel_for(n, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
          for (std::size_t j = i; j < n; ++j) {
            dots.values(i, j) += frobenius_dot(blocks[i], blocks[j]);
          }
        }
      });
    }

    if (spec.has_bias[layer]) {
      // Bias gradients are position sums of b; their dots need no trick.
      Matrix2D bias_grads(n, d_out, 0.0);
      for (std::size_t s = 0; s < n; ++s) {
        double* row = bias_grads.row_ptr(s);
        for (std::size_t t = 0; t < T; ++t) {
          const double* src = b.row_ptr(s * T + t);
          for (std::size_t c = 0; c < d_out; ++c) row[c] += src[c];
        }
      }
      parallel_for(n, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
          for (std::size_t j = i; j < n; ++j) {
            dots.values(i, j) += block_dot(bias_grads, i, bias_grads, j, 1);
          }
        }
      });
    }
  }

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) dots.values(i, j) = dots.values(j, i);
  return dots;
}

double ghost_bilinear(const ModelSpec& spec, const LayerTrace& trace, std::size_t sample,
                      const ModelParams& v) {
  check_trace(spec, trace);
  v.check_shape(spec);
  if (sample >= trace.n_samples) {
    throw ContractError("ghost_bilinear: sample index out of range");
  }
  const std::size_t T = trace.seq_len;
  double total = 0.0;
  for (std::size_t layer = 0; layer < spec.layer_count(); ++layer) {
    const Matrix2D& x = trace.inputs[layer];
    const Matrix2D& b = trace.out_grads[layer];
    const Matrix2D& w = v.weights[layer];
    // sum_t a_t^T V b_t without forming a (x) b.
    for (std::size_t t = 0; t < T; ++t) {
      const double* xr = x.row_ptr(sample * T + t);
      const double* br = b.row_ptr(sample * T + t);
      for (std::size_t r = 0; r < w.rows; ++r) {
        const double xv = xr[r];
        if (xv == 0.0) continue;
        const double* wrow = w.row_ptr(r);
        double s = 0.0;
        for (std::size_t c = 0; c < w.cols; ++c) s += wrow[c] * br[c];
        total += xv * s;
      }
    }
    if (spec.has_bias[layer]) {
      const auto& vb = v.biases[layer];
      for (std::size_t t = 0; t < T; ++t) {
        const double* br = b.row_ptr(sample * T + t);
        for (std::size_t c = 0; c < vb.size(); ++c) total += vb[c] * br[c];
      }
    }
  }
  return total;
}

ModelParams hvp_from_trace(const ModelParams& params, const ModelSpec& spec,
                           const LayerTrace& trace, std::size_t sample,
                           const ModelParams& u) {
  check_trace(spec, trace);
  params.check_shape(spec);
  u.check_shape(spec);
  if (sample >= trace.n_samples) {
    throw ContractError("hvp: sample index out of range");
  }

  const std::size_t L = spec.layer_count();
  const std::size_t T = spec.seq_len;
  const std::size_t row0 = sample * T;

  // Plain per-sample quantities, sliced out of the joint trace.
  std::vector<Matrix2D> xs(L), bs(L);
  for (std::size_t i = 0; i < L; ++i) {
    xs[i] = slice_rows(trace.inputs[i], row0, T);
    bs[i] = slice_rows(trace.out_grads[i], row0, T);
  }
  const Matrix2D outs = slice_rows(trace.preacts[L - 1], row0, T);

  // Forward tangent: R{X} and R{S} layer by layer; R{X_0} = 0.
  std::vector<Matrix2D> r_inputs(L), r_preacts(L);
  Matrix2D rx(T, spec.input_dim(), 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    r_inputs[i] = rx;
    Matrix2D rs = matmul(rx, params.weights[i]);
    matmul_accumulate(rs, xs[i], u.weights[i]);
    if (spec.has_bias[i]) {
      for (std::size_t r = 0; r < rs.rows; ++r) {
        double* row = rs.row_ptr(r);
        for (std::size_t c = 0; c < rs.cols; ++c) row[c] += u.biases[i][c];
      }
    }
    r_preacts[i] = rs;
    if (i + 1 < L) {
      const Activation act = spec.hidden_acts[i];
      const Matrix2D& y = xs[i + 1];  // act(S_i)
      rx = std::move(rs);
      for (std::size_t k = 0; k < rx.data.size(); ++k) {
        double d1, d2;
        act_derivs(act, y.data[k], d1, d2);
        rx.data[k] *= d1;
      }
    }
  }

  // Tangent of the output gradient b_L.
  Matrix2D rb(T, spec.output_dim(), 0.0);
  if (spec.loss == Loss::Mse) {
    rb = r_preacts[L - 1];
  } else {
    // R{p - onehot} = diag(p) R{s} - p (p . R{s}) per position.
    const std::size_t dl = spec.output_dim();
    std::vector<double> p(dl);
    for (std::size_t t = 0; t < T; ++t) {
      const double* o = outs.row_ptr(t);
      double m = o[0];
      for (std::size_t k = 1; k < dl; ++k) m = std::max(m, o[k]);
      double z = 0.0;
      for (std::size_t k = 0; k < dl; ++k) {
        p[k] = std::exp(o[k] - m);
        z += p[k];
      }
      for (std::size_t k = 0; k < dl; ++k) p[k] /= z;
      const double* rs = r_preacts[L - 1].row_ptr(t);
      double pdotrs = 0.0;
      for (std::size_t k = 0; k < dl; ++k) pdotrs += p[k] * rs[k];
      double* out = rb.row_ptr(t);
      for (std::size_t k = 0; k < dl; ++k) out[k] = p[k] * (rs[k] - pdotrs);
    }
  }

  // Backward tangent: product rule through each W and activation.
  std::vector<Matrix2D> r_outgrads(L);
  r_outgrads[L - 1] = std::move(rb);
  for (std::size_t i = L - 1; i > 0; --i) {
    Matrix2D rdx = matmul_transposed_b(r_outgrads[i], params.weights[i]);
    {
      const Matrix2D extra = matmul_transposed_b(bs[i], u.weights[i]);
      for (std::size_t k = 0; k < rdx.data.size(); ++k) rdx.data[k] += extra.data[k];
    }
    const Activation act = spec.hidden_acts[i - 1];
    const Matrix2D& y = xs[i];              // act(S_{i-1})
    const Matrix2D& rs = r_preacts[i - 1];  // R{S_{i-1}}
    const Matrix2D dx = matmul_transposed_b(bs[i], params.weights[i]);
    Matrix2D rbprev(rdx.rows, rdx.cols, 0.0);
    for (std::size_t k = 0; k < rdx.data.size(); ++k) {
      double d1, d2;
      act_derivs(act, y.data[k], d1, d2);
      rbprev.data[k] = rdx.data[k] * d1 + dx.data[k] * d2 * rs.data[k];
    }
    r_outgrads[i - 1] = std::move(rbprev);
  }

  // R{grad_i} = R{X_i}^T B_i + X_i^T R{B_i}; bias tangents are position sums.
  ModelParams v = ModelParams::zeros_like(spec);
  for (std::size_t i = 0; i < L; ++i) {
    add_at_b_rows(v.weights[i], r_inputs[i], bs[i], 0, T);
    add_at_b_rows(v.weights[i], xs[i], r_outgrads[i], 0, T);
    if (spec.has_bias[i]) {
      for (std::size_t t = 0; t < T; ++t) {
        const double* row = r_outgrads[i].row_ptr(t);
        for (std::size_t c = 0; c < v.biases[i].size(); ++c) v.biases[i][c] += row[c];
      }
    }
    if (!all_finite(v.weights[i])) {
      throw NumericError("hvp: non-finite result at layer " + std::to_string(i));
    }
  }
  note_backward_pass();
  return v;
}

ModelParams hvp(const ModelParams& params, const ModelSpec& spec, const Example& ex,
                const ModelParams& u) {
  LayerTrace trace = forward(params, spec, std::span<const Example>(&ex, 1));
  backward_joint(params, spec, trace);
  return hvp_from_trace(params, spec, trace, 0, u);
}

std::vector<double> ghost_ghg(const ModelSpec& spec, const LayerTrace& trace,
                              const ModelParams& params, std::size_t val_index,
                              std::span<const std::size_t> batch_indices) {
  check_trace(spec, trace);
  const ModelParams grad_sum = grad_from_trace(spec, trace, batch_indices);
  const ModelParams hv = hvp_from_trace(params, spec, trace, val_index, grad_sum);
  std::vector<double> out(batch_indices.size());
  for (std::size_t k = 0; k < batch_indices.size(); ++k) {
    out[k] = ghost_bilinear(spec, trace, batch_indices[k], hv);
  }
  return out;
}

}  // namespace inrun
