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

#include <span>
#include <vector>

#include "inrun/model.hpp"

namespace inrun {

// Pairwise gradient dot products over all samples of one trace, summed over
// layers (weights and biases). Entry (i, j) = grad_i . grad_j. When the trace
// was built over batch + validation samples, the validation rows sit at the
// end; for a single target that makes this the (batch+1)-sized matrix with
// the validation point last.
struct PairwiseDots {
  Matrix2D values;

  double at(std::size_t i, std::size_t j) const { return values(i, j); }
  std::size_t size() const { return values.rows; }
};

// Per-layer evaluation strategy. Auto picks the T x T inner-product route
// when 2*T^2 < d_in * d_out and the materialized-block route otherwise; the
// forced values exist so tests can compare both branches.
enum class GhostBranch { Auto, InnerTxT, OuterProduct };

// All pairwise gradient dot products from one backward trace. No per-sample
// model-sized gradient is formed; the outer-product branch materializes
// single layer blocks only.
PairwiseDots ghost_pairwise_dots(const ModelSpec& spec, const LayerTrace& trace,
                                 GhostBranch branch = GhostBranch::Auto);

// grad_sample . V for a parameter-shaped V, evaluated from the trace as
// position-summed bilinear forms a^T V b without forming grad_sample.
double ghost_bilinear(const ModelSpec& spec, const LayerTrace& trace,
                      std::size_t sample, const ModelParams& v);

// Exact Hessian-vector product v = H u of one trace sample's loss, reusing
// the plain forward/backward data already recorded in the trace. Only the
// tangent sweep runs here, so this counts as one backward pass. Exact for
// identity/tanh; for ReLU it is the Hessian of the active linearization.
ModelParams hvp_from_trace(const ModelParams& params, const ModelSpec& spec,
                           const LayerTrace& trace, std::size_t sample,
                           const ModelParams& u);

// Standalone form: runs its own forward/backward on ex, then the tangent
// sweep (two backward passes in total).
ModelParams hvp(const ModelParams& params, const ModelSpec& spec, const Example& ex,
                const ModelParams& u);

// Per-sample g_i^T H^(val) (sum_j g_j) for every batch sample of the trace.
// batch_indices selects the update subset; the Hessian is taken at the trace
// sample val_index. Materializes exactly one model-sized vector, the
// Hessian-vector product of the summed gradient.
std::vector<double> ghost_ghg(const ModelSpec& spec, const LayerTrace& trace,
                              const ModelParams& params, std::size_t val_index,
                              std::span<const std::size_t> batch_indices);

}  // namespace inrun
