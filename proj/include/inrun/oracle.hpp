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

#include <functional>
#include <span>
#include <vector>

#include "inrun/shapley.hpp"

namespace inrun {

// A utility over subsets of a fixed player set. Subsets arrive as ascending
// index lists; the function must be deterministic and defined on all of them.
struct UtilityFn {
  enum class Kind { TrueLocal, FirstOrder, SecondOrder, Retraining, Custom };
  Kind kind = Kind::Custom;
  std::function<double(const std::vector<std::size_t>&)> fn;

  double operator()(const std::vector<std::size_t>& subset) const { return fn(subset); }
};

// Exact Shapley values by full 2^n enumeration (n <= 12). Utilities are
// memoized per subset mask, so each subset is evaluated once.
std::vector<double> exact_shapley(const UtilityFn& utility, std::size_t n);

// The local utility evaluated for real: apply the counterfactual update
// w - eta * sum_{i in subset} g_i and measure the validation loss change.
// subset holds positions within batch.
double true_local_utility(const ModelParams& params, const ModelSpec& spec,
                          std::span<const Example> batch,
                          std::span<const std::size_t> subset, double eta,
                          const Example& val);

struct TaylorErrorRow {
  double eta = 0.0;
  int order = 1;
  double trimmed_mean_rel_err = 0.0;
  std::size_t n_subsets_used = 0;
};

// Relative Taylor-approximation error of the local utility over random
// non-empty batch subsets, per learning rate and order. Subsets whose true
// utility is below 1e-12 in magnitude are excluded before the two-sided trim
// (trim/2 dropped at each tail).
std::vector<TaylorErrorRow> taylor_error_report(const ModelParams& params,
                                                const ModelSpec& spec,
                                                std::span<const Example> batch,
                                                std::span<const double> etas,
                                                const Example& val,
                                                std::size_t n_subsets = 20,
                                                double trim = 0.2,
                                                std::uint64_t seed = 0);

// Deterministic learning algorithm for the retraining oracle: fixed init,
// full-batch gradient descent with a constant step.
struct RetrainConfig {
  std::uint64_t init_seed = 0;
  std::size_t gd_iters = 20;
  double lr = 0.1;
};

// Classic retraining-based Shapley on a tiny dataset (n <= 10): utility of a
// subset is the validation-loss reduction achieved by training from scratch
// on it. 2^n full trainings.
std::vector<double> retraining_shapley_tiny(std::span<const Example> dataset,
                                            const ModelSpec& spec,
                                            const RetrainConfig& config,
                                            const Example& val);

// CSV for the Taylor error table: eta,order,trimmed_mean_rel_err,n_subsets_used.
std::string taylor_error_csv(std::span<const TaylorErrorRow> rows);

}  // namespace inrun
