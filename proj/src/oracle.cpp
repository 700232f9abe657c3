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

#include "inrun/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>

namespace inrun {

namespace {

std::vector<std::size_t> mask_to_subset(std::uint32_t mask) {
  std::vector<std::size_t> subset;
  for (std::size_t i = 0; mask != 0; ++i, mask >>= 1) {
    if (mask & 1u) subset.push_back(i);
  }
  return subset;
}

}  // namespace

std::vector<double> exact_shapley(const UtilityFn& utility, std::size_t n) {
  if (n == 0) return {};
  if (n > 12) {
    throw ContractError("exact_shapley: enumeration capped at 12 players, got " +
                        std::to_string(n));
  }
  if (!utility.fn) throw ContractError("exact_shapley: empty utility");

  const std::uint32_t full = (1u << n) - 1u;
  std::vector<double> u(full + 1u);
  for (std::uint32_t mask = 0; mask <= full; ++mask) {
    u[mask] = utility(mask_to_subset(mask));
  }

  // weight_by_size[k] = 1 / (n * C(n-1, k)) for |S| = k.
  std::vector<double> weight_by_size(n);
  {
    double binom = 1.0;  // C(n-1, 0)
    for (std::size_t k = 0; k < n; ++k) {
      weight_by_size[k] = 1.0 / (static_cast<double>(n) * binom);
      binom = binom * static_cast<double>(n - 1 - k) / static_cast<double>(k + 1);
    }
  }

  std::vector<double> phi(n, 0.0);
  for (std::size_t z = 0; z < n; ++z) {
    const std::uint32_t zbit = 1u << z;
    double acc = 0.0;
    for (std::uint32_t mask = 0; mask <= full; ++mask) {
      if (mask & zbit) continue;
      acc += weight_by_size[static_cast<std::size_t>(std::popcount(mask))] *
             (u[mask | zbit] - u[mask]);
    }
    phi[z] = acc;
  }
  return phi;
}

double true_local_utility(const ModelParams& params, const ModelSpec& spec,
                          std::span<const Example> batch,
                          std::span<const std::size_t> subset, double eta,
                          const Example& val) {
  for (std::size_t s : subset) {
    if (s >= batch.size()) throw ContractError("true_local_utility: subset index out of range");
  }
  const double before = loss_of(params, spec, val);
  if (subset.empty()) return 0.0;
  LayerTrace trace = forward(params, spec, batch);
  backward_joint(params, spec, trace);
  const ModelParams g = grad_from_trace(spec, trace, subset);
  ModelParams updated = params;
  updated.add_scaled(g, -eta);
  return loss_of(updated, spec, val) - before;
}

std::vector<TaylorErrorRow> taylor_error_report(const ModelParams& params,
                                                const ModelSpec& spec,
                                                std::span<const Example> batch,
                                                std::span<const double> etas,
                                                const Example& val, std::size_t n_subsets,
                                                double trim, std::uint64_t seed) {
  if (batch.empty() || batch.size() > 20) {
    throw ContractError("taylor_error_report: batch size must be in [1, 20]");
  }
  if (trim < 0.0 || trim >= 1.0) throw ContractError("taylor_error_report: bad trim fraction");

  const std::size_t B = batch.size();

  // eta-independent ingredients: pairwise dots and the pairwise
  // grad-Hessian-grad table at the validation point.
  std::vector<Example> joint(batch.begin(), batch.end());
  joint.push_back(val);
  LayerTrace trace = forward(params, spec, joint);
  backward_joint(params, spec, trace);
  const PairwiseDots dots = ghost_pairwise_dots(spec, trace);

  Matrix2D pair_ghg(B, B, 0.0);
  for (std::size_t j = 0; j < B; ++j) {
    const std::size_t idx[1] = {j};
    const ModelParams gj = grad_from_trace(spec, trace, idx);
    const ModelParams hv = hvp_from_trace(params, spec, trace, B, gj);
    for (std::size_t i = 0; i < B; ++i) {
      pair_ghg(i, j) = ghost_bilinear(spec, trace, i, hv);
    }
  }

  SeededRng rng(seed);
  std::vector<std::uint32_t> masks(n_subsets);
  const std::uint32_t full = (1u << B) - 1u;
  for (auto& m : masks) m = static_cast<std::uint32_t>(rng.next_below(full)) + 1u;

  std::vector<TaylorErrorRow> rows;
  for (double eta : etas) {
    std::vector<double> rel1, rel2;
    for (std::uint32_t mask : masks) {
      const std::vector<std::size_t> subset = mask_to_subset(mask);
      const double u_true = true_local_utility(params, spec, batch, subset, eta, val);
      if (std::fabs(u_true) < 1e-12) continue;  // would inflate the relative error
      double dot_sum = 0.0;
      double ghg_sum = 0.0;
      for (std::size_t i : subset) {
        dot_sum += dots.at(i, B);
        for (std::size_t j : subset) ghg_sum += pair_ghg(i, j);
      }
      const double u1 = -eta * dot_sum;
      const double u2 = eta * eta * ghg_sum;
      rel1.push_back(std::fabs(u_true - u1) / std::fabs(u_true));
      rel2.push_back(std::fabs(u_true - (u1 + 0.5 * u2)) / std::fabs(u_true));
    }
    for (int order = 1; order <= 2; ++order) {
      std::vector<double>& errs = order == 1 ? rel1 : rel2;
      TaylorErrorRow row;
      row.eta = eta;
      row.order = order;
      std::sort(errs.begin(), errs.end());
      const std::size_t cut = static_cast<std::size_t>(
          std::floor(0.5 * trim * static_cast<double>(errs.size())));
      if (errs.size() > 2 * cut) {
        double s = 0.0;
        for (std::size_t i = cut; i < errs.size() - cut; ++i) s += errs[i];
        row.n_subsets_used = errs.size() - 2 * cut;
        row.trimmed_mean_rel_err = s / static_cast<double>(row.n_subsets_used);
      } else {
        row.n_subsets_used = 0;  // every subset had |U| ~ 0; flagged, not divided
        row.trimmed_mean_rel_err = std::numeric_limits<double>::quiet_NaN();
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<double> retraining_shapley_tiny(std::span<const Example> dataset,
                                            const ModelSpec& spec,
                                            const RetrainConfig& config, const Example& val) {
  const std::size_t n = dataset.size();
  if (n == 0 || n > 10) {
    throw ContractError("retraining_shapley_tiny: dataset size must be in [1, 10]");
  }

  SeededRng init_rng(config.init_seed);
  const ModelParams w0 = init_params(spec, init_rng);
  const double base_loss = loss_of(w0, spec, val);

  // Utility of a subset: validation-loss reduction after deterministic
  // full-batch GD from the fixed init.
  UtilityFn u;
  u.kind = UtilityFn::Kind::Retraining;
  u.fn = [&](const std::vector<std::size_t>& subset) -> double {
    if (subset.empty()) return 0.0;
    std::vector<Example> train;
    train.reserve(subset.size());
    for (std::size_t i : subset) train.push_back(dataset[i]);
    std::vector<std::size_t> all(train.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    ModelParams w = w0;
    for (std::size_t it = 0; it < config.gd_iters; ++it) {
      LayerTrace trace = forward(w, spec, train);
      backward_joint(w, spec, trace);
      const ModelParams g = grad_from_trace(spec, trace, all);
      w.add_scaled(g, -config.lr);
    }
    return base_loss - loss_of(w, spec, val);
  };
  return exact_shapley(u, n);
}

std::string taylor_error_csv(std::span<const TaylorErrorRow> rows) {
  std::string out = "eta,order,trimmed_mean_rel_err,n_subsets_used\n";
  char buf[96];
  for (const TaylorErrorRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%d,%.17g,%zu\n", r.eta, r.order,
                  r.trimmed_mean_rel_err, r.n_subsets_used);
    out += buf;
  }
  return out;
}

}  // namespace inrun
