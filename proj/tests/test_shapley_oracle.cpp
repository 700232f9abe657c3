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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "inrun/oracle.hpp"
#include "reference_net.hpp"

using namespace inrun;

namespace {

// Permutation-averaging definition of the Shapley value; the oracle's oracle.
std::vector<double> permutation_shapley(const UtilityFn& utility, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> phi(n, 0.0);
  std::size_t count = 0;
  do {
    std::vector<std::size_t> prefix;
    double before = utility({});
    for (std::size_t z : perm) {
      prefix.push_back(z);
      std::vector<std::size_t> sorted = prefix;
      std::sort(sorted.begin(), sorted.end());
      const double after = utility(sorted);
      phi[z] += after - before;
      before = after;
    }
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (double& v : phi) v /= static_cast<double>(count);
  return phi;
}

PairwiseDots fake_dots(const std::vector<double>& val_row, std::size_t b) {
  PairwiseDots dots;
  dots.values = Matrix2D(b + 1, b + 1, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    dots.values(i, b) = val_row[i];
    dots.values(b, i) = val_row[i];
  }
  return dots;
}

IterationRecord record_for(std::size_t b, double eta) {
  IterationRecord rec;
  rec.eta = eta;
  for (std::size_t i = 0; i < b; ++i) rec.batch_ids.push_back(static_cast<std::int64_t>(i));
  return rec;
}

ModelSpec quad_spec(std::size_t din, std::size_t dout) {
  ModelSpec spec;
  spec.dims = {din, dout};
  spec.loss = Loss::Mse;
  spec.seq_len = 1;
  spec.has_bias = {false};
  return spec;
}

Example quad_example(SeededRng& rng, const ModelSpec& spec, std::int64_t id) {
  Example ex;
  ex.id = id;
  ex.features.resize(spec.input_dim());
  for (double& v : ex.features) v = rng.next_gaussian();
  ex.regression_target.resize(spec.output_dim());
  for (double& v : ex.regression_target) v = rng.next_gaussian();
  return ex;
}

}  // namespace

TEST_CASE("first_order_step: orthogonal gradients contribute zero") {
  const PairwiseDots dots = fake_dots({0.0, 0.0, 0.0}, 3);
  const auto phi = first_order_step(dots, 3, record_for(3, 0.1));
  for (double v : phi) CHECK(v == 0.0);
}

TEST_CASE("first_order_step: eta 0.1 with dot 2.0 gives -0.2") {
  const PairwiseDots dots = fake_dots({2.0}, 1);
  const auto phi = first_order_step(dots, 1, record_for(1, 0.1));
  CHECK(phi[0] == doctest::Approx(-0.2));
}

TEST_CASE("second_order_step: zero Hessian term reduces to first order") {
  const PairwiseDots dots = fake_dots({1.0, -2.0}, 2);
  const std::vector<double> ghg = {0.0, 0.0};
  const auto rec = record_for(2, 0.05);
  const auto phi1 = first_order_step(dots, 2, rec);
  const auto phi2 = second_order_step(dots, ghg, 2, rec);
  CHECK(phi1 == phi2);
}

TEST_CASE("closed forms equal exact Shapley built from reference gradients") {
  // Quadratic instances so U_(2) needs no truncation: the reference utility
  // uses materialized gradients and an explicit reference Hessian.
  SeededRng rng(50);
  for (std::size_t b = 2; b <= 6; ++b) {
    const ModelSpec spec = quad_spec(3, 2);
    SeededRng prng(900 + b);
    const ModelParams params = init_params(spec, prng);
    std::vector<Example> all;
    for (std::size_t i = 0; i <= b; ++i) all.push_back(quad_example(rng, spec, (std::int64_t)i));
    LayerTrace trace = forward(params, spec, all);
    backward_joint(params, spec, trace);
    const PairwiseDots dots = ghost_pairwise_dots(spec, trace);
    std::vector<std::size_t> batch_idx(b);
    for (std::size_t i = 0; i < b; ++i) batch_idx[i] = i;
    const std::vector<double> ghg = ghost_ghg(spec, trace, params, b, batch_idx);

    const auto rec = record_for(b, 0.07);
    const auto phi1 = first_order_step(dots, b, rec);
    const auto phi2 = second_order_step(dots, ghg, b, rec);

    // Reference ingredients.
    const std::vector<double> w = params.to_flat();
    std::vector<std::vector<double>> grads;
    for (std::size_t i = 0; i < b; ++i) grads.push_back(refnet::grad_one(spec, w, all[i]));
    const std::vector<double> gval = refnet::grad_one(spec, w, all[b]);
    const auto h = refnet::explicit_hessian(spec, w, all[b]);

    const double eta = rec.eta;
    UtilityFn u1{UtilityFn::Kind::FirstOrder, [&](const std::vector<std::size_t>& s) {
      double acc = 0.0;
      for (std::size_t i : s)
        for (std::size_t k = 0; k < gval.size(); ++k) acc += gval[k] * grads[i][k];
      return -eta * acc;
    }};
    UtilityFn u12{UtilityFn::Kind::SecondOrder, [&](const std::vector<std::size_t>& s) {
      double acc = 0.0;
      std::vector<double> gsum(gval.size(), 0.0);
      for (std::size_t i : s) {
        for (std::size_t k = 0; k < gval.size(); ++k) {
          acc += gval[k] * grads[i][k];
          gsum[k] += grads[i][k];
        }
      }
      double quad = 0.0;
      for (std::size_t r = 0; r < gsum.size(); ++r) {
        double hr = 0.0;
        for (std::size_t c = 0; c < gsum.size(); ++c) hr += h[c][r] * gsum[c];
        quad += gsum[r] * hr;
      }
      return -eta * acc + 0.5 * eta * eta * quad;
    }};

    const auto want1 = exact_shapley(u1, b);
    const auto want12 = exact_shapley(u12, b);
    for (std::size_t i = 0; i < b; ++i) {
      CHECK(std::fabs(phi1[i] - want1[i]) <= 1e-10 * std::max(1.0, std::fabs(want1[i])));
      CHECK(std::fabs(phi2[i] - want12[i]) <= 1e-9 * std::max(1.0, std::fabs(want12[i])));
    }
  }
}

TEST_CASE("ValueLedger: zero contributions leave it unchanged") {
  const std::int64_t ids[] = {0, 1, 2};
  ValueLedger ledger(ids);
  auto rec = record_for(3, 0.1);
  const std::vector<double> zeros(3, 0.0);
  ledger.accumulate(rec, zeros, {});
  CHECK(ledger.at(0).first == 0.0);
  CHECK(ledger.at(0).times_sampled == 1);
  CHECK(ledger.total_first() == 0.0);
}

TEST_CASE("ValueLedger: additive across iterations, reduction-oriented sign") {
  const std::int64_t ids[] = {0, 1};
  ValueLedger ledger(ids);
  auto rec = record_for(2, 0.1);
  const std::vector<double> c1 = {-0.5, 0.25};  // loss-change orientation
  const std::vector<double> c2 = {-0.1, 0.05};
  ledger.accumulate(rec, c1, c1);
  ledger.accumulate(rec, c2, c2);
  // Stored values flip the orientation: a negative loss-change contribution
  // (the example lowered the loss) shows up positive.
  CHECK(ledger.at(0).first == doctest::Approx(0.6));
  CHECK(ledger.at(1).first == doctest::Approx(-0.3));
  CHECK(ledger.at(0).second == doctest::Approx(0.6));
  CHECK(ledger.at(0).times_sampled == 2);
}

TEST_CASE("ValueLedger: unknown id is rejected") {
  const std::int64_t ids[] = {0};
  ValueLedger ledger(ids);
  IterationRecord rec;
  rec.eta = 0.1;
  rec.batch_ids = {5};
  const std::vector<double> c = {1.0};
  CHECK_THROWS_AS(ledger.accumulate(rec, c, {}), ContractError);
}

TEST_CASE("exact_shapley: additive utility returns the per-player terms") {
  SeededRng rng(51);
  std::vector<double> c(7);
  for (double& v : c) v = rng.next_gaussian();
  UtilityFn u{UtilityFn::Kind::Custom, [&](const std::vector<std::size_t>& s) {
    double acc = 0.0;
    for (std::size_t i : s) acc += c[i];
    return acc;
  }};
  const auto phi = exact_shapley(u, 7);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(std::fabs(phi[i] - c[i]) <= 1e-12 * std::max(1.0, std::fabs(c[i])));
  }
}

TEST_CASE("exact_shapley: |S|^2 with three players gives 3 each") {
  UtilityFn u{UtilityFn::Kind::Custom, [](const std::vector<std::size_t>& s) {
    return static_cast<double>(s.size() * s.size());
  }};
  const auto phi = exact_shapley(u, 3);
  for (double v : phi) CHECK(v == doctest::Approx(3.0));
}

TEST_CASE("exact_shapley: matches the permutation definition on a random game") {
  SeededRng rng(52);
  // Random submodular-ish coverage game over 6 players.
  std::vector<double> weight(12);
  for (double& v : weight) v = std::fabs(rng.next_gaussian());
  std::vector<std::uint32_t> covers(6);
  for (auto& c : covers) c = static_cast<std::uint32_t>(rng.next_u64() & 0xFFFu);
  UtilityFn u{UtilityFn::Kind::Custom, [&](const std::vector<std::size_t>& s) {
    std::uint32_t mask = 0;
    for (std::size_t i : s) mask |= covers[i];
    double acc = 0.0;
    for (std::size_t k = 0; k < weight.size(); ++k) {
      if (mask & (1u << k)) acc += weight[k];
    }
    return acc;
  }};
  const auto fast = exact_shapley(u, 6);
  const auto slow = permutation_shapley(u, 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(std::fabs(fast[i] - slow[i]) <= 1e-12 * std::max(1.0, std::fabs(slow[i])));
  }
}

TEST_CASE("exact_shapley: axioms hold on a random utility") {
  SeededRng rng(53);
  // Utility over 5 real players; player 5 is a null dummy.
  std::vector<double> table(1u << 5);
  for (double& v : table) v = rng.next_gaussian();
  table[0] = 0.0;
  UtilityFn u{UtilityFn::Kind::Custom, [&](const std::vector<std::size_t>& s) {
    std::uint32_t mask = 0;
    for (std::size_t i : s) {
      if (i < 5) mask |= 1u << i;  // player 5 never matters
    }
    return table[mask];
  }};
  const auto phi = exact_shapley(u, 6);

  // Null player.
  CHECK(phi[5] == doctest::Approx(0.0));
  // Efficiency.
  double total = 0.0;
  for (double v : phi) total += v;
  CHECK(std::fabs(total - table[31]) <= 1e-12 * std::max(1.0, std::fabs(table[31])));

  // Linearity: phi(U1 + 2 U2) = phi(U1) + 2 phi(U2).
  std::vector<double> table2(1u << 5);
  for (double& v : table2) v = rng.next_gaussian();
  table2[0] = 0.0;
  UtilityFn u2{UtilityFn::Kind::Custom, [&](const std::vector<std::size_t>& s) {
    std::uint32_t mask = 0;
    for (std::size_t i : s) {
      if (i < 5) mask |= 1u << i;
    }
    return table2[mask];
  }};
  UtilityFn combo{UtilityFn::Kind::Custom, [&](const std::vector<std::size_t>& s) {
    return u.fn(s) + 2.0 * u2.fn(s);
  }};
  const auto phi2 = exact_shapley(u2, 6);
  const auto phi_combo = exact_shapley(combo, 6);
  for (std::size_t i = 0; i < 6; ++i) {
    const double want = phi[i] + 2.0 * phi2[i];
    CHECK(std::fabs(phi_combo[i] - want) <= 1e-12 * std::max(1.0, std::fabs(want)));
  }
}

TEST_CASE("exact_shapley: symmetry for interchangeable players") {
  UtilityFn u{UtilityFn::Kind::Custom, [](const std::vector<std::size_t>& s) {
    // Players 0 and 1 enter only through whether either is present.
    bool any01 = false;
    double rest = 0.0;
    for (std::size_t i : s) {
      if (i <= 1) any01 = true;
      else rest += static_cast<double>(i);
    }
    return rest + (any01 ? 10.0 : 0.0);
  }};
  const auto phi = exact_shapley(u, 4);
  CHECK(phi[0] == doctest::Approx(phi[1]));
}

TEST_CASE("exact_shapley: enumeration cap") {
  UtilityFn u{UtilityFn::Kind::Custom,
              [](const std::vector<std::size_t>& s) { return (double)s.size(); }};
  CHECK_THROWS_AS(exact_shapley(u, 13), ContractError);
}

TEST_CASE("true_local_utility: empty subset changes nothing") {
  SeededRng rng(54);
  const ModelSpec spec = quad_spec(3, 1);
  SeededRng prng(55);
  const ModelParams params = init_params(spec, prng);
  std::vector<Example> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(quad_example(rng, spec, i));
  const Example val = quad_example(rng, spec, 99);
  CHECK(true_local_utility(params, spec, batch, {}, 0.1, val) == 0.0);
}

TEST_CASE("true_local_utility: quadratic loss equals U1 + half U2 exactly") {
  SeededRng rng(56);
  const ModelSpec spec = quad_spec(3, 2);
  SeededRng prng(57);
  const ModelParams params = init_params(spec, prng);
  std::vector<Example> all;
  for (int i = 0; i < 5; ++i) all.push_back(quad_example(rng, spec, i));
  const Example val = all[4];
  LayerTrace trace = forward(params, spec, all);
  backward_joint(params, spec, trace);
  const PairwiseDots dots = ghost_pairwise_dots(spec, trace);

  const double eta = 0.02;
  const std::vector<std::size_t> subset = {0, 2, 3};
  const double u_true = true_local_utility(params, spec,
                                           std::span<const Example>(all.data(), 4), subset,
                                           eta, val);
  double dot_sum = 0.0;
  for (std::size_t i : subset) dot_sum += dots.at(i, 4);
  const ModelParams gsub = grad_from_trace(spec, trace, subset);
  const ModelParams hv = hvp_from_trace(params, spec, trace, 4, gsub);
  const double quad = gsub.dot_with(hv);
  const double approx = -eta * dot_sum + 0.5 * eta * eta * quad;
  CHECK(std::fabs(u_true - approx) <= 1e-12 * std::max(1.0, std::fabs(u_true)));
}

TEST_CASE("true_local_utility: matches a duplicate-path reimplementation") {
  SeededRng rng(58);
  ModelSpec spec;
  spec.dims = {3, 4, 2};
  spec.hidden_acts = {Activation::Tanh};
  spec.loss = Loss::Mse;
  spec.seq_len = 1;
  spec.has_bias = {true, true};
  SeededRng prng(59);
  const ModelParams params = init_params(spec, prng);
  std::vector<Example> batch;
  for (int i = 0; i < 6; ++i) {
    Example ex;
    ex.id = i;
    ex.features = {rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()};
    ex.regression_target = {rng.next_gaussian(), rng.next_gaussian()};
    batch.push_back(ex);
  }
  const Example val = batch[5];
  const double eta = 1e-3;
  const std::vector<double> w = params.to_flat();

  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::size_t> subset;
    for (std::size_t i = 0; i < 5; ++i) {
      if (rng.next_below(2) == 0) subset.push_back(i);
    }
    const double got = true_local_utility(params, spec,
                                          std::span<const Example>(batch.data(), 5), subset,
                                          eta, val);
    // Reference path: per-sample reference gradients, explicit update.
    std::vector<double> wupd = w;
    for (std::size_t i : subset) {
      const std::vector<double> g = refnet::grad_one(spec, w, batch[i]);
      for (std::size_t k = 0; k < wupd.size(); ++k) wupd[k] -= eta * g[k];
    }
    const double want = refnet::loss_one(spec, wupd, val) - refnet::loss_one(spec, w, val);
    CHECK(std::fabs(got - want) <= 1e-12 * std::max(1.0, std::fabs(want)));
  }
}

TEST_CASE("taylor_error_report: exact on quadratic losses, flags U ~ 0") {
  SeededRng rng(60);
  const ModelSpec spec = quad_spec(3, 2);
  SeededRng prng(61);
  const ModelParams params = init_params(spec, prng);
  std::vector<Example> batch;
  for (int i = 0; i < 5; ++i) batch.push_back(quad_example(rng, spec, i));
  const Example val = quad_example(rng, spec, 99);
  const double etas[] = {1e-2};
  const auto rows = taylor_error_report(params, spec, batch, etas, val, 20, 0.2, 7);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].order == 2);
  CHECK(rows[1].n_subsets_used > 0);
  CHECK(rows[1].trimmed_mean_rel_err <= 1e-10);

  // A constant validation loss makes every subset utility ~ 0: flagged.
  Example flat_val;
  flat_val.id = 100;
  flat_val.features = {0.0, 0.0, 0.0};
  flat_val.regression_target = {0.0, 0.0};
  ModelSpec nobias = spec;
  nobias.has_bias = {false};
  SeededRng prng2(62);
  const ModelParams params2 = init_params(nobias, prng2);
  const auto rows2 = taylor_error_report(params2, nobias, batch, etas, flat_val, 10, 0.2, 7);
  CHECK(rows2[0].n_subsets_used == 0);
  CHECK(std::isnan(rows2[0].trimmed_mean_rel_err));
}

TEST_CASE("retraining_shapley_tiny: singleton value and caps") {
  SeededRng rng(63);
  const ModelSpec spec = quad_spec(2, 1);
  std::vector<Example> data = {quad_example(rng, spec, 0)};
  const Example val = quad_example(rng, spec, 9);
  RetrainConfig rc;
  rc.init_seed = 3;
  rc.gd_iters = 10;
  rc.lr = 0.05;
  const auto phi = retraining_shapley_tiny(data, spec, rc, val);
  REQUIRE(phi.size() == 1);

  std::vector<Example> big(11, data[0]);
  for (std::size_t i = 0; i < big.size(); ++i) big[i].id = (std::int64_t)i;
  CHECK_THROWS_AS(retraining_shapley_tiny(big, spec, rc, val), ContractError);
}

TEST_CASE("retraining_shapley_tiny: linear regression matches the permutation oracle") {
  SeededRng rng(64);
  const ModelSpec spec = quad_spec(2, 1);
  std::vector<Example> data;
  for (int i = 0; i < 6; ++i) data.push_back(quad_example(rng, spec, i));
  const Example val = quad_example(rng, spec, 9);
  RetrainConfig rc;
  rc.init_seed = 5;
  rc.gd_iters = 15;
  rc.lr = 0.04;
  const auto got = retraining_shapley_tiny(data, spec, rc, val);

  // Same utility, evaluated through the permutation definition.
  SeededRng init_rng(rc.init_seed);
  const ModelParams w0 = init_params(spec, init_rng);
  const double base = refnet::loss_one(spec, w0.to_flat(), val);
  UtilityFn u{UtilityFn::Kind::Retraining, [&](const std::vector<std::size_t>& s) -> double {
    if (s.empty()) return 0.0;
    std::vector<double> w = w0.to_flat();
    for (std::size_t it = 0; it < rc.gd_iters; ++it) {
      std::vector<double> g(w.size(), 0.0);
      for (std::size_t i : s) {
        const std::vector<double> gi = refnet::grad_one(spec, w, data[i]);
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += gi[k];
      }
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= rc.lr * g[k];
    }
    return base - refnet::loss_one(spec, w, val);
  }};
  const auto want = permutation_shapley(u, 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(std::fabs(got[i] - want[i]) <= 1e-10 * std::max(1.0, std::fabs(want[i])));
  }
}

TEST_CASE("second order: k extra duplicates shift the value by k/2 eta^2 gHg") {
  SeededRng rng(70);
  ModelSpec spec;
  spec.dims = {3, 4, 2};
  spec.hidden_acts = {Activation::Tanh};
  spec.loss = Loss::Mse;
  spec.seq_len = 1;
  spec.has_bias = {true, true};
  SeededRng prng(71);
  const ModelParams params = init_params(spec, prng);

  Example z;
  z.id = 0;
  z.features = {0.4, -0.9, 1.3};
  z.regression_target = {0.2, -0.5};
  std::vector<Example> others;
  for (int i = 1; i <= 3; ++i) {
    Example ex;
    ex.id = i;
    ex.features = {rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()};
    ex.regression_target = {rng.next_gaussian(), rng.next_gaussian()};
    others.push_back(ex);
  }
  Example val;
  val.id = 99;
  val.features = {rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()};
  val.regression_target = {rng.next_gaussian(), rng.next_gaussian()};

  const double eta = 0.05;
  auto run_batch = [&](std::size_t copies, double* phi1_z, double* phi2_z, double* self_ghg) {
    std::vector<Example> batch;
    batch.push_back(z);
    for (std::size_t c = 1; c <= copies; ++c) {
      Example dup = z;
      dup.id = static_cast<std::int64_t>(100 + c);
      batch.push_back(dup);
    }
    for (const Example& ex : others) batch.push_back(ex);
    batch.push_back(val);
    const std::size_t b = batch.size() - 1;
    LayerTrace trace = forward(params, spec, batch);
    backward_joint(params, spec, trace);
    const PairwiseDots dots = ghost_pairwise_dots(spec, trace);
    std::vector<std::size_t> idx(b);
    for (std::size_t i = 0; i < b; ++i) idx[i] = i;
    const std::vector<double> ghg = ghost_ghg(spec, trace, params, b, idx);
    IterationRecord rec;
    rec.eta = eta;
    for (std::size_t i = 0; i < b; ++i) rec.batch_ids.push_back((std::int64_t)i);
    *phi1_z = first_order_step(dots, b, rec)[0];
    *phi2_z = second_order_step(dots, ghg, b, rec)[0];
    if (self_ghg != nullptr) {
      // g_z^T H g_z via the ghost route with a singleton direction.
      const std::size_t one[1] = {0};
      const ModelParams gz = grad_from_trace(spec, trace, one);
      const ModelParams hv = hvp_from_trace(params, spec, trace, b, gz);
      *self_ghg = ghost_bilinear(spec, trace, 0, hv);
    }
  };

  double phi1_base, phi2_base, self_ghg;
  run_batch(0, &phi1_base, &phi2_base, &self_ghg);
  for (std::size_t k : {1u, 3u}) {
    double phi1_k, phi2_k;
    run_batch(k, &phi1_k, &phi2_k, nullptr);
    CHECK(std::fabs(phi1_k - phi1_base) <= 1e-12 * std::max(1.0, std::fabs(phi1_base)));
    const double want_shift = 0.5 * eta * eta * static_cast<double>(k) * self_ghg;
    CHECK(std::fabs((phi2_k - phi2_base) - want_shift) <=
          1e-12 * std::max(1.0, std::fabs(want_shift)));
  }
}
