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

#include "inrun/verify.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <sstream>

#include "inrun/config.hpp"
#include "inrun/oracle.hpp"
#include "inrun/trainer.hpp"

namespace inrun {

namespace {

struct Check {
  const char* name;
  std::function<bool(std::string&)> fn;
};

double rel_err(double got, double want) {
  const double denom = std::max(1.0, std::fabs(want));
  return std::fabs(got - want) / denom;
}

ModelSpec random_spec(SeededRng& rng, bool tanh_only, bool mse_only) {
  ModelSpec spec;
  const std::size_t layers = 1 + rng.next_below(3);
  spec.dims.resize(layers + 1);
  for (auto& d : spec.dims) d = 1 + rng.next_below(6);
  spec.seq_len = 1 + rng.next_below(4);
  for (std::size_t i = 0; i + 1 < layers; ++i) {
    if (tanh_only) {
      spec.hidden_acts.push_back(Activation::Tanh);
    } else {
      const std::uint64_t k = rng.next_below(3);
      spec.hidden_acts.push_back(k == 0 ? Activation::Identity
                                        : (k == 1 ? Activation::Relu : Activation::Tanh));
    }
  }
  spec.loss = (mse_only || rng.next_below(2) == 0) ? Loss::Mse : Loss::SoftmaxCrossEntropy;
  if (spec.loss == Loss::SoftmaxCrossEntropy && spec.dims.back() < 2) spec.dims.back() = 2;
  for (std::size_t i = 0; i < layers; ++i) spec.has_bias.push_back(rng.next_below(2) == 0);
  return spec;
}

Example random_example(SeededRng& rng, const ModelSpec& spec, std::int64_t id) {
  Example ex;
  ex.id = id;
  ex.features.resize(spec.feature_len());
  for (double& v : ex.features) v = rng.next_gaussian();
  if (spec.loss == Loss::Mse) {
    ex.regression_target.resize(spec.output_dim() * spec.seq_len);
    for (double& v : ex.regression_target) v = rng.next_gaussian();
  } else {
    ex.class_index = static_cast<std::int64_t>(rng.next_below(spec.output_dim()));
  }
  return ex;
}

// Gradient of loss(params, ex) via the per-sample tape; the materialized
// reference the ghost kernels are checked against.
ModelParams materialized_grad(const ModelParams& params, const ModelSpec& spec,
                              const Example& ex) {
  LayerTrace trace = forward(params, spec, std::span<const Example>(&ex, 1));
  return tape_grad_for_sample(params, spec, trace, 0);
}

std::vector<Example> make_batch(SeededRng& rng, const ModelSpec& spec, std::size_t n) {
  std::vector<Example> batch;
  for (std::size_t i = 0; i < n; ++i) batch.push_back(random_example(rng, spec, (std::int64_t)i));
  return batch;
}

}  // namespace

bool run_verify_suite(std::ostream& os, const VerifyOptions& options) {
  std::vector<Check> checks;
  const std::size_t ghost_instances = options.quick ? 20 : 100;
  const std::size_t hvp_instances = options.quick ? 10 : 50;
  const bool inject = options.inject_sign_flip;
  const std::uint64_t seed = options.seed;

  checks.push_back({"matmul matches naive triple loop", [&](std::string& why) {
    SeededRng rng(seed + 1);
    Matrix2D a(7, 5), b(5, 3);
    for (double& v : a.data) v = rng.next_gaussian();
    for (double& v : b.data) v = rng.next_gaussian();
    const Matrix2D c = matmul(a, b);
    for (std::size_t i = 0; i < 7; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        double want = 0.0;
        for (std::size_t k = 0; k < 5; ++k) want += a(i, k) * b(k, j);
        if (rel_err(c(i, j), want) > 1e-12) {
          why = "entry mismatch";
          return false;
        }
      }
    }
    return true;
  }});

  checks.push_back({"frobenius dot matches flatten-and-dot", [&](std::string& why) {
    SeededRng rng(seed + 2);
    Matrix2D a(4, 4), b(4, 4);
    for (double& v : a.data) v = rng.next_gaussian();
    for (double& v : b.data) v = rng.next_gaussian();
    const double got = frobenius_dot(a, b);
    const double want = dot(a.data, b.data);
    if (rel_err(got, want) > 1e-12) {
      why = "mismatch";
      return false;
    }
    return true;
  }});

  checks.push_back({"seeded batch sampling is reproducible", [&](std::string& why) {
    SeededRng r1(42), r2(42);
    const auto b1 = sample_batch(r1, 10, 3);
    const auto b2 = sample_batch(r2, 10, 3);
    if (b1 != b2) {
      why = "same seed gave different batches";
      return false;
    }
    for (std::size_t i = 1; i < b1.size(); ++i) {
      if (b1[i] <= b1[i - 1]) {
        why = "batch not ascending";
        return false;
      }
    }
    return true;
  }});

  checks.push_back({"ghost pairwise dots match materialized gradients", [&](std::string& why) {
    SeededRng rng(seed + 3);
    double worst = 0.0;
    for (std::size_t inst = 0; inst < ghost_instances; ++inst) {
      const ModelSpec spec = random_spec(rng, false, false);
      ModelParams params = init_params(spec, rng);
      const std::size_t n = 1 + rng.next_below(6);
      std::vector<Example> batch = make_batch(rng, spec, n);
      LayerTrace trace = forward(params, spec, batch);
      backward_joint(params, spec, trace);
      const PairwiseDots dots = ghost_pairwise_dots(spec, trace);
      std::vector<ModelParams> grads;
      for (std::size_t i = 0; i < n; ++i) {
        grads.push_back(tape_grad_for_sample(params, spec, trace, i));
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double want = grads[i].dot_with(grads[j]);
          double got = dots.at(i, j);
          if (inject && inst == 0 && i == 0 && j == 0) got = -got - 1.0;
          const double scale = std::max({1e-30, std::fabs(want), std::fabs(got)});
          worst = std::max(worst, std::fabs(got - want) / scale);
        }
      }
    }
    if (worst > 1e-10) {
      why = "max relative error " + std::to_string(worst);
      return false;
    }
    return true;
  }});

  checks.push_back({"ghost branch choices agree", [&](std::string& why) {
    SeededRng rng(seed + 4);
    for (std::size_t inst = 0; inst < ghost_instances / 2; ++inst) {
      const ModelSpec spec = random_spec(rng, false, false);
      ModelParams params = init_params(spec, rng);
      std::vector<Example> batch = make_batch(rng, spec, 1 + rng.next_below(5));
      LayerTrace trace = forward(params, spec, batch);
      backward_joint(params, spec, trace);
      const PairwiseDots a = ghost_pairwise_dots(spec, trace, GhostBranch::InnerTxT);
      const PairwiseDots b = ghost_pairwise_dots(spec, trace, GhostBranch::OuterProduct);
      for (std::size_t k = 0; k < a.values.data.size(); ++k) {
        const double scale = std::max(1.0, std::fabs(a.values.data[k]));
        if (std::fabs(a.values.data[k] - b.values.data[k]) / scale > 1e-12) {
          why = "branches disagree";
          return false;
        }
      }
    }
    return true;
  }});

  checks.push_back({"hvp matches central finite differences", [&](std::string& why) {
    SeededRng rng(seed + 5);
    for (std::size_t inst = 0; inst < hvp_instances; ++inst) {
      const ModelSpec spec = random_spec(rng, true, false);
      ModelParams params = init_params(spec, rng);
      const Example ex = random_example(rng, spec, 0);
      ModelParams u = ModelParams::zeros_like(spec);
      {
        SeededRng urng(seed + 100 + inst);
        for (auto& w : u.weights)
          for (double& v : w.data) v = urng.next_gaussian();
        for (auto& b : u.biases)
          for (double& v : b) v = urng.next_gaussian();
      }
      const ModelParams got = hvp(params, spec, ex, u);
      const double eps = 1e-5 * (1.0 + params.max_abs());
      ModelParams plus = params, minus = params;
      plus.add_scaled(u, eps);
      minus.add_scaled(u, -eps);
      ModelParams want = materialized_grad(plus, spec, ex);
      const ModelParams gm = materialized_grad(minus, spec, ex);
      want.add_scaled(gm, -1.0);
      // want = (g(w+eps u) - g(w-eps u)) / (2 eps)
      double num = 0.0, den = 0.0;
      const auto gf = got.to_flat();
      const auto wf = want.to_flat();
      for (std::size_t k = 0; k < gf.size(); ++k) {
        const double fd = wf[k] / (2.0 * eps);
        num += (gf[k] - fd) * (gf[k] - fd);
        den += fd * fd;
      }
      const double rel = std::sqrt(num) / std::max(1.0, std::sqrt(den));
      if (rel > 1e-5) {
        why = "relative error " + std::to_string(rel);
        return false;
      }
    }
    return true;
  }});

  checks.push_back({"hvp is symmetric", [&](std::string& why) {
    SeededRng rng(seed + 6);
    for (std::size_t inst = 0; inst < hvp_instances / 2; ++inst) {
      const ModelSpec spec = random_spec(rng, true, false);
      ModelParams params = init_params(spec, rng);
      const Example ex = random_example(rng, spec, 0);
      ModelParams u = ModelParams::zeros_like(spec), v = ModelParams::zeros_like(spec);
      for (auto& w : u.weights)
        for (double& x : w.data) x = rng.next_gaussian();
      for (auto& b : u.biases)
        for (double& x : b) x = rng.next_gaussian();
      for (auto& w : v.weights)
        for (double& x : w.data) x = rng.next_gaussian();
      for (auto& b : v.biases)
        for (double& x : b) x = rng.next_gaussian();
      const double a = u.dot_with(hvp(params, spec, ex, v));
      const double b = v.dot_with(hvp(params, spec, ex, u));
      if (rel_err(a, b) > 1e-8) {
        why = "u.Hv != v.Hu";
        return false;
      }
    }
    return true;
  }});

  checks.push_back({"ghg rows sum to (sum g)^T H (sum g)", [&](std::string& why) {
    SeededRng rng(seed + 7);
    for (std::size_t inst = 0; inst < 10; ++inst) {
      const ModelSpec spec = random_spec(rng, true, false);
      ModelParams params = init_params(spec, rng);
      const std::size_t n = 2 + rng.next_below(5);
      std::vector<Example> all = make_batch(rng, spec, n + 1);
      LayerTrace trace = forward(params, spec, all);
      backward_joint(params, spec, trace);
      std::vector<std::size_t> batch_idx(n);
      for (std::size_t i = 0; i < n; ++i) batch_idx[i] = i;
      const std::vector<double> ghg = ghost_ghg(spec, trace, params, n, batch_idx);
      const ModelParams gsum = grad_from_trace(spec, trace, batch_idx);
      const ModelParams hv = hvp(params, spec, all[n], gsum);
      const double want = gsum.dot_with(hv);
      double got = 0.0;
      for (double g : ghg) got += g;
      if (rel_err(got, want) > 1e-9) {
        why = "row sum mismatch";
        return false;
      }
    }
    return true;
  }});

  checks.push_back({"closed forms equal exact Shapley enumeration", [&](std::string& why) {
    SeededRng rng(seed + 8);
    for (std::size_t B = 2; B <= 8; ++B) {
      const ModelSpec spec = random_spec(rng, true, false);
      ModelParams params = init_params(spec, rng);
      std::vector<Example> all = make_batch(rng, spec, B + 1);
      LayerTrace trace = forward(params, spec, all);
      backward_joint(params, spec, trace);
      const PairwiseDots dots = ghost_pairwise_dots(spec, trace);
      Matrix2D pair_ghg(B, B, 0.0);
      for (std::size_t j = 0; j < B; ++j) {
        const std::size_t idx[1] = {j};
        const ModelParams gj = grad_from_trace(spec, trace, idx);
        const ModelParams hv = hvp_from_trace(params, spec, trace, B, gj);
        for (std::size_t i = 0; i < B; ++i) pair_ghg(i, j) = ghost_bilinear(spec, trace, i, hv);
      }
      IterationRecord rec;
      rec.eta = 0.05;
      for (std::size_t i = 0; i < B; ++i) rec.batch_ids.push_back((std::int64_t)i);
      const std::vector<double> phi1 = first_order_step(dots, B, rec);
      std::vector<double> ghg_rows(B, 0.0);
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < B; ++j) ghg_rows[i] += pair_ghg(i, j);
      const std::vector<double> phi2 = second_order_step(dots, ghg_rows, B, rec);

      const double eta = rec.eta;
      UtilityFn u1{UtilityFn::Kind::FirstOrder, [&](const std::vector<std::size_t>& s) {
        double acc = 0.0;
        for (std::size_t i : s) acc += dots.at(i, B);
        return -eta * acc;
      }};
      UtilityFn u12{UtilityFn::Kind::SecondOrder, [&](const std::vector<std::size_t>& s) {
        double acc = 0.0;
        for (std::size_t i : s) acc += dots.at(i, B);
        double q = 0.0;
        for (std::size_t i : s)
          for (std::size_t j : s) q += pair_ghg(i, j);
        return -eta * acc + 0.5 * eta * eta * q;
      }};
      const std::vector<double> want1 = exact_shapley(u1, B);
      const std::vector<double> want12 = exact_shapley(u12, B);
      for (std::size_t i = 0; i < B; ++i) {
        if (rel_err(phi1[i], want1[i]) > 1e-10) {
          why = "first order mismatch at B=" + std::to_string(B);
          return false;
        }
        if (rel_err(phi2[i], want12[i]) > 1e-9) {
          why = "second order mismatch at B=" + std::to_string(B);
          return false;
        }
      }
    }
    return true;
  }});

  checks.push_back({"axioms: efficiency, symmetry, null player", [&](std::string& why) {
    SeededRng rng(seed + 9);
    ModelSpec spec;
    spec.dims = {3, 4, 2};
    spec.hidden_acts = {Activation::Tanh};
    spec.loss = Loss::Mse;
    spec.seq_len = 1;
    spec.has_bias = {false, false};  // a zero-feature sample then has zero gradient
    ModelParams params = init_params(spec, rng);
    std::vector<Example> all;
    for (std::size_t i = 0; i < 5; ++i) all.push_back(random_example(rng, spec, (std::int64_t)i));
    all[1] = all[0];  // duplicate pair
    all[1].id = 1;
    for (double& v : all[2].features) v = 0.0;  // null player
    all.push_back(random_example(rng, spec, 5));  // validation point
    const std::size_t B = 5;
    LayerTrace trace = forward(params, spec, all);
    backward_joint(params, spec, trace);
    const PairwiseDots dots = ghost_pairwise_dots(spec, trace);
    IterationRecord rec;
    rec.eta = 0.1;
    for (std::size_t i = 0; i < B; ++i) rec.batch_ids.push_back((std::int64_t)i);
    std::vector<std::size_t> batch_idx = {0, 1, 2, 3, 4};
    const std::vector<double> ghg = ghost_ghg(spec, trace, params, B, batch_idx);
    const std::vector<double> phi1 = first_order_step(dots, B, rec);
    const std::vector<double> phi2 = second_order_step(dots, ghg, B, rec);

    double sum1 = 0.0;
    for (double p : phi1) sum1 += p;
    const ModelParams gsum = grad_from_trace(spec, trace, batch_idx);
    const ModelParams gval = tape_grad_for_sample(params, spec, trace, B);
    if (rel_err(sum1, -rec.eta * gval.dot_with(gsum)) > 1e-9) {
      why = "first-order efficiency";
      return false;
    }
    double sum2 = 0.0;
    for (double p : phi2) sum2 += p;
    const ModelParams hv = hvp_from_trace(params, spec, trace, B, gsum);
    const double u2_full = gsum.dot_with(hv);
    if (rel_err(sum2, -rec.eta * gval.dot_with(gsum) + 0.5 * rec.eta * rec.eta * u2_full) > 1e-9) {
      why = "second-order efficiency";
      return false;
    }
    if (phi1[0] != phi1[1] || phi2[0] != phi2[1]) {
      why = "duplicated samples got different values";
      return false;
    }
    if (phi1[2] != 0.0 || phi2[2] != 0.0) {
      why = "null player got nonzero value";
      return false;
    }
    return true;
  }});

  checks.push_back({"linearity across validation targets", [&](std::string& why) {
    SeededRng rng(seed + 10);
    SyntheticTaskSpec task;
    task.kind = SyntheticKind::GaussianMixture;
    task.n = 30;
    task.dim = 4;
    task.classes = 2;
    task.seed = 7;
    GeneratedDataset data = generate(task);
    TrainConfig cfg;
    cfg.seed = 11;
    cfg.iterations = 8;
    cfg.batch_size = 6;
    cfg.lr = 0.01;
    cfg.attribution = AttributionOrder::Second;
    cfg.model.dims = {4, 5, 2};
    cfg.model.hidden_acts = {Activation::Tanh};
    cfg.model.loss = Loss::SoftmaxCrossEntropy;
    cfg.model.seq_len = 1;
    cfg.model.has_bias = {true, true};
    const std::int64_t v1 = data.val_ids[0], v2 = data.val_ids[1];
    cfg.holdout_ids = data.val_ids;  // same training pool in all three runs
    cfg.val_ids = {v1};
    const RunArtifacts r1 = train_with_attribution(cfg, data.examples);
    cfg.val_ids = {v2};
    const RunArtifacts r2 = train_with_attribution(cfg, data.examples);
    cfg.val_ids = {v1, v2};
    const RunArtifacts r12 = train_with_attribution(cfg, data.examples);
    for (const auto& [id, e] : r12.ledger.entries()) {
      const auto& e1 = r1.ledger.at(id);
      const auto& e2 = r2.ledger.at(id);
      if (rel_err(e.first, e1.first + e2.first) > 1e-10 ||
          rel_err(e.second, e1.second + e2.second) > 1e-10) {
        why = "combined run != sum of single-target runs";
        return false;
      }
    }
    return true;
  }});

  checks.push_back({"attribution does not perturb training (bitwise)", [&](std::string& why) {
    SyntheticTaskSpec task;
    task.kind = SyntheticKind::GaussianMixture;
    task.n = 40;
    task.dim = 4;
    task.classes = 2;
    task.seed = 3;
    GeneratedDataset data = generate(task);
    TrainConfig cfg;
    cfg.seed = 5;
    cfg.iterations = 10;
    cfg.batch_size = 8;
    cfg.lr = 0.02;
    cfg.model.dims = {4, 6, 2};
    cfg.model.hidden_acts = {Activation::Tanh};
    cfg.model.loss = Loss::SoftmaxCrossEntropy;
    cfg.model.seq_len = 1;
    cfg.model.has_bias = {true, true};
    cfg.val_ids = {data.val_ids[0]};
    const AttributionOrder orders[] = {AttributionOrder::None, AttributionOrder::First,
                                       AttributionOrder::Second, AttributionOrder::NaiveFirst};
    std::vector<std::vector<double>> flats;
    for (AttributionOrder o : orders) {
      cfg.attribution = o;
      flats.push_back(train_with_attribution(cfg, data.examples).params.to_flat());
    }
    for (std::size_t k = 1; k < flats.size(); ++k) {
      if (flats[k] != flats[0]) {
        why = "mode " + std::to_string(k) + " changed the trajectory";
        return false;
      }
    }
    return true;
  }});

  checks.push_back({"backward pass counts are 1/1/2/B+1", [&](std::string& why) {
    SyntheticTaskSpec task;
    task.kind = SyntheticKind::GaussianMixture;
    task.n = 30;
    task.dim = 4;
    task.classes = 2;
    task.seed = 9;
    GeneratedDataset data = generate(task);
    TrainConfig cfg;
    cfg.seed = 5;
    cfg.iterations = 6;
    cfg.batch_size = 5;
    cfg.lr = 0.02;
    cfg.model.dims = {4, 6, 2};
    cfg.model.hidden_acts = {Activation::Tanh};
    cfg.model.loss = Loss::SoftmaxCrossEntropy;
    cfg.model.seq_len = 1;
    cfg.model.has_bias = {true, true};
    cfg.val_ids = {data.val_ids[0]};
    const std::pair<AttributionOrder, std::uint64_t> want[] = {
        {AttributionOrder::None, 1},
        {AttributionOrder::First, 1},
        {AttributionOrder::Second, 2},
        {AttributionOrder::NaiveFirst, cfg.batch_size + 1},
    };
    for (const auto& [order, per_iter] : want) {
      cfg.attribution = order;
      const RunArtifacts run = train_with_attribution(cfg, data.examples);
      if (run.backward_passes != per_iter * cfg.iterations) {
        why = "got " + std::to_string(run.backward_passes) + " passes, want " +
              std::to_string(per_iter * cfg.iterations);
        return false;
      }
    }
    return true;
  }});

  checks.push_back({"true local utility equals observed one-step change", [&](std::string& why) {
    SeededRng rng(seed + 11);
    SyntheticTaskSpec task;
    task.kind = SyntheticKind::GaussianMixture;
    task.n = 8;
    task.dim = 3;
    task.classes = 2;
    task.seed = 21;
    GeneratedDataset data = generate(task);
    TrainConfig cfg;
    cfg.seed = 13;
    cfg.iterations = 1;
    cfg.batch_size = 8;
    cfg.lr = 0.05;
    cfg.model.dims = {3, 4, 2};
    cfg.model.hidden_acts = {Activation::Tanh};
    cfg.model.loss = Loss::SoftmaxCrossEntropy;
    cfg.model.seq_len = 1;
    cfg.model.has_bias = {true, true};
    cfg.val_ids = {data.val_ids[0]};
    const RunArtifacts run = train_with_attribution(cfg, data.examples);
    const double observed = run.final_val_loss - run.val_curve[0];

    SeededRng init_rng(cfg.seed);
    const ModelParams w0 = init_params(cfg.model, init_rng);
    std::vector<Example> batch;
    for (std::int64_t id : run.records[0].batch_ids) batch.push_back(data.examples[(std::size_t)id]);
    std::vector<std::size_t> full(batch.size());
    for (std::size_t i = 0; i < full.size(); ++i) full[i] = i;
    const Example& val = data.examples[(std::size_t)data.val_ids[0]];
    const double u = true_local_utility(w0, cfg.model, batch, full, cfg.lr, val);
    if (rel_err(u, observed) > 1e-12) {
      why = "utility != observed change";
      return false;
    }
    return true;
  }});

  checks.push_back({"checkpoint round trip is bit exact", [&](std::string& why) {
    SeededRng rng(seed + 12);
    const ModelSpec spec = random_spec(rng, false, false);
    ModelParams params = init_params(spec, rng);
    const std::string path = "verify_ckpt.irsv1";
    save_checkpoint(path, spec, params);
    ModelSpec spec2;
    const ModelParams loaded = load_checkpoint(path, spec2);
    std::remove(path.c_str());
    if (loaded.to_flat() != params.to_flat() || spec2.dims != spec.dims) {
      why = "round trip changed bits";
      return false;
    }
    return true;
  }});

  checks.push_back({"exact Shapley: additivity and symmetric game", [&](std::string& why) {
    SeededRng rng(seed + 13);
    std::vector<double> c(6);
    for (double& v : c) v = rng.next_gaussian();
    UtilityFn additive{UtilityFn::Kind::Custom, [&](const std::vector<std::size_t>& s) {
      double acc = 0.0;
      for (std::size_t i : s) acc += c[i];
      return acc;
    }};
    const std::vector<double> phi = exact_shapley(additive, 6);
    for (std::size_t i = 0; i < 6; ++i) {
      if (rel_err(phi[i], c[i]) > 1e-12) {
        why = "additive game";
        return false;
      }
    }
    UtilityFn square{UtilityFn::Kind::Custom, [](const std::vector<std::size_t>& s) {
      return static_cast<double>(s.size() * s.size());
    }};
    const std::vector<double> phi2 = exact_shapley(square, 3);
    for (double p : phi2) {
      if (rel_err(p, 3.0) > 1e-12) {
        why = "|S|^2 game";
        return false;
      }
    }
    return true;
  }});

  checks.push_back({"retraining Shapley respects symmetry and definition", [&](std::string& why) {
    SeededRng rng(seed + 14);
    ModelSpec spec;
    spec.dims = {2, 1};
    spec.hidden_acts = {};
    spec.loss = Loss::Mse;
    spec.seq_len = 1;
    spec.has_bias = {false};
    std::vector<Example> dataset;
    for (std::size_t i = 0; i < 4; ++i) {
      Example ex = random_example(rng, spec, (std::int64_t)i);
      dataset.push_back(ex);
    }
    dataset[3] = dataset[2];
    dataset[3].id = 3;
    const Example val = random_example(rng, spec, 99);
    RetrainConfig rc;
    rc.init_seed = 4;
    rc.gd_iters = 12;
    rc.lr = 0.05;
    const std::vector<double> phi = retraining_shapley_tiny(dataset, spec, rc, val);
    if (std::fabs(phi[2] - phi[3]) > 1e-12) {
      why = "duplicates differ";
      return false;
    }
    // n = 1: the value is the utility of the singleton, U({z}) - U({}).
    const std::vector<Example> single(dataset.begin(), dataset.begin() + 1);
    const std::vector<double> phi_single = retraining_shapley_tiny(single, spec, rc, val);
    SeededRng init_rng(rc.init_seed);
    ModelParams w = init_params(spec, init_rng);
    const double base = loss_of(w, spec, val);
    const std::size_t all0[1] = {0};
    for (std::size_t it = 0; it < rc.gd_iters; ++it) {
      LayerTrace trace = forward(w, spec, single);
      backward_joint(w, spec, trace);
      const ModelParams g = grad_from_trace(spec, trace, all0);
      w.add_scaled(g, -rc.lr);
    }
    const double u_single = base - loss_of(w, spec, val);
    if (rel_err(phi_single[0], u_single) > 1e-12) {
      why = "singleton value != singleton utility";
      return false;
    }
    return true;
  }});

  bool all_ok = true;
  for (const Check& check : checks) {
    std::string why;
    bool ok = false;
    try {
      ok = check.fn(why);
    } catch (const std::exception& e) {
      why = e.what();
      ok = false;
    }
    os << (ok ? "[PASS] " : "[FAIL] ") << check.name;
    if (!ok && !why.empty()) os << " (" << why << ")";
    os << "\n";
    all_ok = all_ok && ok;
  }
  return all_ok;
}

}  // namespace inrun
