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

#include "inrun/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <unordered_set>

namespace inrun {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct SplitData {
  std::vector<Example> train;  // ascending by id
  std::vector<Example> vals;   // in val_ids order
};

SplitData split_dataset(const TrainConfig& config, std::span<const Example> dataset) {
  const std::vector<std::int64_t> holdout = config.effective_holdout();
  std::unordered_set<std::int64_t> held(holdout.begin(), holdout.end());
  std::unordered_set<std::int64_t> seen;
  SplitData out;
  for (const Example& ex : dataset) {
    if (!seen.insert(ex.id).second) {
      throw ContractError("trainer: duplicate example id " + std::to_string(ex.id));
    }
    if (held.count(ex.id) == 0) out.train.push_back(ex);
  }
  std::sort(out.train.begin(), out.train.end(),
            [](const Example& a, const Example& b) { return a.id < b.id; });
  for (std::int64_t id : config.val_ids) {
    bool found = false;
    for (const Example& ex : dataset) {
      if (ex.id == id) {
        out.vals.push_back(ex);
        found = true;
        break;
      }
    }
    if (!found) {
      throw ContractError("trainer: validation id " + std::to_string(id) +
                          " not present in dataset");
    }
  }
  return out;
}

double mean_of(std::span<const double> v, std::size_t begin, std::size_t end) {
  if (begin >= end) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += v[i];
  return s / static_cast<double>(end - begin);
}

}  // namespace

void TrainConfig::validate(std::size_t dataset_size) const {
  model.validate();
  if (iterations == 0) throw ContractError("TrainConfig: iterations must be >= 1");
  if (batch_size == 0) throw ContractError("TrainConfig: batch size must be >= 1");
  if (lr <= 0.0) throw ContractError("TrainConfig: lr must be positive");
  if (batch_size + effective_holdout().size() > dataset_size) {
    throw ContractError("TrainConfig: batch size exceeds training pool");
  }
  if (attribution != AttributionOrder::None && val_ids.empty()) {
    throw ContractError("TrainConfig: attribution requires at least one validation id");
  }
  if (!holdout_ids.empty()) {
    // Validation points must never enter the update, so they have to be held out.
    for (std::int64_t v : val_ids) {
      bool held = false;
      for (std::int64_t h : holdout_ids) held = held || h == v;
      if (!held) {
        throw ContractError("TrainConfig: validation id " + std::to_string(v) +
                            " missing from holdout_ids");
      }
    }
  }
}

std::vector<std::int64_t> TrainConfig::effective_holdout() const {
  return holdout_ids.empty() ? val_ids : holdout_ids;
}

double TrainConfig::eta_at(std::size_t t) const {
  if (schedule == Schedule::Constant) return lr;
  std::size_t warm = warmup_iters != 0 ? warmup_iters : std::max<std::size_t>(1, iterations / 10);
  if (t + 1 >= warm) return lr;
  return lr * static_cast<double>(t + 1) / static_cast<double>(warm);
}

RunArtifacts train_with_attribution(const TrainConfig& config,
                                    std::span<const Example> dataset) {
  config.validate(dataset.size());
  SplitData data = split_dataset(config, dataset);
  if (config.batch_size > data.train.size()) {
    throw ContractError("trainer: batch size exceeds training pool");
  }
  const std::size_t B = config.batch_size;
  const std::size_t V = data.vals.size();
  const ModelSpec& spec = config.model;

  RunArtifacts run;
  const std::uint64_t passes_before = backward_pass_count();
  const double t_start = now_seconds();

  SeededRng rng(config.seed);
  run.params = init_params(spec, rng);

  std::vector<std::int64_t> pool_ids(data.train.size());
  for (std::size_t i = 0; i < data.train.size(); ++i) pool_ids[i] = data.train[i].id;
  run.ledger = ValueLedger(pool_ids, config.keep_iteration_log);

  run.train_curve.resize(config.iterations);
  run.val_curve.resize(config.iterations);

  std::vector<std::size_t> batch_positions(B);
  for (std::size_t i = 0; i < B; ++i) batch_positions[i] = i;

  std::vector<Example> samples;
  samples.reserve(B + V);

  for (std::size_t t = 0; t < config.iterations; ++t) {
    IterationRecord rec;
    rec.t = static_cast<std::int64_t>(t);
    rec.eta = config.eta_at(t);
    rec.rng_counter = rng.counter();

    const std::vector<std::size_t> batch = sample_batch(rng, data.train.size(), B);
    samples.clear();
    rec.batch_ids.clear();
    for (std::size_t p : batch) {
      samples.push_back(data.train[p]);
      rec.batch_ids.push_back(data.train[p].id);
    }
    for (const Example& v : data.vals) samples.push_back(v);

    LayerTrace trace;
    double t0 = now_seconds();
    try {
      trace = forward(run.params, spec, samples);
    } catch (const NumericError& e) {
      throw NumericError("iteration " + std::to_string(t) + ": " + e.what());
    }
    run.timings.forward += now_seconds() - t0;

    run.train_curve[t] = mean_of(trace.losses, 0, B);
    run.val_curve[t] = mean_of(trace.losses, B, B + V);

    ModelParams update_grad;
    if (config.attribution == AttributionOrder::NaiveFirst) {
      // Per-sample gradients through the batched tape: one backward sweep of
      // the whole graph per sample, then plain dot products.
      t0 = now_seconds();
      std::vector<ModelParams> grads;
      grads.reserve(B + V);
      for (std::size_t s = 0; s < B + V; ++s) {
        grads.push_back(tape_grad_for_sample(run.params, spec, trace, s));
      }
      run.timings.backward += now_seconds() - t0;

      t0 = now_seconds();
      std::vector<double> phi1(B, 0.0);
      for (std::size_t i = 0; i < B; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < V; ++k) s += grads[i].dot_with(grads[B + k]);
        phi1[i] = -rec.eta * s;
      }
      run.ledger.accumulate(rec, phi1, {});
      run.timings.attribution += now_seconds() - t0;

      update_grad = ModelParams::zeros_like(spec);
      for (std::size_t i = 0; i < B; ++i) update_grad.add_scaled(grads[i], 1.0);
    } else {
      t0 = now_seconds();
      backward_joint(run.params, spec, trace);
      run.timings.backward += now_seconds() - t0;

      // Bookkeeping trick: the update gradient comes from the recorded
      // output gradients, not from another backward pass.
      update_grad = grad_from_trace(spec, trace, batch_positions);

      if (config.attribution == AttributionOrder::First ||
          config.attribution == AttributionOrder::Second) {
        t0 = now_seconds();
        const PairwiseDots dots = ghost_pairwise_dots(spec, trace);
        const std::vector<double> phi1 = first_order_step(dots, B, rec);
        if (config.attribution == AttributionOrder::First) {
          run.ledger.accumulate(rec, phi1, {});
        } else {
          std::vector<double> ghg(B, 0.0);
          for (std::size_t k = 0; k < V; ++k) {
            const ModelParams hv = hvp_from_trace(run.params, spec, trace, B + k, update_grad);
            for (std::size_t i = 0; i < B; ++i) ghg[i] += ghost_bilinear(spec, trace, i, hv);
          }
          const std::vector<double> phi2 = second_order_step(dots, ghg, B, rec);
          run.ledger.accumulate(rec, phi1, phi2);
        }
        run.timings.attribution += now_seconds() - t0;
      }
    }

    t0 = now_seconds();
    run.params.add_scaled(update_grad, -rec.eta);
    run.timings.update += now_seconds() - t0;

    run.records.push_back(std::move(rec));
  }

  // Final losses at w_T: last batch for the train side, targets for the
  // validation side.
  {
    samples.clear();
    if (!run.records.empty()) {
      for (std::int64_t id : run.records.back().batch_ids) {
        for (const Example& ex : data.train) {
          if (ex.id == id) {
            samples.push_back(ex);
            break;
          }
        }
      }
    }
    const std::size_t nb = samples.size();
    for (const Example& v : data.vals) samples.push_back(v);
    if (!samples.empty()) {
      const LayerTrace final_trace = forward(run.params, spec, samples);
      run.final_train_loss = mean_of(final_trace.losses, 0, nb);
      run.final_val_loss = mean_of(final_trace.losses, nb, samples.size());
    }
  }

  run.timings.total = now_seconds() - t_start;
  run.backward_passes = backward_pass_count() - passes_before;
  return run;
}

namespace {

// First step index (1-based) at which the validation loss is at or below the
// threshold; checks w_1..w_T. Returns 0 when never reached.
std::size_t iterations_to_threshold(const RunArtifacts& run, double threshold) {
  const std::size_t T = run.val_curve.size();
  for (std::size_t t = 1; t <= T; ++t) {
    const double loss = t < T ? run.val_curve[t] : run.final_val_loss;
    if (loss <= threshold) return t;
  }
  return 0;
}

}  // namespace

CleanReport clean_and_retrain(const TrainConfig& config, std::span<const Example> dataset,
                              std::span<const std::uint8_t> flip_mask) {
  if (config.attribution != AttributionOrder::First &&
      config.attribution != AttributionOrder::Second) {
    throw ContractError("clean_and_retrain: attribution order must be first or second");
  }

  CleanReport report;
  report.original = train_with_attribution(config, dataset);

  const bool use_second = config.attribution == AttributionOrder::Second;
  std::unordered_set<std::int64_t> removed;
  std::size_t removed_flipped = 0;
  std::size_t pool_flipped = 0;
  for (const auto& [id, entry] : report.original.ledger.entries()) {
    const bool flipped = id >= 0 && static_cast<std::size_t>(id) < flip_mask.size() &&
                         flip_mask[static_cast<std::size_t>(id)] != 0;
    if (flipped) ++pool_flipped;
    const double value = use_second ? entry.second : entry.first;
    if (value < 0.0) {
      removed.insert(id);
      if (flipped) ++removed_flipped;
    }
  }
  report.pool_size = report.original.ledger.entries().size();
  report.removed_count = removed.size();
  report.removed_fraction =
      static_cast<double>(removed.size()) / static_cast<double>(report.pool_size);

  if (removed.size() == report.pool_size) {
    throw ContractError("clean_and_retrain: every training example was removed");
  }

  if (!flip_mask.empty() && pool_flipped > 0 && !removed.empty()) {
    const double rate_removed =
        static_cast<double>(removed_flipped) / static_cast<double>(removed.size());
    const double rate_pool =
        static_cast<double>(pool_flipped) / static_cast<double>(report.pool_size);
    report.flip_enrichment = rate_removed / rate_pool;
  } else {
    report.flip_enrichment = std::numeric_limits<double>::quiet_NaN();
  }

  std::vector<Example> cleaned;
  cleaned.reserve(dataset.size() - removed.size());
  for (const Example& ex : dataset) {
    if (removed.count(ex.id) == 0) cleaned.push_back(ex);
  }
  report.cleaned = train_with_attribution(config, cleaned);

  report.threshold = report.original.final_val_loss;
  report.iters_to_threshold_original =
      iterations_to_threshold(report.original, report.threshold);
  report.iters_to_threshold_cleaned = iterations_to_threshold(report.cleaned, report.threshold);
  if (report.iters_to_threshold_original > 0 && report.iters_to_threshold_cleaned > 0) {
    report.percent_fewer_iterations =
        100.0 *
        (static_cast<double>(report.iters_to_threshold_original) -
         static_cast<double>(report.iters_to_threshold_cleaned)) /
        static_cast<double>(report.iters_to_threshold_original);
  } else {
    report.percent_fewer_iterations = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

BenchReport runtime_bench(const TrainConfig& config, std::span<const Example> dataset,
                          std::size_t runs) {
  if (runs < 5) runs = 5;
  const std::pair<const char*, AttributionOrder> modes[] = {
      {"plain", AttributionOrder::None},
      {"first", AttributionOrder::First},
      {"second", AttributionOrder::Second},
      {"naive", AttributionOrder::NaiveFirst},
  };

  BenchReport report;
  double plain_median = 0.0;
  for (const auto& [name, order] : modes) {
    TrainConfig cfg = config;
    cfg.attribution = order;
    cfg.keep_iteration_log = false;

    train_with_attribution(cfg, dataset);  // warm-up, untimed

    std::vector<double> times;
    double passes_per_iter = 0.0;
    for (std::size_t r = 0; r < runs; ++r) {
      const double t0 = now_seconds();
      const RunArtifacts run = train_with_attribution(cfg, dataset);
      times.push_back(now_seconds() - t0);
      passes_per_iter = static_cast<double>(run.backward_passes) /
                        static_cast<double>(cfg.iterations);
    }
    std::sort(times.begin(), times.end());
    const double median = times[times.size() / 2];

    BenchRow row;
    row.mode = name;
    row.median_seconds = median;
    if (order == AttributionOrder::None) plain_median = median;
    row.ratio_vs_plain = plain_median > 0.0 ? median / plain_median : 0.0;
    row.backward_passes_per_iteration = passes_per_iter;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string bench_csv(const BenchReport& report) {
  std::string out = "mode,median_seconds,ratio_vs_plain,backward_passes_per_iteration\n";
  char buf[128];
  for (const BenchRow& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n", r.mode.c_str(),
                  r.median_seconds, r.ratio_vs_plain, r.backward_passes_per_iteration);
    out += buf;
  }
  return out;
}

}  // namespace inrun
