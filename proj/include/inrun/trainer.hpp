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

#include <string>
#include <vector>

#include "inrun/datasets.hpp"
#include "inrun/oracle.hpp"

namespace inrun {

enum class Schedule { Constant, LinearWarmup };

// None trains plainly; First/Second use the ghost kernels; NaiveFirst is the
// per-sample-gradient baseline that backpropagates once per sample on the
// batched graph (the cost reference, value-identical to First).
enum class AttributionOrder { None, First, Second, NaiveFirst };

// SGD only; the update applies eta to the summed batch gradient, so any mean
// normalization has to be folded into lr by the caller.
struct TrainConfig {
  std::uint64_t seed = 0;
  std::size_t iterations = 1;
  std::size_t batch_size = 1;
  double lr = 0.0;
  Schedule schedule = Schedule::Constant;
  std::size_t warmup_iters = 0;  // LinearWarmup only; 0 means iterations/10
  AttributionOrder attribution = AttributionOrder::None;
  std::vector<std::int64_t> val_ids;      // attribution targets
  std::vector<std::int64_t> holdout_ids;  // never trained on; empty = val_ids
  ModelSpec model;
  bool keep_iteration_log = false;

  void validate(std::size_t dataset_size) const;
  double eta_at(std::size_t t) const;
  std::vector<std::int64_t> effective_holdout() const;
};

struct PhaseTimings {
  double forward = 0.0;
  double backward = 0.0;
  double attribution = 0.0;
  double update = 0.0;
  double total = 0.0;
};

struct RunArtifacts {
  ModelParams params;
  ValueLedger ledger;
  std::vector<double> train_curve;  // mean batch loss at w_t
  std::vector<double> val_curve;    // mean validation loss at w_t
  double final_train_loss = 0.0;    // at w_T over the last batch
  double final_val_loss = 0.0;      // at w_T
  std::vector<IterationRecord> records;
  PhaseTimings timings;
  std::uint64_t backward_passes = 0;
};

// The instrumented run. Validation examples ride along in the joint pass for
// attribution and loss curves but never enter the parameter update, so the
// parameter trajectory is bitwise identical across attribution modes.
RunArtifacts train_with_attribution(const TrainConfig& config,
                                    std::span<const Example> dataset);

struct CleanReport {
  std::size_t pool_size = 0;
  std::size_t removed_count = 0;
  double removed_fraction = 0.0;
  double flip_enrichment = 0.0;  // NaN without ground truth
  double threshold = 0.0;        // original run's final validation loss
  std::size_t iters_to_threshold_original = 0;
  std::size_t iters_to_threshold_cleaned = 0;
  double percent_fewer_iterations = 0.0;
  RunArtifacts original;
  RunArtifacts cleaned;
};

// Runs attribution, drops every training example with negative value (at the
// configured order), retrains with the same config and seed, and compares
// iterations needed to reach the original run's final validation loss.
// flip_mask, when non-empty, marks ground-truth corrupted labels by training
// example id and enables the enrichment statistic.
CleanReport clean_and_retrain(const TrainConfig& config, std::span<const Example> dataset,
                              std::span<const std::uint8_t> flip_mask = {});

struct BenchRow {
  std::string mode;
  double median_seconds = 0.0;
  double ratio_vs_plain = 0.0;
  double backward_passes_per_iteration = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;  // plain, first, second, naive
};

// Median wall time over `runs` repetitions per mode, after one warm-up run.
BenchReport runtime_bench(const TrainConfig& config, std::span<const Example> dataset,
                          std::size_t runs = 5);

std::string bench_csv(const BenchReport& report);

}  // namespace inrun
