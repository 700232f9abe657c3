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

#include "inrun/shapley.hpp"

namespace inrun {

enum class SyntheticKind { GaussianMixture, DomainMixture, NearDuplicateProbe };

// Parameters of the synthetic task generators. Class means are unit-variance
// Gaussians at distance 3 along disjoint axes; domain offsets (when present)
// shift features along further axes, so classes + domains must fit in dim.
struct SyntheticTaskSpec {
  SyntheticKind kind = SyntheticKind::GaussianMixture;
  std::size_t n = 0;             // training examples
  std::size_t dim = 2;
  std::size_t classes = 2;
  double noise_rate = 0.0;       // label flip probability, < 0.5
  std::vector<double> domain_proportions;  // DomainMixture only, sums to 1
  std::uint64_t seed = 0;
  std::size_t probe_source = 0;  // NearDuplicateProbe: copied training index
  double probe_delta = 0.0;      // NearDuplicateProbe: perturbation norm

  void validate() const;
};

// Generator output: training examples first, then the validation examples
// the task appends (ids n..); flip_mask/true_labels cover the training part.
struct GeneratedDataset {
  std::vector<Example> examples;
  std::vector<std::int64_t> true_labels;
  std::vector<std::uint8_t> flip_mask;
  std::vector<std::int64_t> val_ids;
};

GeneratedDataset generate(const SyntheticTaskSpec& spec);

// Dataset CSV with header feature_0..feature_{d-1},label[,domain]. The label
// doubles as class index (when integral) and scalar regression target.
std::vector<Example> load_csv(const std::string& path);
void save_csv(const std::string& path, std::span<const Example> dataset);

// Ledger scores in the CSV layout defined by scores_csv, written atomically.
void save_scores(const std::string& path, const ValueLedger& ledger,
                 std::span<const Example> dataset);

// Writes content to path via a temp file plus rename, so readers never see a
// partial file.
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace inrun
