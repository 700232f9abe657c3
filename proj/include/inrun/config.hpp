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

#include <map>
#include <string>

#include "inrun/trainer.hpp"

namespace inrun {

// Everything a run can be configured with. Config files are line-oriented
// `key = value` pairs; blank lines and `#` comments are ignored; unknown keys
// are a hard error. See the README for the key reference.
struct FullConfig {
  TrainConfig train;
  std::string dataset_path;
  std::string out_dir = ".";

  bool has_synthetic = false;
  SyntheticTaskSpec synthetic;
  bool synthetic_seed_set = false;

  std::vector<double> probe_deltas;
  std::vector<double> etas;
  std::size_t subsets = 20;
  double trim = 0.2;
  std::size_t bench_runs = 5;
};

FullConfig parse_config_map(const std::map<std::string, std::string>& kv);
FullConfig parse_config_file(const std::string& path);

// Materializes the configured dataset: either loads dataset_path or runs the
// synthetic generator (exactly one must be configured). Generator validation
// ids fill train.val_ids when the config leaves them empty.
struct ResolvedData {
  std::vector<Example> examples;
  std::vector<std::uint8_t> flip_mask;  // empty for CSV datasets
};

ResolvedData resolve_dataset(FullConfig& config);

}  // namespace inrun
