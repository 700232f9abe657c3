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

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "inrun/ghost.hpp"

namespace inrun {

// One SGD step's bookkeeping. eta is the step size applied to the summed
// batch gradient (any 1/|B| normalization is folded into it).
struct IterationRecord {
  std::int64_t t = 0;
  std::vector<std::int64_t> batch_ids;  // example ids, ascending
  double eta = 0.0;
  std::uint64_t rng_counter = 0;

  void validate() const;
};

// Per-sample contribution of this iteration under the linearized local
// utility: -eta * grad(val) . grad(z). dots must cover the batch in rows
// 0..B-1 and the validation targets in the remaining rows; contributions sum
// over targets.
std::vector<double> first_order_step(const PairwiseDots& dots, std::size_t batch_count,
                                     const IterationRecord& record);

// Full second-order contribution: the first-order term plus
// (eta^2/2) * g_z^T H^(val) (sum_j g_j). ghg holds that bilinear term per
// batch sample, already summed over validation targets.
std::vector<double> second_order_step(const PairwiseDots& dots,
                                      std::span<const double> ghg, std::size_t batch_count,
                                      const IterationRecord& record);

// Accumulated per-example attribution for one training run.
//
// Sign convention: the per-iteration closed forms above value contributions
// to the loss *change* (training that lowers the validation loss produces
// negative contributions). The ledger flips that orientation on entry and
// stores values as contributions to the loss *reduction*, so a positive
// ledger value means the example lowered the validation loss. All reports,
// ranking, and cleaning read this orientation.
class ValueLedger {
 public:
  struct Entry {
    std::int64_t times_sampled = 0;
    double first = 0.0;
    double second = 0.0;
  };

  struct IterationLog {
    std::int64_t t = 0;
    std::vector<std::int64_t> ids;
    std::vector<double> first;   // reduction-oriented, like the entries
    std::vector<double> second;
  };

  ValueLedger() = default;
  explicit ValueLedger(std::span<const std::int64_t> example_ids, bool keep_log = false);

  // Adds one iteration's contributions. phi arguments carry the raw step
  // outputs (loss-change orientation); pass an empty span for phi2 when only
  // first-order attribution ran.
  void accumulate(const IterationRecord& record, std::span<const double> phi1,
                  std::span<const double> phi2);

  const Entry& at(std::int64_t id) const;
  bool contains(std::int64_t id) const { return entries_.count(id) != 0; }
  const std::map<std::int64_t, Entry>& entries() const { return entries_; }
  const std::vector<IterationLog>& log() const { return log_; }
  bool keeps_log() const { return keep_log_; }

  double total_first() const;
  double total_second() const;

 private:
  std::map<std::int64_t, Entry> entries_;
  std::vector<IterationLog> log_;
  bool keep_log_ = false;
};

// Ledger CSV: header example_id,times_sampled,value_first,value_second and a
// trailing domain column when any covered example has a domain tag. Values
// carry 17 significant digits; rows ascend by example id.
std::string scores_csv(const ValueLedger& ledger, std::span<const Example> dataset);

}  // namespace inrun
