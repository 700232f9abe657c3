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

#include "inrun/shapley.hpp"

#include <cstdio>

namespace inrun {

void IterationRecord::validate() const {
  if (eta <= 0.0) throw ContractError("IterationRecord: eta must be positive");
  for (std::size_t i = 1; i < batch_ids.size(); ++i) {
    if (batch_ids[i] <= batch_ids[i - 1]) {
      throw ContractError("IterationRecord: batch ids must be ascending and unique");
    }
  }
}

std::vector<double> first_order_step(const PairwiseDots& dots, std::size_t batch_count,
                                     const IterationRecord& record) {
  record.validate();
  if (dots.size() <= batch_count) {
    throw ContractError("first_order_step: dots must cover batch plus validation rows");
  }
  if (record.batch_ids.size() != batch_count) {
    throw ContractError("first_order_step: record batch size mismatch");
  }
  const std::size_t n_val = dots.size() - batch_count;
  std::vector<double> phi(batch_count, 0.0);
  for (std::size_t i = 0; i < batch_count; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < n_val; ++k) s += dots.at(i, batch_count + k);
    phi[i] = -record.eta * s;
  }
  return phi;
}

std::vector<double> second_order_step(const PairwiseDots& dots, std::span<const double> ghg,
                                      std::size_t batch_count, const IterationRecord& record) {
  if (ghg.size() != batch_count) {
    throw ContractError("second_order_step: ghg length must equal batch size");
  }
  std::vector<double> phi = first_order_step(dots, batch_count, record);
  const double half_eta_sq = 0.5 * record.eta * record.eta;
  for (std::size_t i = 0; i < batch_count; ++i) phi[i] += half_eta_sq * ghg[i];
  return phi;
}

ValueLedger::ValueLedger(std::span<const std::int64_t> example_ids, bool keep_log)
    : keep_log_(keep_log) {
  for (std::int64_t id : example_ids) entries_[id];
}

void ValueLedger::accumulate(const IterationRecord& record, std::span<const double> phi1,
                             std::span<const double> phi2) {
  if (phi1.size() != record.batch_ids.size()) {
    throw ContractError("ValueLedger::accumulate: contribution length mismatch");
  }
  if (!phi2.empty() && phi2.size() != phi1.size()) {
    throw ContractError("ValueLedger::accumulate: second-order length mismatch");
  }
  IterationLog log_entry;
  for (std::size_t i = 0; i < phi1.size(); ++i) {
    auto it = entries_.find(record.batch_ids[i]);
    if (it == entries_.end()) {
      throw ContractError("ValueLedger::accumulate: unknown example id " +
                          std::to_string(record.batch_ids[i]));
    }
    Entry& e = it->second;
    e.times_sampled += 1;
    e.first += -phi1[i];
    if (!phi2.empty()) e.second += -phi2[i];
    if (keep_log_) {
      log_entry.ids.push_back(record.batch_ids[i]);
      log_entry.first.push_back(-phi1[i]);
      log_entry.second.push_back(phi2.empty() ? 0.0 : -phi2[i]);
    }
  }
  if (keep_log_) {
    log_entry.t = record.t;
    log_.push_back(std::move(log_entry));
  }
}

const ValueLedger::Entry& ValueLedger::at(std::int64_t id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) {
    throw ContractError("ValueLedger: unknown example id " + std::to_string(id));
  }
  return it->second;
}

double ValueLedger::total_first() const {
  double s = 0.0;
  for (const auto& [id, e] : entries_) s += e.first;
  return s;
}

double ValueLedger::total_second() const {
  double s = 0.0;
  for (const auto& [id, e] : entries_) s += e.second;
  return s;
}

std::string scores_csv(const ValueLedger& ledger, std::span<const Example> dataset) {
  bool with_domain = false;
  std::map<std::int64_t, const Example*> by_id;
  for (const Example& ex : dataset) by_id[ex.id] = &ex;
  for (const auto& [id, e] : ledger.entries()) {
    auto it = by_id.find(id);
    if (it != by_id.end() && !it->second->domain.empty()) with_domain = true;
  }

  std::string out = "example_id,times_sampled,value_first,value_second";
  if (with_domain) out += ",domain";
  out += "\n";
  char buf[64];
  for (const auto& [id, e] : ledger.entries()) {
    out += std::to_string(id);
    out += ",";
    out += std::to_string(e.times_sampled);
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", e.first, e.second);
    out += buf;
    if (with_domain) {
      out += ",";
      auto it = by_id.find(id);
      if (it != by_id.end()) out += it->second->domain;
    }
    out += "\n";
  }
  return out;
}

}  // namespace inrun
