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

#include "inrun/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace inrun {

namespace {

constexpr double kMeanSeparation = 3.0;
constexpr double kDomainShift = 1.5;
constexpr std::size_t kValCount = 64;  // clean validation points appended by
                                       // the mixture generators; a handful is
                                       // too noisy a target for attribution

std::vector<double> class_mean(std::size_t dim, std::size_t cls) {
  std::vector<double> m(dim, 0.0);
  // Orthogonal class axes at pairwise distance kMeanSeparation.
  m[cls] = kMeanSeparation / std::sqrt(2.0);
  return m;
}

Example draw_example(SeededRng& rng, std::size_t dim, std::size_t cls,
                     const std::vector<double>* offset) {
  Example ex;
  ex.features = class_mean(dim, cls);
  if (offset != nullptr) {
    for (std::size_t i = 0; i < dim; ++i) ex.features[i] += (*offset)[i];
  }
  for (std::size_t i = 0; i < dim; ++i) ex.features[i] += rng.next_gaussian();
  ex.class_index = static_cast<std::int64_t>(cls);
  // The label doubles as a scalar regression target, like the CSV loader.
  ex.regression_target = {static_cast<double>(cls)};
  return ex;
}

// Largest-remainder allocation of n slots to the given proportions.
std::vector<std::size_t> allocate_counts(std::size_t n, const std::vector<double>& props) {
  std::vector<std::size_t> counts(props.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < props.size(); ++i) {
    const double exact = props[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(-(exact - std::floor(exact)), i);
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) {
    counts[remainders[k % remainders.size()].second] += 1;
  }
  return counts;
}

}  // namespace

void SyntheticTaskSpec::validate() const {
  if (n == 0) throw ContractError("SyntheticTaskSpec: n must be positive");
  if (dim == 0) throw ContractError("SyntheticTaskSpec: dim must be positive");
  if (classes < 2) throw ContractError("SyntheticTaskSpec: need at least 2 classes");
  if (noise_rate < 0.0 || noise_rate >= 0.5) {
    throw ContractError("SyntheticTaskSpec: noise rate must be in [0, 0.5)");
  }
  if (kind == SyntheticKind::DomainMixture) {
    if (domain_proportions.empty()) {
      throw ContractError("SyntheticTaskSpec: domain mixture needs proportions");
    }
    double sum = 0.0;
    for (double p : domain_proportions) {
      if (p < 0.0) throw ContractError("SyntheticTaskSpec: negative proportion");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
      throw ContractError("SyntheticTaskSpec: proportions must sum to 1");
    }
    if (classes + domain_proportions.size() > dim) {
      throw ContractError("SyntheticTaskSpec: classes + domains must fit in dim");
    }
  } else if (classes > dim) {
    throw ContractError("SyntheticTaskSpec: classes must fit in dim");
  }
  if (kind == SyntheticKind::NearDuplicateProbe) {
    if (probe_source >= n) throw ContractError("SyntheticTaskSpec: probe source out of range");
    if (probe_delta < 0.0) throw ContractError("SyntheticTaskSpec: negative probe delta");
  }
}

GeneratedDataset generate(const SyntheticTaskSpec& spec) {
  spec.validate();
  SeededRng rng(spec.seed);
  GeneratedDataset out;
  out.examples.reserve(spec.n + kValCount);
  out.true_labels.reserve(spec.n);
  out.flip_mask.assign(spec.n, 0);

  std::vector<std::vector<double>> domain_offsets;
  std::vector<std::size_t> domain_of;
  if (spec.kind == SyntheticKind::DomainMixture) {
    for (std::size_t d = 0; d < spec.domain_proportions.size(); ++d) {
      std::vector<double> off(spec.dim, 0.0);
      off[spec.dim - 1 - d] = kDomainShift;
      domain_offsets.push_back(std::move(off));
    }
    const auto counts = allocate_counts(spec.n, spec.domain_proportions);
    for (std::size_t d = 0; d < counts.size(); ++d) {
      domain_of.insert(domain_of.end(), counts[d], d);
    }
  }

  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t cls = i % spec.classes;
    const std::vector<double>* offset =
        domain_of.empty() ? nullptr : &domain_offsets[domain_of[i]];
    Example ex = draw_example(rng, spec.dim, cls, offset);
    ex.id = static_cast<std::int64_t>(i);
    if (!domain_of.empty()) ex.domain = "d" + std::to_string(domain_of[i]);
    out.true_labels.push_back(static_cast<std::int64_t>(cls));

    if (spec.noise_rate > 0.0 && rng.next_double() < spec.noise_rate) {
      // Flip to a uniformly chosen other class.
      const std::size_t shift = 1 + static_cast<std::size_t>(rng.next_below(spec.classes - 1));
      ex.class_index = static_cast<std::int64_t>((cls + shift) % spec.classes);
      ex.regression_target = {static_cast<double>(ex.class_index)};
      out.flip_mask[i] = 1;
    }
    out.examples.push_back(std::move(ex));
  }

  if (spec.kind == SyntheticKind::NearDuplicateProbe) {
    const Example& src = out.examples[spec.probe_source];
    Example val = src;
    val.id = static_cast<std::int64_t>(spec.n);
    val.domain.clear();
    if (spec.probe_delta > 0.0) {
      std::vector<double> dir(spec.dim);
      double norm = 0.0;
      for (double& v : dir) {
        v = rng.next_gaussian();
        norm += v * v;
      }
      norm = std::sqrt(norm);
      if (norm == 0.0) norm = 1.0;
      for (std::size_t i = 0; i < spec.dim; ++i) {
        val.features[i] += spec.probe_delta * dir[i] / norm;
      }
    }
    out.val_ids.push_back(val.id);
    out.examples.push_back(std::move(val));
  } else {
    for (std::size_t k = 0; k < kValCount; ++k) {
      const std::size_t cls = k % spec.classes;
      const std::vector<double>* offset = domain_offsets.empty() ? nullptr : &domain_offsets[0];
      Example val = draw_example(rng, spec.dim, cls, offset);
      val.id = static_cast<std::int64_t>(spec.n + k);
      out.val_ids.push_back(val.id);
      out.examples.push_back(std::move(val));
    }
  }
  return out;
}

std::vector<Example> load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line.empty()) {
    throw IoError("load_csv: empty dataset in " + path);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  std::size_t n_features = 0;
  while (n_features < cols.size() && cols[n_features] == "feature_" + std::to_string(n_features)) {
    ++n_features;
  }
  const bool has_domain = !cols.empty() && cols.back() == "domain";
  const std::size_t want_cols = n_features + 1 + (has_domain ? 1 : 0);
  if (n_features == 0 || cols.size() != want_cols || cols[n_features] != "label") {
    throw IoError("load_csv: malformed header in " + path);
  }

  std::vector<Example> out;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Example ex;
    ex.id = static_cast<std::int64_t>(out.size());
    ex.features.reserve(n_features);
    std::size_t pos = 0;
    for (std::size_t c = 0; c < want_cols; ++c) {
      const std::size_t next = line.find(',', pos);
      const bool last = c + 1 == want_cols;
      if (last != (next == std::string::npos)) {
        throw IoError("load_csv: wrong column count at line " + std::to_string(line_no));
      }
      const std::string field = line.substr(pos, last ? std::string::npos : next - pos);
      if (c < n_features || c == n_features) {
        const char* begin = field.c_str();
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin || *end != '\0' || !std::isfinite(v)) {
          throw IoError("load_csv: bad number '" + field + "' at line " + std::to_string(line_no));
        }
        if (c < n_features) {
          ex.features.push_back(v);
        } else {
          ex.regression_target.assign(1, v);
          const double r = std::round(v);
          if (r == v) ex.class_index = static_cast<std::int64_t>(r);
        }
      } else {
        ex.domain = field;
      }
      pos = last ? line.size() : next + 1;
    }
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw IoError("load_csv: empty dataset in " + path);
  return out;
}

void save_csv(const std::string& path, std::span<const Example> dataset) {
  if (dataset.empty()) throw ContractError("save_csv: refusing to write an empty dataset");
  bool with_domain = false;
  for (const Example& ex : dataset) {
    if (!ex.domain.empty()) with_domain = true;
  }
  const std::size_t n_features = dataset.front().features.size();
  std::string out;
  for (std::size_t i = 0; i < n_features; ++i) {
    out += "feature_" + std::to_string(i) + ",";
  }
  out += "label";
  if (with_domain) out += ",domain";
  out += "\n";
  char buf[64];
  for (const Example& ex : dataset) {
    if (ex.features.size() != n_features) {
      throw ContractError("save_csv: inconsistent feature lengths");
    }
    for (double v : ex.features) {
      std::snprintf(buf, sizeof(buf), "%.17g,", v);
      out += buf;
    }
    double label;
    if (!ex.regression_target.empty()) {
      label = ex.regression_target[0];
    } else {
      label = static_cast<double>(ex.class_index);
    }
    std::snprintf(buf, sizeof(buf), "%.17g", label);
    out += buf;
    if (with_domain) {
      out += ",";
      out += ex.domain;
    }
    out += "\n";
  }
  atomic_write_file(path, out);
}

void save_scores(const std::string& path, const ValueLedger& ledger,
                 std::span<const Example> dataset) {
  atomic_write_file(path, scores_csv(ledger, dataset));
}

void atomic_write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp + " for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) throw IoError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("atomic rename failed for " + path);
  }
}

}  // namespace inrun
