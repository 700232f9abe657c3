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

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <optional>
#include <sstream>

#include "inrun/config.hpp"
#include "inrun/verify.hpp"

namespace py = pybind11;

namespace {

inrun::SyntheticKind kind_from_string(const std::string& kind) {
  if (kind == "gaussian-mixture") return inrun::SyntheticKind::GaussianMixture;
  if (kind == "domain-mixture") return inrun::SyntheticKind::DomainMixture;
  if (kind == "near-duplicate-probe") return inrun::SyntheticKind::NearDuplicateProbe;
  throw inrun::ConfigError("unknown synthetic kind: " + kind);
}

py::dict generate_py(const std::string& kind, std::size_t n, std::size_t dim,
                     std::size_t classes, double noise_rate,
                     const std::vector<double>& domains, std::uint64_t seed,
                     std::size_t probe_index, double probe_delta) {
  inrun::SyntheticTaskSpec spec;
  spec.kind = kind_from_string(kind);
  spec.n = n;
  spec.dim = dim;
  spec.classes = classes;
  spec.noise_rate = noise_rate;
  spec.domain_proportions = domains;
  spec.seed = seed;
  spec.probe_source = probe_index;
  spec.probe_delta = probe_delta;
  const inrun::GeneratedDataset data = inrun::generate(spec);

  py::list features, labels, domain_tags;
  for (const inrun::Example& ex : data.examples) {
    features.append(ex.features);
    labels.append(ex.class_index);
    domain_tags.append(ex.domain);
  }
  py::dict out;
  out["features"] = features;
  out["labels"] = labels;
  out["domains"] = domain_tags;
  out["flips"] = data.flip_mask;
  out["true_labels"] = data.true_labels;
  out["val_ids"] = data.val_ids;
  return out;
}

py::dict run_to_dict(const inrun::RunArtifacts& run) {
  py::list ids, sampled, first, second;
  for (const auto& [id, entry] : run.ledger.entries()) {
    ids.append(id);
    sampled.append(entry.times_sampled);
    first.append(entry.first);
    second.append(entry.second);
  }
  py::dict out;
  out["example_ids"] = ids;
  out["times_sampled"] = sampled;
  out["value_first"] = first;
  out["value_second"] = second;
  out["total_first"] = run.ledger.total_first();
  out["total_second"] = run.ledger.total_second();
  out["train_curve"] = run.train_curve;
  out["val_curve"] = run.val_curve;
  out["final_val_loss"] = run.final_val_loss;
  out["backward_passes"] = run.backward_passes;
  return out;
}

py::dict attribute_py(const std::map<std::string, std::string>& config,
                      const std::optional<std::vector<std::vector<double>>>& features,
                      const std::optional<std::vector<double>>& labels,
                      const std::optional<std::vector<std::string>>& domains) {
  inrun::FullConfig cfg = inrun::parse_config_map(config);
  std::vector<inrun::Example> dataset;
  if (features.has_value()) {
    if (!labels.has_value() || labels->size() != features->size()) {
      throw inrun::ConfigError("attribute: features and labels must have equal length");
    }
    for (std::size_t i = 0; i < features->size(); ++i) {
      inrun::Example ex;
      ex.id = static_cast<std::int64_t>(i);
      ex.features = (*features)[i];
      const double v = (*labels)[i];
      ex.regression_target = {v};
      if (v == std::round(v)) ex.class_index = static_cast<std::int64_t>(v);
      if (domains.has_value() && i < domains->size()) ex.domain = (*domains)[i];
      dataset.push_back(std::move(ex));
    }
  } else {
    inrun::ResolvedData data = inrun::resolve_dataset(cfg);
    dataset = std::move(data.examples);
  }
  const inrun::RunArtifacts run = inrun::train_with_attribution(cfg.train, dataset);
  return run_to_dict(run);
}

std::vector<double> exact_shapley_py(const std::function<double(std::vector<std::size_t>)>& fn,
                                     std::size_t n) {
  inrun::UtilityFn u;
  u.kind = inrun::UtilityFn::Kind::Custom;
  u.fn = [&fn](const std::vector<std::size_t>& subset) { return fn(subset); };
  return inrun::exact_shapley(u, n);
}

py::tuple verify_py(bool quick) {
  inrun::VerifyOptions options;
  options.quick = quick;
  std::ostringstream os;
  const bool ok = inrun::run_verify_suite(os, options);
  return py::make_tuple(ok, os.str());
}

}  // namespace

PYBIND11_MODULE(inrunshap, m) {
  m.doc() = "Training-time data attribution: per-example Shapley values from a "
            "single SGD run, computed with ghost gradient algebra.";

  m.def("generate", &generate_py, py::arg("kind"), py::arg("n"), py::arg("dim"),
        py::arg("classes") = 2, py::arg("noise_rate") = 0.0,
        py::arg("domains") = std::vector<double>{}, py::arg("seed") = 0,
        py::arg("probe_index") = 0, py::arg("probe_delta") = 0.0,
        "Build a synthetic task; returns features, labels, domains, flip mask "
        "and the appended validation ids.");

  m.def("attribute", &attribute_py, py::arg("config"), py::arg("features") = py::none(),
        py::arg("labels") = py::none(), py::arg("domains") = py::none(),
        "Run training with attribution. config maps the documented key=value "
        "strings; pass features/labels to supply the dataset directly.");

  m.def("exact_shapley", &exact_shapley_py, py::arg("utility"), py::arg("n"),
        "Exact Shapley values of a utility over subsets of range(n), n <= 12.");

  m.def("verify", &verify_py, py::arg("quick") = true,
        "Run the property suite; returns (ok, report_text).");
}
