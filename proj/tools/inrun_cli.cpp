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
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "inrun/config.hpp"
#include "inrun/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitVerifyFailed = 4;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* opt = cmd->add_option("--config", args.config_path, "Path to the run config file");
  if (config_required) opt->required();
  cmd->add_option("--out", args.out_dir, "Output directory (overrides out_dir in the config)");
  cmd->add_option("--seed", args.seed, "Seed override")->each([&](const std::string&) {
    args.seed_set = true;
  });
  cmd->add_flag("--quiet", args.quiet, "Suppress progress output");
}

inrun::FullConfig load_config(const CommonArgs& args) {
  inrun::FullConfig cfg = inrun::parse_config_file(args.config_path);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.seed_set) {
    cfg.train.seed = args.seed;
    if (!cfg.synthetic_seed_set) cfg.synthetic.seed = args.seed;
  }
  std::filesystem::create_directories(cfg.out_dir);
  return cfg;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::string curves_csv(const inrun::RunArtifacts& run, const inrun::TrainConfig& cfg) {
  std::string out = "iteration,eta,train_loss,val_loss\n";
  char buf[128];
  for (std::size_t t = 0; t < run.train_curve.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", t, cfg.eta_at(t),
                  run.train_curve[t], run.val_curve[t]);
    out += buf;
  }
  return out;
}

int cmd_train(const CommonArgs& args) {
  inrun::FullConfig cfg = load_config(args);
  inrun::ResolvedData data = inrun::resolve_dataset(cfg);
  const inrun::RunArtifacts run = inrun::train_with_attribution(cfg.train, data.examples);
  inrun::atomic_write_file(join_path(cfg.out_dir, "curves.csv"), curves_csv(run, cfg.train));
  inrun::save_checkpoint(join_path(cfg.out_dir, "model.irsv1"), cfg.train.model, run.params);
  if (!args.quiet) {
    std::cout << "trained " << cfg.train.iterations << " iterations; final train loss "
              << run.final_train_loss << ", final val loss " << run.final_val_loss << "\n";
    std::cout << "wrote curves.csv and model.irsv1 to " << cfg.out_dir << "\n";
  }
  return kExitOk;
}

int cmd_attribute(const CommonArgs& args) {
  inrun::FullConfig cfg = load_config(args);
  inrun::ResolvedData data = inrun::resolve_dataset(cfg);
  const inrun::RunArtifacts run = inrun::train_with_attribution(cfg.train, data.examples);
  inrun::atomic_write_file(join_path(cfg.out_dir, "curves.csv"), curves_csv(run, cfg.train));
  if (cfg.train.attribution == inrun::AttributionOrder::None) {
    if (!args.quiet) std::cout << "attribution = none: curves only, no ledger written\n";
    return kExitOk;
  }
  inrun::save_scores(join_path(cfg.out_dir, "scores.csv"), run.ledger, data.examples);
  const bool second = cfg.train.attribution == inrun::AttributionOrder::Second;
  const double total = second ? run.ledger.total_second() : run.ledger.total_first();
  // Efficiency makes this the predicted total validation-loss reduction.
  std::cout.precision(17);
  std::cout << "total approximated loss reduction (" << (second ? "second" : "first")
            << " order): " << total << "\n";
  if (!args.quiet) {
    std::cout << "wrote scores.csv and curves.csv to " << cfg.out_dir << "\n";
  }
  return kExitOk;
}

int cmd_verify(const CommonArgs& args, bool quick) {
  inrun::VerifyOptions options;
  options.quick = quick;
  const bool ok = inrun::run_verify_suite(std::cout, options);
  if (!ok) {
    std::cout << "verification FAILED\n";
    return kExitVerifyFailed;
  }
  std::cout << "all checks passed\n";
  return kExitOk;
}

int cmd_taylor_error(const CommonArgs& args) {
  inrun::FullConfig cfg = load_config(args);
  if (cfg.etas.empty()) {
    throw inrun::ConfigError("taylor-error: config must set 'etas'");
  }
  inrun::ResolvedData data = inrun::resolve_dataset(cfg);

  // Measure at the parameters reached after the configured number of plain
  // SGD iterations (0 iterations would be the raw init, but TrainConfig
  // requires at least one step).
  inrun::TrainConfig plain = cfg.train;
  plain.attribution = inrun::AttributionOrder::None;
  const inrun::RunArtifacts run = inrun::train_with_attribution(plain, data.examples);

  std::vector<inrun::Example> pool;
  for (const inrun::Example& ex : data.examples) {
    bool is_val = false;
    for (std::int64_t id : cfg.train.val_ids) is_val = is_val || ex.id == id;
    if (!is_val) pool.push_back(ex);
  }
  inrun::SeededRng rng(cfg.train.seed + 1);
  const auto batch_pos = inrun::sample_batch(rng, pool.size(),
                                             std::min(cfg.train.batch_size, pool.size()));
  std::vector<inrun::Example> batch;
  for (std::size_t p : batch_pos) batch.push_back(pool[p]);
  const inrun::Example* val = nullptr;
  for (const inrun::Example& ex : data.examples) {
    if (ex.id == cfg.train.val_ids.at(0)) val = &ex;
  }

  const auto rows = inrun::taylor_error_report(run.params, cfg.train.model, batch, cfg.etas,
                                               *val, cfg.subsets, cfg.trim, cfg.train.seed);
  inrun::atomic_write_file(join_path(cfg.out_dir, "taylor_error.csv"),
                           inrun::taylor_error_csv(rows));
  if (!args.quiet) {
    for (const auto& r : rows) {
      std::cout << "eta=" << r.eta << " order=" << r.order
                << " trimmed_mean_rel_err=" << r.trimmed_mean_rel_err
                << " n=" << r.n_subsets_used << "\n";
      if (r.n_subsets_used == 0) {
        std::cout << "  (flagged: every sampled subset had |U| ~ 0)\n";
      }
    }
    std::cout << "wrote taylor_error.csv to " << cfg.out_dir << "\n";
  }
  return kExitOk;
}

int cmd_clean(const CommonArgs& args) {
  inrun::FullConfig cfg = load_config(args);
  inrun::ResolvedData data = inrun::resolve_dataset(cfg);
  const inrun::CleanReport report =
      inrun::clean_and_retrain(cfg.train, data.examples, data.flip_mask);

  std::ostringstream csv;
  csv << "pool_size,removed_count,removed_fraction,flip_enrichment,threshold,"
         "iters_to_threshold_original,iters_to_threshold_cleaned,percent_fewer_iterations\n";
  csv.precision(17);
  csv << report.pool_size << "," << report.removed_count << "," << report.removed_fraction
      << "," << report.flip_enrichment << "," << report.threshold << ","
      << report.iters_to_threshold_original << "," << report.iters_to_threshold_cleaned << ","
      << report.percent_fewer_iterations << "\n";
  inrun::atomic_write_file(join_path(cfg.out_dir, "clean_report.csv"), csv.str());
  inrun::save_scores(join_path(cfg.out_dir, "scores.csv"), report.original.ledger,
                     data.examples);

  std::cout << "removed " << report.removed_count << " of " << report.pool_size
            << " training examples (" << 100.0 * report.removed_fraction << "%)\n";
  if (std::isfinite(report.flip_enrichment)) {
    std::cout << "flipped labels are " << report.flip_enrichment
              << "x enriched among removed examples\n";
  }
  std::cout << "iterations to reach original final val loss " << report.threshold << ": "
            << report.iters_to_threshold_original << " (original) vs "
            << report.iters_to_threshold_cleaned << " (cleaned)";
  if (std::isfinite(report.percent_fewer_iterations)) {
    std::cout << ", " << report.percent_fewer_iterations << "% fewer";
  }
  std::cout << "\n";
  return kExitOk;
}

int cmd_bench(const CommonArgs& args) {
  inrun::FullConfig cfg = load_config(args);
  inrun::ResolvedData data = inrun::resolve_dataset(cfg);
  const inrun::BenchReport report =
      inrun::runtime_bench(cfg.train, data.examples, cfg.bench_runs);
  inrun::atomic_write_file(join_path(cfg.out_dir, "bench.csv"), inrun::bench_csv(report));
  for (const auto& row : report.rows) {
    std::printf("%-7s median %.4fs  ratio_vs_plain %.3f  backward_passes/iter %.1f\n",
                row.mode.c_str(), row.median_seconds, row.ratio_vs_plain,
                row.backward_passes_per_iteration);
  }
  return kExitOk;
}

int cmd_rank_probe(const CommonArgs& args) {
  inrun::FullConfig cfg = load_config(args);
  if (!cfg.has_synthetic || cfg.synthetic.kind != inrun::SyntheticKind::NearDuplicateProbe) {
    throw inrun::ConfigError("rank-probe: config must set synthetic = near-duplicate-probe");
  }
  if (cfg.probe_deltas.empty()) cfg.probe_deltas = {0.0};
  if (cfg.train.attribution == inrun::AttributionOrder::None) {
    throw inrun::ConfigError("rank-probe: attribution must be first or second");
  }

  std::string csv = "delta,rank_first,rank_second,pool_size\n";
  const bool second = cfg.train.attribution == inrun::AttributionOrder::Second;
  for (double delta : cfg.probe_deltas) {
    inrun::FullConfig run_cfg = cfg;
    run_cfg.synthetic.probe_delta = delta;
    run_cfg.train.val_ids.clear();
    inrun::ResolvedData data = inrun::resolve_dataset(run_cfg);
    const inrun::RunArtifacts run =
        inrun::train_with_attribution(run_cfg.train, data.examples);

    const std::int64_t source = static_cast<std::int64_t>(run_cfg.synthetic.probe_source);
    const auto& entries = run.ledger.entries();
    const auto& src_entry = run.ledger.at(source);
    std::size_t rank_first = 1, rank_second = 1;
    for (const auto& [id, e] : entries) {
      if (id == source) continue;
      if (e.first > src_entry.first) ++rank_first;
      if (e.second > src_entry.second) ++rank_second;
    }
    char buf[128];
    if (second) {
      std::snprintf(buf, sizeof(buf), "%.17g,%zu,%zu,%zu\n", delta, rank_first, rank_second,
                    entries.size());
    } else {
      std::snprintf(buf, sizeof(buf), "%.17g,%zu,,%zu\n", delta, rank_first, entries.size());
    }
    csv += buf;
    std::cout << "delta " << delta << ": source example ranks " << rank_first
              << " (first order)";
    if (second) std::cout << ", " << rank_second << " (second order)";
    std::cout << " among " << entries.size() << " training examples\n";
  }
  inrun::atomic_write_file(join_path(cfg.out_dir, "rank_probe.csv"), csv);
  return kExitOk;
}

int cmd_compose(const CommonArgs& args) {
  inrun::FullConfig cfg = load_config(args);
  cfg.train.keep_iteration_log = true;
  if (cfg.train.attribution == inrun::AttributionOrder::None) {
    throw inrun::ConfigError("compose: attribution must be first or second");
  }
  inrun::ResolvedData data = inrun::resolve_dataset(cfg);
  const inrun::RunArtifacts run = inrun::train_with_attribution(cfg.train, data.examples);

  std::map<std::int64_t, std::string> domain_of;
  std::vector<std::string> domains;
  for (const inrun::Example& ex : data.examples) {
    if (!run.ledger.contains(ex.id)) continue;  // columns cover the pool only
    const std::string d = ex.domain.empty() ? "(none)" : ex.domain;
    domain_of[ex.id] = d;
    bool seen = false;
    for (const auto& known : domains) seen = seen || known == d;
    if (!seen) domains.push_back(d);
  }
  std::sort(domains.begin(), domains.end());
  std::map<std::string, std::size_t> col_of;
  for (std::size_t i = 0; i < domains.size(); ++i) col_of[domains[i]] = i;

  const bool second = cfg.train.attribution == inrun::AttributionOrder::Second;
  std::vector<double> cum(domains.size(), 0.0);
  std::string csv = "iteration";
  for (const auto& d : domains) csv += "," + d;
  csv += ",total\n";
  char buf[64];
  for (const auto& log : run.ledger.log()) {
    for (std::size_t k = 0; k < log.ids.size(); ++k) {
      const double v = second ? log.second[k] : log.first[k];
      cum[col_of[domain_of[log.ids[k]]]] += v;
    }
    csv += std::to_string(log.t);
    double total = 0.0;
    for (double v : cum) total += v;  // row total: exact sum of the columns
    for (double v : cum) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      csv += buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.17g\n", total);
    csv += buf;
  }
  inrun::atomic_write_file(join_path(cfg.out_dir, "compose.csv"), csv);
  if (!args.quiet) {
    std::cout << "wrote per-domain cumulative value composition for "
              << run.ledger.log().size() << " iterations to compose.csv\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"In-run training-data attribution for small SGD-trained networks"};
  app.require_subcommand(1);

  CommonArgs args;
  bool verify_quick = false;

  auto* train = app.add_subcommand("train", "Train and write loss curves plus a checkpoint");
  add_common(train, args);
  auto* attribute =
      app.add_subcommand("attribute", "Train with attribution and write the score ledger");
  add_common(attribute, args);
  auto* verify = app.add_subcommand("verify", "Run the oracle/property suite");
  add_common(verify, args, /*config_required=*/false);
  verify->add_flag("--quick", verify_quick, "Smaller instance counts");
  auto* taylor = app.add_subcommand("taylor-error", "Measure Taylor approximation error");
  add_common(taylor, args);
  auto* clean = app.add_subcommand("clean", "Remove negative-valued examples and retrain");
  add_common(clean, args);
  auto* bench = app.add_subcommand("bench", "Wall-clock comparison of attribution modes");
  add_common(bench, args);
  auto* rank = app.add_subcommand("rank-probe", "Rank of a near-duplicated training example");
  add_common(rank, args);
  auto* compose = app.add_subcommand("compose", "Per-domain value composition over iterations");
  add_common(compose, args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(args);
    if (attribute->parsed()) return cmd_attribute(args);
    if (verify->parsed()) return cmd_verify(args, verify_quick);
    if (taylor->parsed()) return cmd_taylor_error(args);
    if (clean->parsed()) return cmd_clean(args);
    if (bench->parsed()) return cmd_bench(args);
    if (rank->parsed()) return cmd_rank_probe(args);
    if (compose->parsed()) return cmd_compose(args);
  } catch (const inrun::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const inrun::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
