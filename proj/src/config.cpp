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

#include "inrun/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

namespace inrun {

namespace {

std::string trim_ws(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t next = s.find(',', pos);
    if (next == std::string::npos) {
      out.push_back(trim_ws(s.substr(pos)));
      break;
    }
    out.push_back(trim_ws(s.substr(pos, next - pos)));
    pos = next + 1;
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  const char* begin = v.c_str();
  char* end = nullptr;
  const double x = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(x)) {
    throw ConfigError("config: bad number for '" + key + "': " + v);
  }
  return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  const char* begin = v.c_str();
  char* end = nullptr;
  const unsigned long long x = std::strtoull(begin, &end, 10);
  if (end == begin || *end != '\0') {
    throw ConfigError("config: bad integer for '" + key + "': " + v);
  }
  return static_cast<std::uint64_t>(x);
}

std::int64_t parse_i64(const std::string& key, const std::string& v) {
  const char* begin = v.c_str();
  char* end = nullptr;
  const long long x = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0') {
    throw ConfigError("config: bad integer for '" + key + "': " + v);
  }
  return static_cast<std::int64_t>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: bad boolean for '" + key + "': " + v);
}

Activation parse_activation(const std::string& v) {
  if (v == "identity") return Activation::Identity;
  if (v == "relu") return Activation::Relu;
  if (v == "tanh") return Activation::Tanh;
  throw ConfigError("config: unknown activation '" + v + "'");
}

}  // namespace

FullConfig parse_config_map(const std::map<std::string, std::string>& kv) {
  FullConfig cfg;
  ModelSpec& model = cfg.train.model;
  bool bias = true;
  std::vector<Activation> acts;
  bool single_act_set = false;
  Activation single_act = Activation::Tanh;

  for (const auto& [key, raw] : kv) {
    const std::string v = trim_ws(raw);
    if (key == "seed") {
      cfg.train.seed = parse_u64(key, v);
    } else if (key == "iterations") {
      cfg.train.iterations = static_cast<std::size_t>(parse_u64(key, v));
    } else if (key == "batch_size") {
      cfg.train.batch_size = static_cast<std::size_t>(parse_u64(key, v));
    } else if (key == "lr") {
      cfg.train.lr = parse_double(key, v);
    } else if (key == "schedule") {
      if (v == "constant") {
        cfg.train.schedule = Schedule::Constant;
      } else if (v == "linear-warmup") {
        cfg.train.schedule = Schedule::LinearWarmup;
      } else {
        throw ConfigError("config: unknown schedule '" + v + "'");
      }
    } else if (key == "warmup_iters") {
      cfg.train.warmup_iters = static_cast<std::size_t>(parse_u64(key, v));
    } else if (key == "layers") {
      model.dims.clear();
      for (const std::string& tok : split_commas(v)) {
        model.dims.push_back(static_cast<std::size_t>(parse_u64(key, tok)));
      }
    } else if (key == "activation") {
      const auto toks = split_commas(v);
      if (toks.size() == 1) {
        single_act = parse_activation(toks[0]);
        single_act_set = true;
      } else {
        acts.clear();
        for (const std::string& tok : toks) acts.push_back(parse_activation(tok));
      }
    } else if (key == "loss") {
      if (v == "mse") {
        model.loss = Loss::Mse;
      } else if (v == "softmax-ce") {
        model.loss = Loss::SoftmaxCrossEntropy;
      } else {
        throw ConfigError("config: unknown loss '" + v + "'");
      }
    } else if (key == "seq_len") {
      model.seq_len = static_cast<std::size_t>(parse_u64(key, v));
    } else if (key == "bias") {
      bias = parse_bool(key, v);
    } else if (key == "attribution") {
      if (v == "none") {
        cfg.train.attribution = AttributionOrder::None;
      } else if (v == "first") {
        cfg.train.attribution = AttributionOrder::First;
      } else if (v == "second") {
        cfg.train.attribution = AttributionOrder::Second;
      } else if (v == "naive") {
        cfg.train.attribution = AttributionOrder::NaiveFirst;
      } else {
        throw ConfigError("config: unknown attribution order '" + v + "'");
      }
    } else if (key == "val_ids") {
      cfg.train.val_ids.clear();
      for (const std::string& tok : split_commas(v)) {
        cfg.train.val_ids.push_back(parse_i64(key, tok));
      }
    } else if (key == "holdout_ids") {
      cfg.train.holdout_ids.clear();
      for (const std::string& tok : split_commas(v)) {
        cfg.train.holdout_ids.push_back(parse_i64(key, tok));
      }
    } else if (key == "keep_iteration_log") {
      cfg.train.keep_iteration_log = parse_bool(key, v);
    } else if (key == "dataset_path") {
      cfg.dataset_path = v;
    } else if (key == "out_dir") {
      cfg.out_dir = v;
    } else if (key == "synthetic") {
      cfg.has_synthetic = true;
      if (v == "gaussian-mixture") {
        cfg.synthetic.kind = SyntheticKind::GaussianMixture;
      } else if (v == "domain-mixture") {
        cfg.synthetic.kind = SyntheticKind::DomainMixture;
      } else if (v == "near-duplicate-probe") {
        cfg.synthetic.kind = SyntheticKind::NearDuplicateProbe;
      } else {
        throw ConfigError("config: unknown synthetic kind '" + v + "'");
      }
    } else if (key == "synthetic_n") {
      cfg.synthetic.n = static_cast<std::size_t>(parse_u64(key, v));
    } else if (key == "synthetic_dim") {
      cfg.synthetic.dim = static_cast<std::size_t>(parse_u64(key, v));
    } else if (key == "synthetic_classes") {
      cfg.synthetic.classes = static_cast<std::size_t>(parse_u64(key, v));
    } else if (key == "synthetic_noise_rate") {
      cfg.synthetic.noise_rate = parse_double(key, v);
    } else if (key == "synthetic_domains") {
      cfg.synthetic.domain_proportions.clear();
      for (const std::string& tok : split_commas(v)) {
        cfg.synthetic.domain_proportions.push_back(parse_double(key, tok));
      }
    } else if (key == "synthetic_seed") {
      cfg.synthetic.seed = parse_u64(key, v);
      cfg.synthetic_seed_set = true;
    } else if (key == "probe_index") {
      cfg.synthetic.probe_source = static_cast<std::size_t>(parse_u64(key, v));
    } else if (key == "probe_deltas") {
      cfg.probe_deltas.clear();
      for (const std::string& tok : split_commas(v)) {
        cfg.probe_deltas.push_back(parse_double(key, tok));
      }
    } else if (key == "etas") {
      cfg.etas.clear();
      for (const std::string& tok : split_commas(v)) {
        cfg.etas.push_back(parse_double(key, tok));
      }
    } else if (key == "subsets") {
      cfg.subsets = static_cast<std::size_t>(parse_u64(key, v));
    } else if (key == "trim") {
      cfg.trim = parse_double(key, v);
    } else if (key == "bench_runs") {
      cfg.bench_runs = static_cast<std::size_t>(parse_u64(key, v));
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }

  if (!model.dims.empty()) {
    const std::size_t boundaries = model.dims.size() >= 2 ? model.dims.size() - 2 : 0;
    if (!acts.empty()) {
      if (acts.size() != boundaries) {
        throw ConfigError("config: activation list must have one entry per hidden boundary");
      }
      model.hidden_acts = acts;
    } else {
      model.hidden_acts.assign(boundaries, single_act_set ? single_act : Activation::Tanh);
    }
    model.has_bias.assign(model.dims.size() - 1, bias);
  }
  if (!cfg.synthetic_seed_set) cfg.synthetic.seed = cfg.train.seed;
  return cfg;
}

FullConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    const std::string t = trim_ws(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: expected 'key = value' at line " + std::to_string(line_no));
    }
    const std::string key = trim_ws(t.substr(0, eq));
    const std::string value = trim_ws(t.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config: empty key at line " + std::to_string(line_no));
    }
    if (kv.count(key) != 0) {
      throw ConfigError("config: duplicate key '" + key + "' at line " + std::to_string(line_no));
    }
    kv[key] = value;
  }
  return parse_config_map(kv);
}

ResolvedData resolve_dataset(FullConfig& config) {
  if (config.has_synthetic && !config.dataset_path.empty()) {
    throw ConfigError("config: set either dataset_path or synthetic, not both");
  }
  ResolvedData out;
  if (config.has_synthetic) {
    GeneratedDataset gen = generate(config.synthetic);
    out.examples = std::move(gen.examples);
    out.flip_mask = std::move(gen.flip_mask);
    if (config.train.val_ids.empty()) config.train.val_ids = gen.val_ids;
    // Every generated validation example stays out of the training pool even
    // when attribution targets only some of them.
    if (config.train.holdout_ids.empty()) config.train.holdout_ids = gen.val_ids;
  } else if (!config.dataset_path.empty()) {
    out.examples = load_csv(config.dataset_path);
  } else {
    throw ConfigError("config: need dataset_path or synthetic");
  }
  return out;
}

}  // namespace inrun
