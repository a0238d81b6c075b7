// Copyright 2026 The matu-sim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "matu/federation.hpp"
#include "matu/text.hpp"

// Key-value configuration text:
//
//   # comment
//   num_clients = 10
//   task_groups = 0,1,2; 3,4,5; 6,7
//
// num_clients, rounds and num_tasks are required; everything else has a
// default. Unknown or repeated keys are rejected.
namespace matu {

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::invalid_argument("config field '" + field + "': " + message), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

inline std::string cross_task_name(CrossTaskMode m) {
  switch (m) {
    case CrossTaskMode::kSimilarityWeighted: return "similarity_weighted";
    case CrossTaskMode::kUniform: return "uniform";
    case CrossTaskMode::kOff: return "off";
  }
  return "off";
}

inline CrossTaskMode parse_cross_task(std::string_view v) {
  if (v == "similarity_weighted" || v == "sim") return CrossTaskMode::kSimilarityWeighted;
  if (v == "uniform") return CrossTaskMode::kUniform;
  if (v == "off") return CrossTaskMode::kOff;
  throw ConfigError("cross_task", "expected similarity_weighted|sim|uniform|off, got '" + std::string(v) + "'");
}

inline Algorithm parse_algorithm(std::string_view v) {
  if (v == "matu") return Algorithm::kMatu;
  if (v == "fedavg" || v == "fedavg_multi") return Algorithm::kFedAvg;
  if (v == "fedprox" || v == "fedprox_multi") return Algorithm::kFedProx;
  throw ConfigError("algorithm", "expected matu|fedavg|fedprox, got '" + std::string(v) + "'");
}

inline std::vector<std::vector<TaskId>> parse_task_groups(std::string_view v) {
  std::vector<std::vector<TaskId>> groups;
  if (text::trim(v).empty()) return groups;
  for (const auto& g : text::split(v, ';')) {
    std::vector<TaskId> group;
    for (const auto& t : text::split(g, ',')) group.push_back(text::parse_uint(t, "config field 'task_groups'"));
    groups.push_back(std::move(group));
  }
  return groups;
}

inline std::string format_task_groups(const std::vector<std::vector<TaskId>>& groups) {
  std::string out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (i > 0) out += "; ";
    for (std::size_t k = 0; k < groups[i].size(); ++k) {
      if (k > 0) out += ",";
      out += std::to_string(groups[i][k]);
    }
  }
  return out;
}

namespace detail {

inline bool parse_bool(const std::string& key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true|false, got '" + std::string(v) + "'");
}

}  // namespace detail

inline FederationConfig parse_config(std::string_view source) {
  std::map<std::string, std::string> kv;
  std::size_t line_no = 0;
  for (const auto& raw : text::split_lines(source)) {
    ++line_no;
    const std::string line = text::strip_comment(raw);
    if (line.empty()) continue;
    auto [key, value] = text::split_kv(line, "config line " + std::to_string(line_no));
    if (key.empty()) throw ConfigError("?", "empty key on line " + std::to_string(line_no));
    if (!kv.emplace(key, value).second) throw ConfigError(key, "given more than once");
  }

  FederationConfig cfg;
  std::set<std::string> used;
  auto take = [&](const char* key) -> const std::string* {
    used.insert(key);
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto uint_field = [&](const char* key, auto& dst, bool required = false) {
    if (const auto* v = take(key)) {
      try {
        dst = static_cast<std::remove_reference_t<decltype(dst)>>(text::parse_uint(*v, key));
      } catch (const std::invalid_argument&) {
        throw ConfigError(key, "'" + *v + "' is not a non-negative integer");
      }
    } else if (required) {
      throw ConfigError(key, "required field is missing");
    }
  };
  auto real_field = [&](const char* key, double& dst) {
    if (const auto* v = take(key)) {
      try {
        dst = text::parse_double(*v, key);
      } catch (const std::invalid_argument&) {
        throw ConfigError(key, "'" + *v + "' is not a finite number");
      }
    }
  };

  uint_field("num_clients", cfg.num_clients, true);
  uint_field("rounds", cfg.rounds, true);
  uint_field("num_tasks", cfg.num_tasks, true);
  uint_field("local_epochs", cfg.local_epochs);
  real_field("participation", cfg.participation);
  real_field("task_concentration", cfg.task_concentration);
  real_field("data_concentration", cfg.data_concentration);
  if (const auto* v = take("algorithm")) cfg.algorithm = parse_algorithm(*v);
  real_field("rho", cfg.aggregation.rho);
  real_field("epsilon", cfg.aggregation.epsilon);
  uint_field("kappa", cfg.aggregation.kappa);
  if (const auto* v = take("cross_task")) cfg.aggregation.cross_task = parse_cross_task(*v);
  if (const auto* v = take("combine")) {
    if (*v == "sum") cfg.aggregation.combine = CombineMode::kSum;
    else if (*v == "mean") cfg.aggregation.combine = CombineMode::kMean;
    else throw ConfigError("combine", "expected sum|mean, got '" + *v + "'");
  }
  real_field("learning_rate", cfg.trainer.learning_rate);
  real_field("sample_noise_std", cfg.trainer.sample_noise_std);
  real_field("mu_prox", cfg.mu_prox);
  uint_field("master_seed", cfg.master_seed);
  uint_field("samples_per_task", cfg.samples_per_task);
  real_field("allocation_threshold", cfg.allocation_threshold);
  if (const auto* v = take("task_groups")) {
    try {
      cfg.task_groups = parse_task_groups(*v);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError("task_groups", e.what());
    }
  }
  if (const auto* v = take("suite")) {
    cfg.suite_path = *v;
    for (const char* key : {"dim", "clusters", "suite_seed"}) {
      if (kv.contains(key)) throw ConfigError(key, "only applies to the built-in suite, not with 'suite'");
    }
  }
  uint_field("dim", cfg.dim);
  uint_field("clusters", cfg.clusters);
  uint_field("suite_seed", cfg.suite_seed);
  if (const auto* v = take("count_downlink")) cfg.count_downlink = detail::parse_bool("count_downlink", *v);

  for (const auto& [key, value] : kv) {
    if (!used.contains(key)) throw ConfigError(key, "unknown key");
  }

  // Range checks, reported against the offending field.
  auto check = [](bool ok, const char* field, const std::string& msg) {
    if (!ok) throw ConfigError(field, msg);
  };
  check(cfg.num_clients >= 1, "num_clients", "must be >= 1");
  check(cfg.num_tasks >= 1, "num_tasks", "must be >= 1");
  check(cfg.local_epochs >= 1, "local_epochs", "must be >= 1");
  check(cfg.participation > 0.0 && cfg.participation <= 1.0, "participation", "must lie in (0, 1]");
  check(cfg.task_concentration >= 0.0, "task_concentration", "must be >= 0");
  check(cfg.data_concentration >= 0.0, "data_concentration", "must be >= 0");
  check(cfg.aggregation.rho >= 0.0 && cfg.aggregation.rho <= 1.0, "rho", "must lie in [0, 1]");
  check(cfg.aggregation.epsilon >= 0.0 && cfg.aggregation.epsilon <= 1.0, "epsilon", "must lie in [0, 1]");
  check(cfg.trainer.learning_rate > 0.0, "learning_rate", "must be > 0");
  check(cfg.trainer.sample_noise_std >= 0.0, "sample_noise_std", "must be >= 0");
  check(cfg.mu_prox >= 0.0, "mu_prox", "must be >= 0");
  check(cfg.allocation_threshold > 0.0, "allocation_threshold", "must be > 0");
  check(cfg.dim >= 1, "dim", "must be >= 1");
  check(cfg.clusters >= 1 && cfg.clusters <= 3, "clusters", "must lie in [1, 3]");
  for (const auto& g : cfg.task_groups) {
    check(!g.empty(), "task_groups", "empty group");
    for (TaskId t : g) check(t < cfg.num_tasks, "task_groups", "task " + std::to_string(t) + " >= num_tasks");
  }
  cfg.trainer.local_steps = cfg.local_epochs;
  return cfg;
}

// Canonical form: every key, fixed order, shortest round-trip numbers.
inline std::string emit_config(const FederationConfig& cfg) {
  std::ostringstream out;
  auto line = [&](const char* key, const std::string& value) { out << key << " = " << value << "\n"; };
  auto real = [](double v) { return text::format_double(v); };
  line("num_clients", std::to_string(cfg.num_clients));
  line("rounds", std::to_string(cfg.rounds));
  line("num_tasks", std::to_string(cfg.num_tasks));
  line("local_epochs", std::to_string(cfg.local_epochs));
  line("participation", real(cfg.participation));
  line("task_concentration", real(cfg.task_concentration));
  line("data_concentration", real(cfg.data_concentration));
  line("algorithm", algorithm_name(cfg.algorithm));
  line("rho", real(cfg.aggregation.rho));
  line("epsilon", real(cfg.aggregation.epsilon));
  line("kappa", std::to_string(cfg.aggregation.kappa));
  line("cross_task", cross_task_name(cfg.aggregation.cross_task));
  line("combine", cfg.aggregation.combine == CombineMode::kSum ? "sum" : "mean");
  line("learning_rate", real(cfg.trainer.learning_rate));
  line("sample_noise_std", real(cfg.trainer.sample_noise_std));
  line("mu_prox", real(cfg.mu_prox));
  line("master_seed", std::to_string(cfg.master_seed));
  line("samples_per_task", std::to_string(cfg.samples_per_task));
  line("allocation_threshold", real(cfg.allocation_threshold));
  if (!cfg.task_groups.empty()) line("task_groups", format_task_groups(cfg.task_groups));
  if (!cfg.suite_path.empty()) {
    line("suite", cfg.suite_path);
  } else {
    line("dim", std::to_string(cfg.dim));
    line("clusters", std::to_string(cfg.clusters));
    line("suite_seed", std::to_string(cfg.suite_seed));
  }
  line("count_downlink", cfg.count_downlink ? "true" : "false");
  return out.str();
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The configured suite: a suite file (relative paths resolve against
// `base_dir`) or the built-in planted generator.
inline TaskSuite load_suite(const FederationConfig& cfg, const std::string& base_dir = "") {
  if (cfg.suite_path.empty()) return default_suite(cfg);
  std::string path = cfg.suite_path;
  if (!base_dir.empty() && !path.empty() && path.front() != '/') path = base_dir + "/" + path;
  return build_suite(parse_suite(read_text_file(path)));
}

}  // namespace matu
