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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "matu/codec.hpp"
#include "matu/local_training.hpp"
#include "matu/random.hpp"
#include "matu/server.hpp"
#include "matu/task_suite.hpp"
#include "matu/unification.hpp"

namespace matu {

enum class Algorithm { kMatu, kFedAvg, kFedProx };

struct FederationConfig {
  std::size_t num_clients = 1;
  std::size_t rounds = 1;
  std::size_t num_tasks = 1;
  std::size_t local_epochs = 1;
  double participation = 1.0;
  double task_concentration = 0.1;
  double data_concentration = 0.1;
  Algorithm algorithm = Algorithm::kMatu;
  AggregationConfig aggregation;
  TrainerConfig trainer;  // trainer.local_steps mirrors local_epochs; seed is derived per pair
  double mu_prox = 0.01;
  std::uint64_t master_seed = 0;
  std::uint64_t samples_per_task = 400;
  double allocation_threshold = 0.5;  // in units of 1/N
  // Fixed allocation: client n holds task_groups[n % size]. Empty means Dirichlet.
  std::vector<std::vector<TaskId>> task_groups;
  // Task suite: a file path, or empty for the built-in planted generator.
  std::string suite_path;
  std::size_t dim = 64;
  std::size_t clusters = 3;
  std::uint64_t suite_seed = 7;
  bool count_downlink = false;

  friend bool operator==(const FederationConfig&, const FederationConfig&) = default;

  std::size_t clients_per_round() const {
    return static_cast<std::size_t>(
        std::ceil(participation * static_cast<double>(num_clients) - 1e-12));
  }

  void validate() const {
    if (num_clients == 0) throw std::invalid_argument("num_clients must be >= 1");
    if (num_tasks == 0) throw std::invalid_argument("num_tasks must be >= 1");
    if (local_epochs == 0) throw std::invalid_argument("local_epochs must be >= 1");
    if (!(participation > 0.0 && participation <= 1.0)) {
      throw std::invalid_argument("participation must lie in (0, 1]");
    }
    if (clients_per_round() < 1) throw std::invalid_argument("participation selects no client");
    if (!(task_concentration >= 0.0) || !std::isfinite(task_concentration)) {
      throw std::invalid_argument("task_concentration must be >= 0");
    }
    if (!(data_concentration >= 0.0) || !std::isfinite(data_concentration)) {
      throw std::invalid_argument("data_concentration must be >= 0");
    }
    if (!(trainer.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(trainer.sample_noise_std >= 0.0)) {
      throw std::invalid_argument("sample_noise_std must be >= 0");
    }
    if (!(mu_prox >= 0.0)) throw std::invalid_argument("mu_prox must be >= 0");
    if (dim == 0) throw std::invalid_argument("dim must be >= 1");
    if (!(allocation_threshold > 0.0)) {
      throw std::invalid_argument("allocation_threshold must be > 0");
    }
    aggregation.validate();
    for (const auto& g : task_groups) {
      if (g.empty()) throw std::invalid_argument("task_groups: empty group");
      for (TaskId t : g) {
        if (t >= num_tasks) {
          throw std::invalid_argument("task_groups: task " + std::to_string(t) + " out of range");
        }
      }
    }
  }
};

// --- allocation -----------------------------------------------------------------

// Per task, client shares ~ Dir(zeta_t); a client holds the task when its
// share exceeds threshold/N. A repair pass gives every client at least one
// task. zeta_t == 0 is the disjoint single-task regime.
inline AllocationMatrix dirichlet_allocate_tasks(std::size_t num_clients, std::size_t num_tasks,
                                                 double zeta_t, std::uint64_t seed,
                                                 double threshold = 0.5) {
  if (num_clients == 0 || num_tasks == 0) {
    throw std::invalid_argument("dirichlet_allocate_tasks: N and T must be >= 1");
  }
  AllocationMatrix a(num_clients, num_tasks);
  if (zeta_t == 0.0) {
    if (num_tasks > num_clients) {
      throw std::invalid_argument("dirichlet_allocate_tasks: disjoint single-task allocation needs "
                                  "T <= N (T=" + std::to_string(num_tasks) +
                                  ", N=" + std::to_string(num_clients) + ")");
    }
    rng::Stream s(rng::derive_seed(seed, rng::Purpose::kTaskAllocation, {0}));
    std::vector<std::size_t> order(num_clients);
    for (std::size_t n = 0; n < num_clients; ++n) order[n] = n;
    for (std::size_t i = num_clients; i > 1; --i) std::swap(order[i - 1], order[s.below(i)]);
    for (std::size_t i = 0; i < num_clients; ++i) a.assign(order[i], i % num_tasks);
    return a;
  }
  if (!(zeta_t > 0.0)) throw std::invalid_argument("dirichlet_allocate_tasks: zeta_t must be >= 0");

  const double cut = threshold / static_cast<double>(num_clients);
  std::vector<std::vector<double>> share(num_tasks);
  for (std::size_t t = 0; t < num_tasks; ++t) {
    rng::Stream s(rng::derive_seed(seed, rng::Purpose::kTaskAllocation, {1, t}));
    share[t] = s.dirichlet(num_clients, zeta_t);
    std::size_t best = 0;
    bool any = false;
    for (std::size_t n = 0; n < num_clients; ++n) {
      if (share[t][n] > share[t][best]) best = n;
      if (share[t][n] > cut) {
        a.assign(n, t);
        any = true;
      }
    }
    if (!any) a.assign(best, t);
  }
  for (std::size_t n = 0; n < num_clients; ++n) {
    if (!a.tasks_of(n).empty()) continue;
    std::size_t best = 0;
    for (std::size_t t = 1; t < num_tasks; ++t) {
      if (share[t][n] > share[best][n]) best = t;
    }
    a.assign(n, best);
  }
  return a;
}

inline AllocationMatrix allocation_from_groups(std::size_t num_clients, std::size_t num_tasks,
                                               const std::vector<std::vector<TaskId>>& groups) {
  if (groups.empty()) throw std::invalid_argument("allocation_from_groups: no groups");
  AllocationMatrix a(num_clients, num_tasks);
  for (std::size_t n = 0; n < num_clients; ++n) {
    for (TaskId t : groups[n % groups.size()]) a.assign(n, static_cast<std::size_t>(t));
  }
  a.validate();
  return a;
}

// Dir(zeta_c) shares of `total` samples; everyone gets one sample first, the
// rest is floored with the remainder going to the largest fractional parts.
// zeta_c == 0 puts every spare sample on one client.
inline std::map<ClientId, std::uint64_t> dirichlet_split_data(const std::vector<ClientId>& clients,
                                                              double zeta_c, std::uint64_t total,
                                                              std::uint64_t seed) {
  if (clients.empty()) throw std::invalid_argument("dirichlet_split_data: no clients");
  if (total < clients.size()) {
    throw std::invalid_argument("dirichlet_split_data: total_samples " + std::to_string(total) +
                                " < number of clients " + std::to_string(clients.size()));
  }
  rng::Stream s(seed);
  const std::size_t k = clients.size();
  std::vector<double> p;
  if (zeta_c == 0.0) {
    p.assign(k, 0.0);
    p[s.below(k)] = 1.0;
  } else {
    p = s.dirichlet(k, zeta_c);
  }
  const std::uint64_t spare = total - k;
  std::vector<std::uint64_t> size(k, 1);
  std::vector<std::pair<double, std::size_t>> frac;
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double exact = p[i] * static_cast<double>(spare);
    const auto whole = std::min<std::uint64_t>(static_cast<std::uint64_t>(std::floor(exact)), spare - assigned);
    size[i] += whole;
    assigned += whole;
    frac.emplace_back(exact - std::floor(exact), i);
  }
  std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (std::size_t i = 0; assigned < spare; i = (i + 1) % k) {
    ++size[frac[i].second];
    ++assigned;
  }
  std::map<ClientId, std::uint64_t> out;
  for (std::size_t i = 0; i < k; ++i) out.emplace(clients[i], size[i]);
  return out;
}

// --- communication accounting -------------------------------------------------------

// Per-task baseline payload: header, then per task u64 task-id + vector encoding.
constexpr std::size_t per_task_vectors_bytes(std::size_t dim, std::size_t num_tasks) {
  return kBundleHeaderBytes + num_tasks * (8 + wire::vector_bytes(dim));
}

inline std::vector<std::uint8_t> encode_task_vectors(const std::map<TaskId, TaskVector>& vectors,
                                                     ClientId client, std::uint32_t round) {
  wire::ByteWriter w;
  write_header(w, client, round, vectors.size());
  for (const auto& [id, v] : vectors) {
    w.u64(id);
    wire::write_vector(w, v);
  }
  return std::move(w).take();
}

struct CommCost {
  std::size_t matu_bytes = 0;
  std::size_t baseline_bytes = 0;
  double ratio() const { return static_cast<double>(matu_bytes) / static_cast<double>(baseline_bytes); }
};

// One client's upload for a round: MaTU sends one vector plus k masks and k
// scalers; per-task baselines send k vectors. With include_downlink the
// symmetric downlink is added.
inline CommCost comm_cost(std::size_t dim, std::size_t num_tasks, bool include_downlink = false) {
  if (dim == 0 || num_tasks == 0) throw std::invalid_argument("comm_cost: d and k must be >= 1");
  const std::size_t factor = include_downlink ? 2 : 1;
  return CommCost{factor * bundle_bytes(dim, num_tasks),
                  factor * per_task_vectors_bytes(dim, num_tasks)};
}

// --- simulation ---------------------------------------------------------------------

struct RoundLog {
  std::uint32_t round = 0;
  std::vector<ClientId> selected;
  std::vector<double> distance;        // per task, after the round
  std::vector<double> l1_same_task;    // per task; 0 when not aggregated this round
  std::vector<double> l1_cross_task;   // per task
  std::map<ClientId, std::uint64_t> up_bytes;
  std::map<ClientId, std::uint64_t> down_bytes;
  std::vector<TaskRoundRecord> transcript;
  std::optional<double> wall_clock_ms;
};

struct TaskReport {
  TaskId task = 0;
  int cluster = 0;
  double initial_distance = 0.0;
  double final_distance = 0.0;
  double normalized_performance = 0.0;
};

struct Report {
  std::string algorithm;
  std::size_t rounds_run = 0;
  std::vector<TaskReport> tasks;
  double mean_distance = 0.0;
  double mean_normalized_performance = 0.0;
  std::uint64_t total_up_bytes = 0;
  std::uint64_t total_down_bytes = 0;
  std::map<ClientId, std::uint64_t> bytes_per_client;  // uplink, plus downlink when counted
  double bytes_per_task_round = 0.0;                   // bpr analogue
};

inline std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kMatu: return "matu";
    case Algorithm::kFedAvg: return "fedavg";
    case Algorithm::kFedProx: return "fedprox";
  }
  return "unknown";
}

inline double normalized_performance(double distance, double initial) {
  if (initial == 0.0) return distance == 0.0 ? 1.0 : 0.0;
  return std::clamp(1.0 - distance / initial, 0.0, 1.0);
}

// Round-by-round federation. Holds the task-level server state (MaTU) or the
// single global vector (baselines), the allocation and the per-client
// dataset sizes; clients keep nothing between rounds.
class Simulation {
 public:
  Simulation(FederationConfig cfg, TaskSuite suite) : cfg_(std::move(cfg)), suite_(std::move(suite)) {
    cfg_.trainer.local_steps = cfg_.local_epochs;
    cfg_.validate();
    if (suite_.tasks.size() != cfg_.num_tasks) {
      throw std::invalid_argument("suite has " + std::to_string(suite_.tasks.size()) +
                                  " tasks but num_tasks = " + std::to_string(cfg_.num_tasks));
    }
    if (suite_.dim == 0) throw std::invalid_argument("suite dimension is zero");
    if (cfg_.trainer.learning_rate >= 2.0 / (suite_.max_curvature() + proximal_mu())) {
      throw std::invalid_argument("learning_rate violates the stability bound 2/max curvature");
    }
    allocation_ = cfg_.task_groups.empty()
                      ? dirichlet_allocate_tasks(cfg_.num_clients, cfg_.num_tasks,
                                                 cfg_.task_concentration, cfg_.master_seed,
                                                 cfg_.allocation_threshold)
                      : allocation_from_groups(cfg_.num_clients, cfg_.num_tasks, cfg_.task_groups);
    allocation_.validate();
    for (TaskId t = 0; t < cfg_.num_tasks; ++t) {
      const auto holders = allocation_.clients_of(t);
      const std::uint64_t total = std::max<std::uint64_t>(cfg_.samples_per_task, holders.size());
      const auto split = dirichlet_split_data(
          holders, cfg_.data_concentration, total,
          rng::derive_seed(cfg_.master_seed, rng::Purpose::kDataSplit, {t}));
      for (const auto& [n, size] : split) samples_[{n, t}] = size;
    }
    state_ = TaskState::initial(suite_.dim, cfg_.num_tasks);
    global_ = TaskVector::zeros(suite_.dim);
  }

  const FederationConfig& config() const noexcept { return cfg_; }
  const TaskSuite& suite() const noexcept { return suite_; }
  const AllocationMatrix& allocation() const noexcept { return allocation_; }
  const TaskState& task_state() const noexcept { return state_; }
  const TaskVector& global_vector() const noexcept { return global_; }
  const SimilarityMatrix& last_similarity() const noexcept { return similarity_; }
  std::uint32_t next_round() const noexcept { return round_; }
  std::uint64_t samples(ClientId n, TaskId t) const { return samples_.at({n, t}); }

  // The vector the federation currently offers for task t.
  const TaskVector& task_model(TaskId t) const {
    return cfg_.algorithm == Algorithm::kMatu ? state_.at(t).vector : global_;
  }

  std::vector<double> distances() const {
    std::vector<double> out;
    for (const auto& task : suite_.tasks) out.push_back(distance_to_optimum(task_model(task.id), task));
    return out;
  }

  std::vector<ClientId> sample_clients(std::uint32_t round) const {
    const std::size_t n = cfg_.num_clients;
    const std::size_t m = cfg_.clients_per_round();
    std::vector<ClientId> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<ClientId>(i);
    if (m < n) {
      rng::Stream s(rng::derive_seed(cfg_.master_seed, rng::Purpose::kClientSampling, {round}));
      for (std::size_t i = 0; i < m; ++i) std::swap(order[i], order[i + s.below(n - i)]);
    }
    order.resize(m);
    std::sort(order.begin(), order.end());
    return order;
  }

  RoundLog run_round(bool time_it = false) {
    const auto started = std::chrono::steady_clock::now();
    RoundLog log;
    log.round = round_;
    log.selected = sample_clients(round_);
    log.l1_same_task.assign(cfg_.num_tasks, 0.0);
    log.l1_cross_task.assign(cfg_.num_tasks, 0.0);

    if (cfg_.algorithm == Algorithm::kMatu) {
      run_matu_round(log);
    } else {
      run_baseline_round(log);
    }
    log.distance = distances();
    if (time_it) {
      log.wall_clock_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    }
    ++round_;
    return log;
  }

 private:
  double proximal_mu() const { return cfg_.algorithm == Algorithm::kFedProx ? cfg_.mu_prox : 0.0; }

  TrainerConfig trainer_for(ClientId n, TaskId t) const {
    TrainerConfig tc = cfg_.trainer;
    tc.seed = rng::derive_seed(cfg_.master_seed, rng::Purpose::kLocalTraining, {round_, n, t});
    return tc;
  }

  void run_matu_round(RoundLog& log) {
    std::vector<ClientUpdate> updates;
    for (ClientId n : log.selected) {
      const std::vector<TaskId> tasks = allocation_.tasks_of(n);
      const UnifiedBundle down = form_client_payload(tasks, state_);
      log.down_bytes[n] = encode_bundle(down, n, round_).size();

      std::map<TaskId, TaskVector> trained;
      ClientUpdate u;
      u.client = n;
      u.round = round_;
      for (TaskId t : tasks) {
        const TaskVector start = modulate(down.unified, modulators_for(down, t));
        const std::uint64_t size = samples(n, t);
        trained.emplace(t, local_train(start, suite_.task(t), trainer_for(n, t), size).task_vector);
        u.dataset_sizes.emplace(t, size);
      }
      u.bundle = build_bundle(trained);
      log.up_bytes[n] = encode_bundle(u.bundle, n, round_).size();
      updates.push_back(std::move(u));
    }

    ServerRoundResult result = run_server_round(std::move(updates), allocation_, state_, cfg_.aggregation);
    for (const auto& rec : result.transcript) {
      log.l1_same_task[rec.task] = rec.l1_same_task;
      log.l1_cross_task[rec.task] = rec.l1_cross_task;
    }
    log.transcript = std::move(result.transcript);
    state_ = std::move(result.state);
    similarity_ = std::move(result.similarity);
  }

  void run_baseline_round(RoundLog& log) {
    std::vector<std::pair<TaskVector, double>> uploads;
    for (ClientId n : log.selected) {
      const std::vector<TaskId> tasks = allocation_.tasks_of(n);
      std::map<TaskId, TaskVector> down;
      for (TaskId t : tasks) down.emplace(t, global_);
      log.down_bytes[n] = encode_task_vectors(down, n, round_).size();

      std::map<TaskId, TaskVector> trained;
      for (TaskId t : tasks) {
        const std::uint64_t size = samples(n, t);
        const TrainerConfig tc = trainer_for(n, t);
        LocalResult r = cfg_.algorithm == Algorithm::kFedProx
                            ? fedprox_local_step(global_, global_, suite_.task(t), cfg_.mu_prox, tc, size)
                            : local_train(global_, suite_.task(t), tc, size);
        uploads.emplace_back(r.task_vector, static_cast<double>(size));
        trained.emplace(t, std::move(r.task_vector));
      }
      log.up_bytes[n] = encode_task_vectors(trained, n, round_).size();
    }
    if (!uploads.empty()) global_ = fedavg_aggregate(uploads);
    const double l1 = l1_norm(global_);
    for (TaskId t = 0; t < cfg_.num_tasks; ++t) log.l1_same_task[t] = l1;
  }

  FederationConfig cfg_;
  TaskSuite suite_;
  AllocationMatrix allocation_;
  std::map<std::pair<ClientId, TaskId>, std::uint64_t> samples_;
  TaskState state_;
  TaskVector global_;
  SimilarityMatrix similarity_;
  std::uint32_t round_ = 0;
};

inline Report build_report(const Simulation& sim, const std::vector<RoundLog>& logs) {
  const auto& cfg = sim.config();
  Report rep;
  rep.algorithm = algorithm_name(cfg.algorithm);
  rep.rounds_run = logs.size();
  const std::vector<double> dist = sim.distances();
  double dist_sum = 0.0;
  double perf_sum = 0.0;
  for (const auto& task : sim.suite().tasks) {
    TaskReport tr;
    tr.task = task.id;
    tr.cluster = task.cluster;
    tr.initial_distance = distance_to_optimum(TaskVector::zeros(task.optimum.dim()), task);
    tr.final_distance = dist[task.id];
    tr.normalized_performance = normalized_performance(tr.final_distance, tr.initial_distance);
    dist_sum += tr.final_distance;
    perf_sum += tr.normalized_performance;
    rep.tasks.push_back(tr);
  }
  const auto t = static_cast<double>(rep.tasks.size());
  rep.mean_distance = dist_sum / t;
  rep.mean_normalized_performance = perf_sum / t;

  std::uint64_t task_rounds = 0;
  for (const auto& log : logs) {
    for (const auto& [n, b] : log.up_bytes) {
      rep.total_up_bytes += b;
      rep.bytes_per_client[n] += b;
      task_rounds += sim.allocation().tasks_of(n).size();
    }
    for (const auto& [n, b] : log.down_bytes) {
      rep.total_down_bytes += b;
      if (cfg.count_downlink) rep.bytes_per_client[n] += b;
    }
  }
  const std::uint64_t counted = rep.total_up_bytes + (cfg.count_downlink ? rep.total_down_bytes : 0);
  rep.bytes_per_task_round =
      task_rounds == 0 ? 0.0 : static_cast<double>(counted) / static_cast<double>(task_rounds);
  return rep;
}

struct SimulationResult {
  std::vector<RoundLog> logs;
  Report report;
  SimilarityMatrix final_similarity;
};

// Runs every round; `on_round`, when set, sees each log as soon as it exists
// so callers can flush partial output before a later round fails.
inline SimulationResult run_simulation(const FederationConfig& cfg, TaskSuite suite,
                                       const std::function<void(const RoundLog&)>& on_round = {},
                                       bool time_rounds = false) {
  Simulation sim(cfg, std::move(suite));
  SimulationResult out;
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    out.logs.push_back(sim.run_round(time_rounds));
    if (on_round) on_round(out.logs.back());
  }
  out.report = build_report(sim, out.logs);
  out.final_similarity = sim.last_similarity();
  return out;
}

// Built-in planted suite for a config without a suite file.
inline TaskSuite default_suite(const FederationConfig& cfg) {
  PlantedSpec p;
  p.seed = cfg.suite_seed;
  p.clusters = std::min<std::size_t>(cfg.clusters, cfg.num_tasks);
  return build_suite(planted_suite_spec(cfg.num_tasks, cfg.dim, p));
}

}  // namespace matu
