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
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "matu/task_vector.hpp"
#include "matu/unification.hpp"

namespace matu {

struct ClientUpdate {
  ClientId client = 0;
  std::uint32_t round = 0;
  UnifiedBundle bundle;
  std::map<TaskId, std::uint64_t> dataset_sizes;

  void validate() const {
    if (dataset_sizes.size() != bundle.task_ids.size()) {
      throw std::invalid_argument("ClientUpdate " + std::to_string(client) +
                                  ": dataset sizes do not match bundle tasks");
    }
    for (TaskId t : bundle.task_ids) {
      const auto it = dataset_sizes.find(t);
      if (it == dataset_sizes.end()) {
        throw std::invalid_argument("ClientUpdate " + std::to_string(client) +
                                    ": missing dataset size for task " + std::to_string(t));
      }
      if (it->second == 0) {
        throw std::invalid_argument("ClientUpdate " + std::to_string(client) +
                                    ": dataset size for task " + std::to_string(t) + " is zero");
      }
    }
  }

  bool holds(TaskId task) const { return bundle.per_task.contains(task); }
};

// Binary N x T task-to-client allocation.
class AllocationMatrix {
 public:
  AllocationMatrix() = default;
  AllocationMatrix(std::size_t num_clients, std::size_t num_tasks)
      : clients_(num_clients), tasks_(num_tasks), bits_(num_clients * num_tasks, 0) {}

  std::size_t num_clients() const noexcept { return clients_; }
  std::size_t num_tasks() const noexcept { return tasks_; }

  bool holds(std::size_t client, std::size_t task) const {
    check(client, task);
    return bits_[client * tasks_ + task] != 0;
  }
  void assign(std::size_t client, std::size_t task, bool on = true) {
    check(client, task);
    bits_[client * tasks_ + task] = on ? 1 : 0;
  }

  std::vector<TaskId> tasks_of(std::size_t client) const {
    std::vector<TaskId> out;
    for (std::size_t t = 0; t < tasks_; ++t) {
      if (holds(client, t)) out.push_back(t);
    }
    return out;
  }
  std::vector<ClientId> clients_of(std::size_t task) const {
    std::vector<ClientId> out;
    for (std::size_t n = 0; n < clients_; ++n) {
      if (holds(n, task)) out.push_back(static_cast<ClientId>(n));
    }
    return out;
  }

  // Every client holds at least one task and every task has at least one client.
  void validate() const {
    for (std::size_t n = 0; n < clients_; ++n) {
      if (tasks_of(n).empty()) {
        throw std::invalid_argument("allocation: client " + std::to_string(n) + " holds no task");
      }
    }
    for (std::size_t t = 0; t < tasks_; ++t) {
      if (clients_of(t).empty()) {
        throw std::invalid_argument("allocation: task " + std::to_string(t) + " has no client");
      }
    }
  }

  friend bool operator==(const AllocationMatrix&, const AllocationMatrix&) = default;

 private:
  void check(std::size_t client, std::size_t task) const {
    if (client >= clients_ || task >= tasks_) {
      throw std::out_of_range("allocation index (" + std::to_string(client) + ", " +
                              std::to_string(task) + ") out of range");
    }
  }

  std::size_t clients_ = 0;
  std::size_t tasks_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct TaskEntry {
  TaskVector vector;
  SoftMask mask;
  std::optional<std::uint32_t> last_updated;

  friend bool operator==(const TaskEntry&, const TaskEntry&) = default;
};

// Task-level server state. Nothing in here is keyed by client.
struct TaskState {
  std::size_t dim = 0;
  std::map<TaskId, TaskEntry> tasks;

  static TaskState initial(std::size_t dim, std::size_t num_tasks) {
    TaskState s;
    s.dim = dim;
    for (TaskId t = 0; t < num_tasks; ++t) {
      s.tasks.emplace(t, TaskEntry{TaskVector::zeros(dim), SoftMask::ones(dim), std::nullopt});
    }
    return s;
  }

  const TaskEntry& at(TaskId t) const {
    const auto it = tasks.find(t);
    if (it == tasks.end()) throw std::invalid_argument("no state for task " + std::to_string(t));
    return it->second;
  }

  friend bool operator==(const TaskState&, const TaskState&) = default;
};

enum class CrossTaskMode { kSimilarityWeighted, kUniform, kOff };
enum class CombineMode { kSum, kMean };

struct AggregationConfig {
  double rho = 0.4;
  double epsilon = 0.5;
  std::size_t kappa = 3;
  CrossTaskMode cross_task = CrossTaskMode::kSimilarityWeighted;
  CombineMode combine = CombineMode::kMean;

  void validate() const {
    if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in [0, 1]");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
      throw std::invalid_argument("epsilon must lie in [0, 1]");
    }
  }

  friend bool operator==(const AggregationConfig&, const AggregationConfig&) = default;
};

class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::vector<TaskId> tasks)
      : tasks_(std::move(tasks)), values_(tasks_.size() * tasks_.size(), 0.0) {}

  const std::vector<TaskId>& tasks() const noexcept { return tasks_; }
  std::size_t size() const noexcept { return tasks_.size(); }

  std::size_t index_of(TaskId t) const {
    const auto it = std::lower_bound(tasks_.begin(), tasks_.end(), t);
    if (it == tasks_.end() || *it != t) {
      throw std::invalid_argument("task " + std::to_string(t) + " not in similarity matrix");
    }
    return static_cast<std::size_t>(it - tasks_.begin());
  }
  double at(TaskId a, TaskId b) const { return values_[index_of(a) * size() + index_of(b)]; }
  double at_index(std::size_t i, std::size_t k) const { return values_[i * size() + k]; }
  void set_index(std::size_t i, std::size_t k, double v) { values_[i * size() + k] = v; }

 private:
  std::vector<TaskId> tasks_;  // ascending
  std::vector<double> values_;
};

inline TaskVector reconstruct_task_vector(const ClientUpdate& update, TaskId task) {
  return modulate(update.bundle.unified, modulators_for(update.bundle, task));
}

namespace detail {

inline void require_participants(TaskId task, const std::vector<ClientUpdate>& updates,
                                 const char* what) {
  if (updates.empty()) {
    throw std::invalid_argument(std::string(what) + ": no participants for task " +
                                std::to_string(task));
  }
  for (const auto& u : updates) {
    if (!u.holds(task)) {
      throw std::invalid_argument(std::string(what) + ": client " + std::to_string(u.client) +
                                  " does not hold task " + std::to_string(task));
    }
  }
}

}  // namespace detail

// alpha_j = |mean over clients of sgn(m_n . tau_n)_j|.
inline std::vector<double> agreement_scores(TaskId task, const std::vector<ClientUpdate>& updates) {
  detail::require_participants(task, updates, "agreement_scores");
  const std::size_t d = updates.front().bundle.unified.dim();
  std::vector<long> votes(d, 0);
  for (const auto& u : updates) {
    detail::require_same_dim(d, u.bundle.unified.dim(), "agreement_scores");
    const BinaryMask& m = modulators_for(u.bundle, task).mask;
    for (std::size_t j = 0; j < d; ++j) {
      if (m.test(j)) votes[j] += sign_of(u.bundle.unified[j]);
    }
  }
  std::vector<double> alpha(d);
  const auto n = static_cast<double>(updates.size());
  for (std::size_t j = 0; j < d; ++j) alpha[j] = std::abs(static_cast<double>(votes[j]) / n);
  return alpha;
}

// 1 where alpha_j >= rho, alpha_j otherwise.
inline SoftMask agreement_mask(TaskId task, const std::vector<ClientUpdate>& updates, double rho) {
  std::vector<double> w = agreement_scores(task, updates);
  for (double& a : w) {
    if (a >= rho) a = 1.0;
  }
  return SoftMask(std::move(w));
}

// gamma_n = |D_n| / sum |D|, in update order.
inline std::vector<double> dataset_weights(TaskId task, const std::vector<ClientUpdate>& updates) {
  std::uint64_t total = 0;
  for (const auto& u : updates) total += u.dataset_sizes.at(task);
  std::vector<double> gamma;
  gamma.reserve(updates.size());
  for (const auto& u : updates) {
    gamma.push_back(static_cast<double>(u.dataset_sizes.at(task)) / static_cast<double>(total));
  }
  return gamma;
}

// sum_n gamma_n * lambda_n * mhat . (m_n . tau_n)
inline TaskVector task_specific_aggregate(TaskId task, const std::vector<ClientUpdate>& updates,
                                          const SoftMask& mask) {
  detail::require_participants(task, updates, "task_specific_aggregate");
  const std::size_t d = mask.dim();
  const std::vector<double> gamma = dataset_weights(task, updates);
  std::vector<double> acc(d, 0.0);
  for (std::size_t n = 0; n < updates.size(); ++n) {
    const auto& u = updates[n];
    detail::require_same_dim(d, u.bundle.unified.dim(), "task_specific_aggregate");
    const TaskModulators& mods = modulators_for(u.bundle, task);
    const double weight = gamma[n] * mods.scaler;
    for (std::size_t j = 0; j < d; ++j) {
      if (mods.mask.test(j)) acc[j] += weight * mask[j] * u.bundle.unified[j];
    }
  }
  return TaskVector(std::move(acc));
}

inline double sign_similarity(const TaskVector& a, const TaskVector& b) {
  detail::require_same_dim(a.dim(), b.dim(), "sign_similarity");
  if (a.dim() == 0) throw std::invalid_argument("sign_similarity: zero dimension");
  long agree = 0;
  for (std::size_t j = 0; j < a.dim(); ++j) agree += sign_of(a[j]) * sign_of(b[j]);
  return 0.5 * (static_cast<double>(agree) / static_cast<double>(a.dim()) + 1.0);
}

inline SimilarityMatrix similarity_matrix(const std::map<TaskId, TaskVector>& task_vectors) {
  std::vector<TaskId> ids;
  for (const auto& [id, v] : task_vectors) ids.push_back(id);
  SimilarityMatrix s(ids);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const TaskVector& a = task_vectors.at(ids[i]);
    for (std::size_t k = i; k < ids.size(); ++k) {
      const double v = sign_similarity(a, task_vectors.at(ids[k]));
      s.set_index(i, k, v);
      s.set_index(k, i, v);
    }
  }
  return s;
}

// Tasks other than `task` with S > epsilon, by descending S then ascending id,
// truncated to kappa. `candidates`, when given, restricts the pool.
inline std::vector<TaskId> top_k_similar(TaskId task, const SimilarityMatrix& s, double epsilon,
                                         std::size_t kappa,
                                         const std::set<TaskId>* candidates = nullptr) {
  const std::size_t row = s.index_of(task);
  std::vector<std::pair<double, TaskId>> hits;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const TaskId other = s.tasks()[k];
    if (other == task) continue;
    if (candidates != nullptr && !candidates->contains(other)) continue;
    const double v = s.at_index(row, k);
    if (v > epsilon) hits.emplace_back(v, other);
  }
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<TaskId> out;
  for (std::size_t i = 0; i < hits.size() && i < kappa; ++i) out.push_back(hits[i].second);
  return out;
}

// Transfer from the similar tasks, projected through the target task's mask.
inline TaskVector cross_task_aggregate(TaskId task, const std::vector<TaskId>& similar,
                                       const SimilarityMatrix& s, const SoftMask& mask,
                                       const std::map<TaskId, TaskVector>& aggregates,
                                       CrossTaskMode mode) {
  const std::size_t d = mask.dim();
  std::vector<double> acc(d, 0.0);
  if (mode == CrossTaskMode::kOff || similar.empty()) return TaskVector(std::move(acc));
  for (TaskId other : similar) {
    if (other == task) throw std::invalid_argument("cross_task_aggregate: task listed as its own neighbour");
    const auto it = aggregates.find(other);
    if (it == aggregates.end()) {
      throw std::invalid_argument("cross_task_aggregate: missing aggregate for task " +
                                  std::to_string(other));
    }
    detail::require_same_dim(d, it->second.dim(), "cross_task_aggregate");
    const double weight = mode == CrossTaskMode::kUniform
                              ? 1.0 / static_cast<double>(similar.size())
                              : s.at(task, other);
    for (std::size_t j = 0; j < d; ++j) acc[j] += weight * mask[j] * it->second[j];
  }
  return TaskVector(std::move(acc));
}

// Sum of the transfer weights: sum of S over the similar set, or 1 for uniform.
inline double cross_task_weight_total(TaskId task, const std::vector<TaskId>& similar,
                                      const SimilarityMatrix& s, CrossTaskMode mode) {
  if (mode == CrossTaskMode::kOff || similar.empty()) return 0.0;
  if (mode == CrossTaskMode::kUniform) return 1.0;
  double total = 0.0;
  for (TaskId other : similar) total += s.at(task, other);
  return total;
}

// kSum adds the raw transfer term. kMean averages the same-task vector with
// the transfer term divided by its total weight, so both halves are on the
// same scale.
inline TaskVector combine_update(const TaskVector& same_task, const TaskVector& cross_task,
                                 CombineMode mode = CombineMode::kMean, double weight_total = 1.0) {
  if (mode == CombineMode::kSum) return add(same_task, cross_task);
  if (!(weight_total > 0.0) || !std::isfinite(weight_total)) {
    throw std::invalid_argument("combine_update: weight total must be positive");
  }
  return scale(add(same_task, scale(cross_task, 1.0 / weight_total)), 0.5);
}

inline UnifiedBundle form_client_payload(const std::vector<TaskId>& tasks, const TaskState& state) {
  std::map<TaskId, TaskVector> vectors;
  for (TaskId t : tasks) vectors.emplace(t, state.at(t).vector);
  return build_bundle(vectors);
}

struct TaskRoundRecord {
  std::uint32_t round = 0;
  TaskId task = 0;
  std::vector<ClientId> participants;
  double l1_same_task = 0.0;
  double l1_cross_task = 0.0;
  std::size_t num_similar = 0;
  double mean_alpha = 0.0;

  friend bool operator==(const TaskRoundRecord&, const TaskRoundRecord&) = default;
};

struct ServerRoundResult {
  TaskState state;
  std::map<ClientId, UnifiedBundle> payloads;
  std::vector<TaskRoundRecord> transcript;
  SimilarityMatrix similarity;
  std::map<TaskId, TaskVector> same_task;  // this round's pre-transfer aggregates
};

// One MaTU server round. Participating tasks go through agreement masking and
// size-weighted aggregation; then, behind a barrier, sign similarity over all
// current aggregates, top-kappa transfer and the combined update. Tasks
// without participants carry their previous vector forward.
inline ServerRoundResult run_server_round(std::vector<ClientUpdate> updates,
                                          const AllocationMatrix& allocation,
                                          const TaskState& state, const AggregationConfig& cfg) {
  cfg.validate();
  ServerRoundResult out;
  out.state = state;
  if (updates.empty()) return out;

  std::sort(updates.begin(), updates.end(),
            [](const auto& a, const auto& b) { return a.client < b.client; });
  const std::uint32_t round = updates.front().round;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    const auto& u = updates[i];
    u.validate();
    if (u.round != round) throw std::invalid_argument("run_server_round: mixed rounds");
    if (i > 0 && updates[i - 1].client == u.client) {
      throw std::invalid_argument("run_server_round: duplicate update from client " +
                                  std::to_string(u.client));
    }
    detail::require_same_dim(state.dim, u.bundle.unified.dim(), "run_server_round");
    if (u.bundle.task_ids != allocation.tasks_of(u.client)) {
      throw std::invalid_argument("run_server_round: client " + std::to_string(u.client) +
                                  " task set disagrees with allocation");
    }
  }

  std::map<TaskId, std::vector<ClientUpdate>> by_task;
  for (const auto& u : updates) {
    for (TaskId t : u.bundle.task_ids) {
      state.at(t);
      by_task[t].push_back(u);
    }
  }

  std::map<TaskId, SoftMask> masks;
  std::map<TaskId, double> mean_alpha;
  for (const auto& [t, members] : by_task) {
    const std::vector<double> alpha = agreement_scores(t, members);
    double total = 0.0;
    for (double a : alpha) total += a;
    mean_alpha[t] = alpha.empty() ? 0.0 : total / static_cast<double>(alpha.size());
    SoftMask m = agreement_mask(t, members, cfg.rho);
    out.same_task.emplace(t, task_specific_aggregate(t, members, m));
    masks.emplace(t, std::move(m));
  }

  // Barrier: similarity needs every aggregate.
  std::map<TaskId, TaskVector> current;
  std::set<TaskId> seen;
  for (const auto& [t, entry] : state.tasks) {
    const auto it = out.same_task.find(t);
    current.emplace(t, it != out.same_task.end() ? it->second : entry.vector);
    if (it != out.same_task.end() || entry.last_updated.has_value()) seen.insert(t);
  }
  out.similarity = similarity_matrix(current);

  for (const auto& [t, members] : by_task) {
    const TaskEntry& previous = state.at(t);
    const SoftMask& m = masks.at(t);
    std::vector<TaskId> similar;
    if (cfg.cross_task != CrossTaskMode::kOff && previous.last_updated.has_value()) {
      similar = top_k_similar(t, out.similarity, cfg.epsilon, cfg.kappa, &seen);
    }
    const TaskVector& same = out.same_task.at(t);
    const TaskVector cross =
        cross_task_aggregate(t, similar, out.similarity, m, current, cfg.cross_task);
    TaskVector next = same;
    if (!similar.empty()) {
      const double total = cross_task_weight_total(t, similar, out.similarity, cfg.cross_task);
      next = combine_update(same, cross, cfg.combine, total);
    }

    TaskRoundRecord rec;
    rec.round = round;
    rec.task = t;
    for (const auto& u : members) rec.participants.push_back(u.client);
    rec.l1_same_task = l1_norm(same);
    rec.l1_cross_task = l1_norm(cross);
    rec.num_similar = similar.size();
    rec.mean_alpha = mean_alpha.at(t);
    out.transcript.push_back(std::move(rec));

    out.state.tasks[t] = TaskEntry{std::move(next), m, round};
  }

  for (const auto& u : updates) {
    out.payloads.emplace(u.client, form_client_payload(u.bundle.task_ids, out.state));
  }
  return out;
}

}  // namespace matu
