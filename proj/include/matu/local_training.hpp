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
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "matu/random.hpp"
#include "matu/task_vector.hpp"
#include "matu/unification.hpp"

namespace matu {

// Diagonal quadratic task L(tau) = 1/2 sum_j c_j (tau_j - opt_j)^2 whose
// minimiser is the ground-truth task vector.
struct SyntheticTask {
  TaskId id = 0;
  TaskVector optimum;
  std::vector<double> curvature;
  int cluster = 0;

  void validate() const {
    detail::require_same_dim(optimum.dim(), curvature.size(), "SyntheticTask");
    for (double c : curvature) {
      if (!(c > 0.0) || !std::isfinite(c)) {
        throw std::invalid_argument("SyntheticTask " + std::to_string(id) +
                                    ": curvature entries must be positive and finite");
      }
    }
  }

  double max_curvature() const { return *std::max_element(curvature.begin(), curvature.end()); }
};

struct TrainerConfig {
  double learning_rate = 0.1;
  std::size_t local_steps = 1;
  double sample_noise_std = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const TrainerConfig&, const TrainerConfig&) = default;
};

struct LocalResult {
  TaskId task_id = 0;
  TaskVector task_vector;
  std::uint64_t effective_samples = 1;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double task_loss(const TaskVector& v, const SyntheticTask& task) {
  detail::require_same_dim(v.dim(), task.optimum.dim(), "task_loss");
  double s = 0.0;
  for (std::size_t j = 0; j < v.dim(); ++j) {
    const double r = v[j] - task.optimum[j];
    s += 0.5 * task.curvature[j] * r * r;
  }
  return s;
}

inline double distance_to_optimum(const TaskVector& v, const SyntheticTask& task) {
  return l1_distance(v, task.optimum);
}

// Loss of individually trained (centralised) reference: the quadratic minimum.
inline double analytic_individual_reference(const SyntheticTask&) { return 0.0; }

namespace detail {

// Gradient descent on L + (mu/2)||tau - anchor||^2 with Gaussian gradient
// noise of std sample_noise_std / sqrt(samples). mu == 0 skips the proximal
// term entirely so the plain and proximal paths agree bit for bit.
inline LocalResult descend(const TaskVector& start, const TaskVector* anchor, double mu,
                           const SyntheticTask& task, const TrainerConfig& cfg,
                           std::uint64_t samples) {
  task.validate();
  require_same_dim(start.dim(), task.optimum.dim(), "local_train");
  if (anchor != nullptr) require_same_dim(start.dim(), anchor->dim(), "fedprox_local_step");
  if (samples == 0) throw std::invalid_argument("local_train: samples must be positive");
  if (!(mu >= 0.0)) throw std::invalid_argument("fedprox_local_step: mu_prox must be >= 0");
  if (!(cfg.learning_rate > 0.0) || cfg.learning_rate >= 2.0 / (task.max_curvature() + mu)) {
    throw std::invalid_argument("local_train: learning rate " + std::to_string(cfg.learning_rate) +
                                " violates stability bound 2/(max curvature + mu) for task " +
                                std::to_string(task.id));
  }
  if (cfg.local_steps == 0) throw std::invalid_argument("local_train: local_steps must be >= 1");

  const bool proximal = anchor != nullptr && mu > 0.0;
  const double noise_scale = cfg.sample_noise_std / std::sqrt(static_cast<double>(samples));
  rng::Stream noise(cfg.seed);

  auto objective = [&](const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double r = x[j] - task.optimum[j];
      s += 0.5 * task.curvature[j] * r * r;
      if (proximal) {
        const double p = x[j] - (*anchor)[j];
        s += 0.5 * mu * p * p;
      }
    }
    return s;
  };

  std::vector<double> x = start.raw();
  double prev = objective(x);
  int rising = 0;
  for (std::size_t step = 0; step < cfg.local_steps; ++step) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      double g = task.curvature[j] * (x[j] - task.optimum[j]);
      if (proximal) g += mu * (x[j] - (*anchor)[j]);
      if (noise_scale > 0.0) g += noise_scale * noise.normal();
      x[j] -= cfg.learning_rate * g;
    }
    const double now = objective(x);
    if (!std::isfinite(now)) {
      throw TrainingDiverged("local training on task " + std::to_string(task.id) +
                             " produced a non-finite loss at step " + std::to_string(step));
    }
    rising = now > prev ? rising + 1 : 0;
    if (rising >= 3) {
      throw TrainingDiverged("local training on task " + std::to_string(task.id) +
                             " diverged: loss rose for 3 consecutive steps (last " +
                             std::to_string(now) + " at step " + std::to_string(step) + ")");
    }
    prev = now;
  }
  return LocalResult{task.id, TaskVector(std::move(x)), samples};
}

}  // namespace detail

inline LocalResult local_train(const TaskVector& start, const SyntheticTask& task,
                               const TrainerConfig& cfg, std::uint64_t samples = 1) {
  return detail::descend(start, nullptr, 0.0, task, cfg, samples);
}

inline LocalResult fedprox_local_step(const TaskVector& start, const TaskVector& global,
                                      const SyntheticTask& task, double mu_prox,
                                      const TrainerConfig& cfg, std::uint64_t samples = 1) {
  return detail::descend(start, &global, mu_prox, task, cfg, samples);
}

// Weighted mean with weights normalised to sum to one; accumulation follows
// input order.
inline TaskVector fedavg_aggregate(const std::vector<std::pair<TaskVector, double>>& vectors) {
  if (vectors.empty()) throw std::invalid_argument("fedavg_aggregate: empty input");
  const std::size_t d = vectors.front().first.dim();
  double total = 0.0;
  for (const auto& [v, w] : vectors) {
    detail::require_same_dim(d, v.dim(), "fedavg_aggregate");
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("fedavg_aggregate: weights must be positive and finite");
    }
    total += w;
  }
  std::vector<double> acc(d, 0.0);
  for (const auto& [v, w] : vectors) {
    const double gamma = w / total;
    for (std::size_t j = 0; j < d; ++j) acc[j] += gamma * v[j];
  }
  return TaskVector(std::move(acc));
}

}  // namespace matu
