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
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "matu/codec.hpp"
#include "matu/task_vector.hpp"

namespace matu {

using TaskId = std::uint64_t;
using ClientId = std::uint32_t;

struct TaskModulators {
  BinaryMask mask;
  double scaler = 1.0;

  friend bool operator==(const TaskModulators&, const TaskModulators&) = default;
};

// One vector for all of a client's tasks, plus a mask and rescaler per task
// that approximately recover each task's own vector.
struct UnifiedBundle {
  TaskVector unified;
  std::map<TaskId, TaskModulators> per_task;
  std::vector<TaskId> task_ids;  // ascending

  friend bool operator==(const UnifiedBundle&, const UnifiedBundle&) = default;
};

namespace detail {

inline void require_uniform_dims(const std::vector<TaskVector>& vectors, const char* what) {
  if (vectors.empty()) throw std::invalid_argument(std::string(what) + ": empty input");
  for (const auto& v : vectors) require_same_dim(vectors.front().dim(), v.dim(), what);
}

}  // namespace detail

// sgn of the entrywise sum; exact cancellation gives 0.
inline SignVector elect_sign(const std::vector<TaskVector>& vectors) {
  detail::require_uniform_dims(vectors, "elect_sign");
  const std::size_t d = vectors.front().dim();
  std::vector<double> sum(d, 0.0);
  for (const auto& v : vectors) {
    for (std::size_t j = 0; j < d; ++j) sum[j] += v[j];
  }
  return sign_of(sum);
}

// Largest |tau_j| among vectors whose sign at j matches sigma_j. Zero where
// sigma_j == 0.
inline TaskVector elect_magnitude(const std::vector<TaskVector>& vectors, const SignVector& sigma) {
  detail::require_uniform_dims(vectors, "elect_magnitude");
  const std::size_t d = vectors.front().dim();
  detail::require_same_dim(d, sigma.dim(), "elect_magnitude");
  std::vector<double> mu(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    if (sigma[j] == 0) continue;
    for (const auto& v : vectors) {
      if (sign_of(v[j]) == sigma[j]) mu[j] = std::max(mu[j], std::abs(v[j]));
    }
  }
  return TaskVector(std::move(mu));
}

inline TaskVector unify(const std::vector<TaskVector>& vectors) {
  const SignVector sigma = elect_sign(vectors);
  return multiply(elect_magnitude(vectors, sigma), sigma);
}

// Bit j set iff task_vec_j * unified_j > 0. Compared via signs so the product
// cannot underflow to zero.
inline BinaryMask build_mask(const TaskVector& task_vec, const TaskVector& unified) {
  detail::require_same_dim(task_vec.dim(), unified.dim(), "build_mask");
  BinaryMask m(task_vec.dim());
  for (std::size_t j = 0; j < task_vec.dim(); ++j) {
    if (sign_of(task_vec[j]) * sign_of(unified[j]) > 0) m.set(j);
  }
  return m;
}

// l1(task) / l1(mask . unified), or 1 when the projected unified vector is zero.
inline double build_scaler(const TaskVector& task_vec, const BinaryMask& mask,
                           const TaskVector& unified) {
  detail::require_same_dim(task_vec.dim(), unified.dim(), "build_scaler");
  const double denom = l1_norm(multiply(unified, mask));
  if (denom == 0.0) return 1.0;
  return l1_norm(task_vec) / denom;
}

inline TaskVector modulate(const TaskVector& unified, const TaskModulators& mods) {
  return scale(multiply(unified, mods.mask), mods.scaler);
}

inline UnifiedBundle build_bundle(const std::map<TaskId, TaskVector>& task_vectors) {
  if (task_vectors.empty()) throw std::invalid_argument("build_bundle: no tasks");
  std::vector<TaskVector> vectors;
  vectors.reserve(task_vectors.size());
  for (const auto& [id, v] : task_vectors) vectors.push_back(v);

  UnifiedBundle bundle;
  bundle.unified = unify(vectors);
  for (const auto& [id, v] : task_vectors) {
    BinaryMask mask = build_mask(v, bundle.unified);
    const double scaler = build_scaler(v, mask, bundle.unified);
    bundle.per_task.emplace(id, TaskModulators{std::move(mask), scaler});
    bundle.task_ids.push_back(id);
  }
  return bundle;
}

inline const TaskModulators& modulators_for(const UnifiedBundle& bundle, TaskId task) {
  const auto it = bundle.per_task.find(task);
  if (it == bundle.per_task.end()) {
    throw std::invalid_argument("bundle holds no task " + std::to_string(task));
  }
  return it->second;
}

// --- serialization -----------------------------------------------------------
//
//   header:   u16 client-id, u32 round, u16 task count        (8 bytes)
//   unified:  vector encoding                                  (8 + 4d)
//   per task: u64 task-id, mask encoding, f32 scaler           (8 + 8 + ceil(d/8) + 4)

inline constexpr std::size_t kBundleHeaderBytes = 8;

constexpr std::size_t bundle_bytes(std::size_t dim, std::size_t num_tasks) {
  return kBundleHeaderBytes + wire::vector_bytes(dim) +
         num_tasks * (8 + wire::mask_bytes(dim) + 4);
}

struct BundleEnvelope {
  ClientId client = 0;
  std::uint32_t round = 0;
  UnifiedBundle bundle;
};

inline void write_header(wire::ByteWriter& w, ClientId client, std::uint32_t round,
                         std::size_t num_tasks) {
  if (client > std::numeric_limits<std::uint16_t>::max()) {
    throw std::invalid_argument("client id " + std::to_string(client) + " exceeds u16");
  }
  if (num_tasks > std::numeric_limits<std::uint16_t>::max()) {
    throw std::invalid_argument("task count " + std::to_string(num_tasks) + " exceeds u16");
  }
  w.u16(static_cast<std::uint16_t>(client));
  w.u32(round);
  w.u16(static_cast<std::uint16_t>(num_tasks));
}

inline std::vector<std::uint8_t> encode_bundle(const UnifiedBundle& bundle, ClientId client,
                                               std::uint32_t round) {
  wire::ByteWriter w;
  write_header(w, client, round, bundle.task_ids.size());
  wire::write_vector(w, bundle.unified);
  for (TaskId id : bundle.task_ids) {
    const auto& mods = modulators_for(bundle, id);
    w.u64(id);
    wire::write_mask(w, mods.mask);
    w.f32(wire::to_wire_float(mods.scaler));
  }
  return std::move(w).take();
}

inline BundleEnvelope decode_bundle(std::span<const std::uint8_t> bytes) {
  wire::ByteReader r(bytes);
  BundleEnvelope env;
  env.client = r.u16();
  env.round = r.u32();
  const std::uint16_t num_tasks = r.u16();
  env.bundle.unified = wire::read_vector(r);
  for (std::uint16_t i = 0; i < num_tasks; ++i) {
    const TaskId id = r.u64();
    BinaryMask mask = wire::read_mask(r);
    detail::require_same_dim(env.bundle.unified.dim(), mask.dim(), "decode_bundle");
    const double scaler = static_cast<double>(r.f32());
    if (!std::isfinite(scaler) || scaler < 0.0) {
      throw std::invalid_argument("decode_bundle: invalid scaler for task " + std::to_string(id));
    }
    if (!env.bundle.task_ids.empty() && id <= env.bundle.task_ids.back()) {
      throw std::invalid_argument("decode_bundle: task ids not strictly ascending");
    }
    env.bundle.task_ids.push_back(id);
    env.bundle.per_task.emplace(id, TaskModulators{std::move(mask), scaler});
  }
  if (r.remaining() != 0) throw std::invalid_argument("decode_bundle: trailing bytes");
  return env;
}

}  // namespace matu
