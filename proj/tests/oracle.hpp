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

// Naive reference implementations on plain vectors.
// Deliberately naive; nothing here calls into the library.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline int sgn(double x) {
  if (x > 0) return 1;
  if (x < 0) return -1;
  return 0;
}

inline std::vector<int> elect_sign(const std::vector<Vec>& vs) {
  std::vector<int> out(vs[0].size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    double s = 0;
    for (const auto& v : vs) s += v[j];
    out[j] = sgn(s);
  }
  return out;
}

inline Vec elect_magnitude(const std::vector<Vec>& vs, const std::vector<int>& sigma) {
  Vec out(sigma.size(), 0.0);
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (sigma[j] == 0) continue;
    for (const auto& v : vs) {
      if (sgn(v[j]) == sigma[j]) out[j] = std::max(out[j], std::fabs(v[j]));
    }
  }
  return out;
}

inline Vec unify(const std::vector<Vec>& vs) {
  const auto sigma = elect_sign(vs);
  const auto mu = elect_magnitude(vs, sigma);
  Vec out(mu.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = sigma[j] * mu[j];
  return out;
}

inline std::vector<int> build_mask(const Vec& task, const Vec& unified) {
  std::vector<int> m(task.size());
  for (std::size_t j = 0; j < m.size(); ++j) m[j] = sgn(task[j]) * sgn(unified[j]) > 0 ? 1 : 0;
  return m;
}

inline double l1(const Vec& v) {
  double s = 0;
  for (double x : v) s += std::fabs(x);
  return s;
}

inline double build_scaler(const Vec& task, const std::vector<int>& m, const Vec& unified) {
  double den = 0;
  for (std::size_t j = 0; j < m.size(); ++j) den += m[j] * std::fabs(unified[j]);
  return den == 0 ? 1.0 : l1(task) / den;
}

inline Vec modulate(const Vec& unified, const std::vector<int>& m, double lambda) {
  Vec out(unified.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = lambda * (m[j] * unified[j]);
  return out;
}

// Soft mask from the signs of the masked unified vectors of each client.
inline Vec agreement_mask(const std::vector<Vec>& masked_unified, double rho) {
  const std::size_t d = masked_unified[0].size();
  Vec out(d);
  for (std::size_t j = 0; j < d; ++j) {
    int s = 0;
    for (const auto& v : masked_unified) s += sgn(v[j]);
    const double alpha = std::fabs(static_cast<double>(s) / static_cast<double>(masked_unified.size()));
    out[j] = alpha >= rho ? 1.0 : alpha;
  }
  return out;
}

inline double similarity(const Vec& a, const Vec& b) {
  int s = 0;
  for (std::size_t j = 0; j < a.size(); ++j) s += sgn(a[j]) * sgn(b[j]);
  return 0.5 * (static_cast<double>(s) / static_cast<double>(a.size()) + 1.0);
}

// Closed-form upload sizes.
inline std::uint64_t matu_upload(std::uint64_t d, std::uint64_t k) {
  const std::uint64_t vec = 8 + 4 * d;
  const std::uint64_t mask = 8 + (d + 7) / 8;
  return 8 + vec + k * (8 + mask + 4);
}

inline std::uint64_t baseline_upload(std::uint64_t d, std::uint64_t k) {
  return 8 + k * (8 + 8 + 4 * d);
}

// Plain gradient descent on 1/2 sum c (x - opt)^2.
inline Vec gd_step(const Vec& x, const Vec& opt, const Vec& c, double lr) {
  Vec out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] - lr * (c[j] * (x[j] - opt[j]));
  return out;
}

}  // namespace oracle
