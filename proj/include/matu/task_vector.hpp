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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace matu {

namespace detail {

inline void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (!std::isfinite(values[j])) {
      throw std::invalid_argument(std::string(what) + ": non-finite entry at index " +
                                  std::to_string(j));
    }
  }
}

inline void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace detail

// Dense real vector of weight deltas (tau = theta - theta_p). Every entry is
// finite; the value is immutable once built.
class TaskVector {
 public:
  TaskVector() = default;
  explicit TaskVector(std::vector<double> values) : values_(std::move(values)) {
    detail::require_finite(values_, "TaskVector");
  }
  TaskVector(std::initializer_list<double> values) : TaskVector(std::vector<double>(values)) {}

  static TaskVector zeros(std::size_t dim) { return TaskVector(std::vector<double>(dim, 0.0)); }

  std::size_t dim() const noexcept { return values_.size(); }
  double operator[](std::size_t j) const { return values_[j]; }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<double>& raw() const noexcept { return values_; }

  friend bool operator==(const TaskVector&, const TaskVector&) = default;

 private:
  std::vector<double> values_;
};

// Entries in {-1, 0, +1}.
class SignVector {
 public:
  SignVector() = default;
  explicit SignVector(std::vector<std::int8_t> signs) : signs_(std::move(signs)) {
    for (std::size_t j = 0; j < signs_.size(); ++j) {
      if (signs_[j] < -1 || signs_[j] > 1) {
        throw std::invalid_argument("SignVector: entry outside {-1,0,+1} at index " +
                                    std::to_string(j));
      }
    }
  }
  SignVector(std::initializer_list<int> signs)
      : SignVector(std::vector<std::int8_t>(signs.begin(), signs.end())) {}

  std::size_t dim() const noexcept { return signs_.size(); }
  int operator[](std::size_t j) const { return signs_[j]; }
  std::span<const std::int8_t> values() const noexcept { return signs_; }

  friend bool operator==(const SignVector&, const SignVector&) = default;

 private:
  std::vector<std::int8_t> signs_;
};

// Fixed-length bitset, stored packed LSB-first (the same order as the wire
// encoding).
class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(std::size_t dim) : dim_(dim), bytes_((dim + 7) / 8, 0) {}
  BinaryMask(std::initializer_list<int> bits) : BinaryMask(bits.size()) {
    std::size_t j = 0;
    for (int b : bits) {
      if (b != 0) set(j);
      ++j;
    }
  }

  static BinaryMask ones(std::size_t dim) {
    BinaryMask m(dim);
    for (std::size_t j = 0; j < dim; ++j) m.set(j);
    return m;
  }

  // Rebuilds a mask from packed bytes; padding bits past dim must be clear.
  static BinaryMask from_bytes(std::size_t dim, std::vector<std::uint8_t> bytes) {
    if (bytes.size() != (dim + 7) / 8) {
      throw std::invalid_argument("BinaryMask: expected " + std::to_string((dim + 7) / 8) +
                                  " bytes, got " + std::to_string(bytes.size()));
    }
    if (dim % 8 != 0 && (bytes.back() >> (dim % 8)) != 0) {
      throw std::invalid_argument("BinaryMask: padding bits set past dim");
    }
    BinaryMask m;
    m.dim_ = dim;
    m.bytes_ = std::move(bytes);
    return m;
  }

  std::size_t dim() const noexcept { return dim_; }
  bool test(std::size_t j) const { return (bytes_[j / 8] >> (j % 8)) & 1U; }
  void set(std::size_t j, bool on = true) {
    const auto bit = static_cast<std::uint8_t>(1U << (j % 8));
    if (on) {
      bytes_[j / 8] |= bit;
    } else {
      bytes_[j / 8] &= static_cast<std::uint8_t>(~bit);
    }
  }
  std::size_t count() const noexcept {
    std::size_t n = 0;
    for (std::size_t j = 0; j < dim_; ++j) n += test(j) ? 1 : 0;
    return n;
  }
  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<std::uint8_t> bytes_;
};

// Per-coordinate weights in [0, 1].
class SoftMask {
 public:
  SoftMask() = default;
  explicit SoftMask(std::vector<double> weights) : weights_(std::move(weights)) {
    for (std::size_t j = 0; j < weights_.size(); ++j) {
      if (!(weights_[j] >= 0.0 && weights_[j] <= 1.0)) {
        throw std::invalid_argument("SoftMask: weight outside [0,1] at index " +
                                    std::to_string(j));
      }
    }
  }
  SoftMask(std::initializer_list<double> weights) : SoftMask(std::vector<double>(weights)) {}

  static SoftMask ones(std::size_t dim) { return SoftMask(std::vector<double>(dim, 1.0)); }

  std::size_t dim() const noexcept { return weights_.size(); }
  double operator[](std::size_t j) const { return weights_[j]; }
  std::span<const double> values() const noexcept { return weights_; }

  friend bool operator==(const SoftMask&, const SoftMask&) = default;

 private:
  std::vector<double> weights_;
};

inline int sign_of(double x) noexcept { return (x > 0.0) - (x < 0.0); }

// sgn with sgn(0) == 0 exactly; no epsilon band.
inline SignVector sign_of(const TaskVector& v) {
  std::vector<std::int8_t> out(v.dim());
  for (std::size_t j = 0; j < v.dim(); ++j) out[j] = static_cast<std::int8_t>(sign_of(v[j]));
  return SignVector(std::move(out));
}

inline SignVector sign_of(std::span<const double> values) {
  detail::require_finite(values, "sign_of");
  std::vector<std::int8_t> out(values.size());
  for (std::size_t j = 0; j < values.size(); ++j) {
    out[j] = static_cast<std::int8_t>(sign_of(values[j]));
  }
  return SignVector(std::move(out));
}

// Index-ascending sequential sum of |v_j|.
inline double l1_norm(const TaskVector& v) noexcept {
  double s = 0.0;
  for (double x : v.values()) s += std::abs(x);
  return s;
}

inline double l1_distance(const TaskVector& a, const TaskVector& b) {
  detail::require_same_dim(a.dim(), b.dim(), "l1_distance");
  double s = 0.0;
  for (std::size_t j = 0; j < a.dim(); ++j) s += std::abs(a[j] - b[j]);
  return s;
}

namespace detail {

template <class Rhs, class Op>
TaskVector zip(const TaskVector& a, const Rhs& b, Op op, const char* what) {
  require_same_dim(a.dim(), b.dim(), what);
  std::vector<double> out(a.dim());
  for (std::size_t j = 0; j < a.dim(); ++j) out[j] = op(a[j], b[j]);
  return TaskVector(std::move(out));
}

}  // namespace detail

// Elementwise product (the Hadamard operator). BinaryMask bits act as 0/1.
inline TaskVector multiply(const TaskVector& a, const TaskVector& b) {
  return detail::zip(a, b, [](double x, double y) { return x * y; }, "multiply");
}
inline TaskVector multiply(const TaskVector& a, const SignVector& b) {
  return detail::zip(a, b, [](double x, int s) { return x * static_cast<double>(s); },
                     "multiply");
}
inline TaskVector multiply(const TaskVector& a, const SoftMask& b) {
  return detail::zip(a, b, [](double x, double w) { return x * w; }, "multiply");
}
inline TaskVector multiply(const TaskVector& a, const BinaryMask& m) {
  detail::require_same_dim(a.dim(), m.dim(), "multiply");
  std::vector<double> out(a.dim());
  for (std::size_t j = 0; j < a.dim(); ++j) out[j] = m.test(j) ? a[j] : 0.0 * a[j];
  return TaskVector(std::move(out));
}

inline TaskVector add(const TaskVector& a, const TaskVector& b) {
  return detail::zip(a, b, [](double x, double y) { return x + y; }, "add");
}
inline TaskVector add(const TaskVector& a, const SignVector& b) {
  return detail::zip(a, b, [](double x, int s) { return x + static_cast<double>(s); }, "add");
}
inline TaskVector add(const TaskVector& a, const SoftMask& b) {
  return detail::zip(a, b, [](double x, double w) { return x + w; }, "add");
}
inline TaskVector add(const TaskVector& a, const BinaryMask& m) {
  detail::require_same_dim(a.dim(), m.dim(), "add");
  std::vector<double> out(a.dim());
  for (std::size_t j = 0; j < a.dim(); ++j) out[j] = a[j] + (m.test(j) ? 1.0 : 0.0);
  return TaskVector(std::move(out));
}

inline TaskVector subtract(const TaskVector& a, const TaskVector& b) {
  return detail::zip(a, b, [](double x, double y) { return x - y; }, "subtract");
}

inline TaskVector scale(const TaskVector& v, double c) {
  std::vector<double> out(v.dim());
  for (std::size_t j = 0; j < v.dim(); ++j) out[j] = c * v[j];
  return TaskVector(std::move(out));
}

}  // namespace matu
