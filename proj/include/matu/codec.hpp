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

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "matu/task_vector.hpp"

// Little-endian binary encodings for vectors and masks.
//
//   vector: u64 dim, then dim x f32
//   mask:   u64 dim, then ceil(dim/8) bytes, LSB-first within each byte
namespace matu::wire {

inline constexpr std::size_t kDimPrefixBytes = 8;

constexpr std::size_t vector_bytes(std::size_t dim) { return kDimPrefixBytes + 4 * dim; }
constexpr std::size_t mask_bytes(std::size_t dim) { return kDimPrefixBytes + (dim + 7) / 8; }

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

  std::size_t size() const noexcept { return buf_.size(); }
  const std::vector<std::uint8_t>& data() const noexcept { return buf_; }
  std::vector<std::uint8_t> take() && { return std::move(buf_); }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::vector<std::uint8_t> bytes(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> out(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw std::invalid_argument("truncated payload: need " + std::to_string(n) +
                                  " bytes at offset " + std::to_string(pos_) + ", have " +
                                  std::to_string(remaining()));
    }
  }
  std::uint64_t get_le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

// Narrows to f32; values outside float range are rejected rather than sent as inf.
inline float to_wire_float(double x) {
  const auto f = static_cast<float>(x);
  if (!std::isfinite(f)) {
    throw std::invalid_argument("value " + std::to_string(x) + " does not fit in f32");
  }
  return f;
}

inline void write_vector(ByteWriter& w, const TaskVector& v) {
  w.u64(v.dim());
  for (double x : v.values()) w.f32(to_wire_float(x));
}

inline TaskVector read_vector(ByteReader& r) {
  const std::uint64_t dim = r.u64();
  if (dim > r.remaining() / 4) {
    throw std::invalid_argument("vector dim " + std::to_string(dim) + " exceeds payload");
  }
  std::vector<double> values(dim);
  for (auto& x : values) x = static_cast<double>(r.f32());
  return TaskVector(std::move(values));
}

inline void write_mask(ByteWriter& w, const BinaryMask& m) {
  w.u64(m.dim());
  w.bytes(m.bytes());
}

inline BinaryMask read_mask(ByteReader& r) {
  const std::uint64_t dim = r.u64();
  if (dim / 8 > r.remaining()) {
    throw std::invalid_argument("mask dim " + std::to_string(dim) + " exceeds payload");
  }
  return BinaryMask::from_bytes(dim, r.bytes((dim + 7) / 8));
}

inline std::vector<std::uint8_t> encode(const TaskVector& v) {
  ByteWriter w;
  write_vector(w, v);
  return std::move(w).take();
}

inline std::vector<std::uint8_t> encode(const BinaryMask& m) {
  ByteWriter w;
  write_mask(w, m);
  return std::move(w).take();
}

inline TaskVector decode_vector(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto v = read_vector(r);
  if (r.remaining() != 0) throw std::invalid_argument("trailing bytes after vector");
  return v;
}

inline BinaryMask decode_mask(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto m = read_mask(r);
  if (r.remaining() != 0) throw std::invalid_argument("trailing bytes after mask");
  return m;
}

}  // namespace matu::wire
