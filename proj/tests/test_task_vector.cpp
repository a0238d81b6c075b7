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

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "matu/codec.hpp"
#include "matu/task_vector.hpp"
#include "printers.hpp"

namespace {

using matu::BinaryMask;
using matu::SignVector;
using matu::SoftMask;
using matu::TaskVector;

std::vector<double> as_vec(const TaskVector& v) { return v.raw(); }

TEST(TaskVector, RejectsNonFinite) {
  EXPECT_THROW(TaskVector({1.0, std::nan("")}), std::invalid_argument);
  EXPECT_THROW(TaskVector({std::numeric_limits<double>::infinity()}), std::invalid_argument);
  EXPECT_NO_THROW(TaskVector({0.0, -0.0, 1e300}));
}

TEST(SignOf, UsesExactZero) {
  const SignVector s = matu::sign_of(TaskVector{2.0, 0.0, -1e-300});
  EXPECT_EQ(s[0], 1);
  EXPECT_EQ(s[1], 0);
  EXPECT_EQ(s[2], -1);
  EXPECT_EQ(matu::sign_of(-0.0), 0);
}

TEST(Multiply, MaskProjection) {
  EXPECT_EQ(as_vec(matu::multiply(TaskVector{3, -2}, BinaryMask{1, 0})), (std::vector<double>{3, 0}));
}

TEST(Multiply, BySignVector) {
  EXPECT_EQ(as_vec(matu::multiply(TaskVector{2, -3}, SignVector{-1, 1})), (std::vector<double>{-2, -3}));
}

TEST(Multiply, BySoftMask) {
  EXPECT_EQ(as_vec(matu::multiply(TaskVector{2, -4}, SoftMask{0.5, 0.25})), (std::vector<double>{1, -1}));
}

TEST(Add, AdditiveInverse) {
  EXPECT_EQ(as_vec(matu::add(TaskVector{1, 2}, TaskVector{-1, -2})), (std::vector<double>{0, 0}));
}

TEST(Arithmetic, DimensionMismatchRejected) {
  EXPECT_THROW(matu::add(TaskVector{1, 2}, TaskVector{1}), std::invalid_argument);
  EXPECT_THROW(matu::multiply(TaskVector{1, 2}, BinaryMask{1, 0, 1}), std::invalid_argument);
  EXPECT_THROW(matu::multiply(TaskVector{1}, SoftMask{1.0, 1.0}), std::invalid_argument);
}

TEST(L1Norm, Examples) {
  EXPECT_EQ(matu::l1_norm(TaskVector{3, -1}), 4.0);
  EXPECT_EQ(matu::l1_norm(TaskVector::zeros(5)), 0.0);
  EXPECT_EQ(matu::l1_norm(TaskVector{0.5, 0.25, -0.25}), 1.0);
}

TEST(BinaryMask, LsbFirstPacking) {
  BinaryMask m(10);
  m.set(0);
  m.set(3);
  m.set(9);
  ASSERT_EQ(m.bytes().size(), 2u);
  EXPECT_EQ(m.bytes()[0], 0b00001001);
  EXPECT_EQ(m.bytes()[1], 0b00000010);
  EXPECT_EQ(m.count(), 3u);
  m.set(3, false);
  EXPECT_FALSE(m.test(3));
}

TEST(BinaryMask, FromBytesRejectsPaddingBits) {
  EXPECT_THROW(BinaryMask::from_bytes(3, {0b00001000}), std::invalid_argument);
  EXPECT_THROW(BinaryMask::from_bytes(9, {0xff}), std::invalid_argument);
  EXPECT_EQ(BinaryMask::from_bytes(3, {0b00000101}), (BinaryMask{1, 0, 1}));
}

TEST(SoftMask, RangeChecked) {
  EXPECT_THROW(SoftMask({1.5}), std::invalid_argument);
  EXPECT_THROW(SoftMask({-0.1}), std::invalid_argument);
}

TEST(Codec, VectorLayout) {
  const auto bytes = matu::wire::encode(TaskVector{1.0, -2.0});
  ASSERT_EQ(bytes.size(), matu::wire::vector_bytes(2));
  // u64 dim, little endian
  EXPECT_EQ(bytes[0], 2);
  for (int i = 1; i < 8; ++i) EXPECT_EQ(bytes[i], 0);
  // 1.0f = 0x3f800000, -2.0f = 0xc0000000
  EXPECT_EQ(bytes[8], 0x00);
  EXPECT_EQ(bytes[11], 0x3f);
  EXPECT_EQ(bytes[10], 0x80);
  EXPECT_EQ(bytes[15], 0xc0);
  EXPECT_EQ(as_vec(matu::wire::decode_vector(bytes)), (std::vector<double>{1.0, -2.0}));
}

TEST(Codec, MaskLayout) {
  const BinaryMask m{1, 1, 0, 0, 0, 0, 0, 0, 1};
  const auto bytes = matu::wire::encode(m);
  ASSERT_EQ(bytes.size(), 8u + 2u);
  EXPECT_EQ(bytes[8], 0b00000011);
  EXPECT_EQ(bytes[9], 0b00000001);
  EXPECT_EQ(matu::wire::decode_mask(bytes), m);
}

TEST(Codec, Float32Rounding) {
  const auto back = matu::wire::decode_vector(matu::wire::encode(TaskVector{0.1}));
  EXPECT_EQ(back[0], static_cast<double>(0.1f));
}

TEST(Codec, RejectsTruncatedAndOverflowingInput) {
  auto bytes = matu::wire::encode(TaskVector{1.0, 2.0});
  bytes.pop_back();
  EXPECT_THROW(matu::wire::decode_vector(bytes), std::invalid_argument);
  EXPECT_THROW(matu::wire::encode(TaskVector{1e300}), std::invalid_argument);
}

}  // namespace
