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

#include <map>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "matu/server.hpp"
#include "oracle.hpp"
#include "printers.hpp"

namespace {

using matu::AggregationConfig;
using matu::AllocationMatrix;
using matu::BinaryMask;
using matu::ClientUpdate;
using matu::CrossTaskMode;
using matu::SimilarityMatrix;
using matu::SoftMask;
using matu::TaskId;
using matu::TaskVector;

std::vector<double> as_vec(const TaskVector& v) { return v.raw(); }

ClientUpdate update_for(matu::ClientId client, std::map<TaskId, TaskVector> vectors,
                        std::map<TaskId, std::uint64_t> sizes, std::uint32_t round = 0) {
  ClientUpdate u;
  u.client = client;
  u.round = round;
  u.bundle = matu::build_bundle(vectors);
  u.dataset_sizes = std::move(sizes);
  return u;
}

// An update whose single task reconstructs exactly to `v`.
ClientUpdate single(matu::ClientId client, TaskId task, TaskVector v, std::uint64_t size = 1) {
  return update_for(client, {{task, std::move(v)}}, {{task, size}});
}

SimilarityMatrix matrix_from_row(const std::vector<double>& row) {
  std::vector<TaskId> ids;
  for (TaskId t = 0; t < row.size(); ++t) ids.push_back(t);
  SimilarityMatrix s(ids);
  for (std::size_t k = 0; k < row.size(); ++k) {
    s.set_index(0, k, row[k]);
    s.set_index(k, 0, row[k]);
  }
  return s;
}

TEST(Reconstruct, UnificationExample) {
  const auto u = update_for(0, {{0, {1, -2}}, {1, {3, 1}}}, {{0, 1}, {1, 1}});
  const auto r = matu::reconstruct_task_vector(u, 0);
  EXPECT_DOUBLE_EQ(r[0], 0.6 * 3);
  EXPECT_DOUBLE_EQ(r[1], 0.6 * -2);
  EXPECT_NEAR(r[0], 1.8, 1e-15);
  EXPECT_NEAR(r[1], -1.2, 1e-15);
  EXPECT_THROW(matu::reconstruct_task_vector(u, 5), std::invalid_argument);
}

TEST(Reconstruct, SingleTaskExactAndZero) {
  const TaskVector v{0.3, -0.1, 4};
  EXPECT_EQ(matu::reconstruct_task_vector(single(0, 2, v), 2), v);
  EXPECT_EQ(matu::reconstruct_task_vector(single(0, 2, TaskVector::zeros(3)), 2), TaskVector::zeros(3));
}

TEST(AgreementMask, UnanimityDisagreementAndThreshold) {
  {
    const auto m = matu::agreement_mask(0, {single(0, 0, {1, -1}), single(1, 0, {2, -3})}, 0.4);
    EXPECT_EQ(m, (SoftMask{1.0, 1.0}));
  }
  {
    const auto m = matu::agreement_mask(0, {single(0, 0, {1}), single(1, 0, {-1})}, 0.4);
    EXPECT_EQ(m[0], 0.0);
  }
  {
    const auto m =
        matu::agreement_mask(0, {single(0, 0, {1}), single(1, 0, {2}), single(2, 0, {-1})}, 0.4);
    EXPECT_DOUBLE_EQ(m[0], 1.0 / 3.0);
    EXPECT_EQ(m[0], oracle::agreement_mask({{1}, {2}, {-1}}, 0.4)[0]);
  }
}

TEST(AgreementMask, UsesMaskedUnifiedSigns) {
  // Client 0's unified vector is [3,-2]; its task-1 mask drops entry 1, so
  // only entry 0 votes for task 1.
  const auto a = update_for(0, {{0, {1, -2}}, {1, {3, 1}}}, {{0, 1}, {1, 1}});
  const auto b = update_for(1, {{1, {2, 1}}}, {{1, 1}});
  const auto m = matu::agreement_mask(1, {a, b}, 0.6);
  EXPECT_EQ(m[0], 1.0);
  EXPECT_EQ(m[1], 0.5);
}

TEST(AgreementMask, EmptyRejected) {
  EXPECT_THROW(matu::agreement_mask(0, {}, 0.4), std::invalid_argument);
  EXPECT_THROW(matu::agreement_mask(3, {single(0, 0, {1})}, 0.4), std::invalid_argument);
}

TEST(TaskSpecificAggregate, Examples) {
  const TaskVector v{0.5, -1.5};
  EXPECT_EQ(matu::task_specific_aggregate(0, {single(0, 0, v)}, SoftMask::ones(2)), v);
  EXPECT_EQ(matu::task_specific_aggregate(0, {single(0, 0, v, 4), single(1, 0, v, 4)}, SoftMask::ones(2)), v);
  const auto out = matu::task_specific_aggregate(0, {single(0, 0, {2, 0}, 1), single(1, 0, {4, 0}, 3)},
                                                 SoftMask::ones(2));
  EXPECT_EQ(as_vec(out), (std::vector<double>{0.25 * 2 + 0.75 * 4, 0}));
  EXPECT_EQ(out[0], 3.5);
}

TEST(TaskSpecificAggregate, SoftMaskShrinks) {
  const auto out = matu::task_specific_aggregate(0, {single(0, 0, {2, -4})}, SoftMask{0.5, 0.25});
  EXPECT_EQ(as_vec(out), (std::vector<double>{1, -1}));
}

TEST(DatasetWeights, SumToOne) {
  const auto w = matu::dataset_weights(0, {single(0, 0, {1}, 3), single(1, 0, {1}, 5), single(2, 0, {1}, 2)});
  EXPECT_DOUBLE_EQ(w[0] + w[1] + w[2], 1.0);
  EXPECT_DOUBLE_EQ(w[1], 0.5);
}

TEST(Similarity, Examples) {
  EXPECT_EQ(matu::sign_similarity({1, -2, 3}, {5, -1, 0.1}), 1.0);
  EXPECT_EQ(matu::sign_similarity({1, -2, 3}, {-5, 1, -0.1}), 0.0);
  EXPECT_EQ(matu::sign_similarity({1, 1, 1, 1}, {1, 1, -1, -1}), 0.5);
  EXPECT_EQ(matu::sign_similarity({1, 0}, {1, 1}), oracle::similarity({1, 0}, {1, 1}));
  EXPECT_EQ(matu::sign_similarity({1, 0}, {1, 1}), 0.75);
}

TEST(Similarity, MatrixSymmetricWithUnitDiagonal) {
  const auto s = matu::similarity_matrix({{0, {1, -1, 2}}, {3, {-1, -1, 2}}, {5, {2, 2, -2}}});
  for (TaskId a : {0, 3, 5}) {
    EXPECT_EQ(s.at(a, a), 1.0);
    for (TaskId b : {0, 3, 5}) EXPECT_EQ(s.at(a, b), s.at(b, a));
  }
  EXPECT_DOUBLE_EQ(s.at(0, 3), oracle::similarity({1, -1, 2}, {-1, -1, 2}));
}

TEST(TopK, FilterSortTruncate) {
  const auto s = matrix_from_row({1.0, 0.9, 0.4, 0.6});
  EXPECT_EQ(matu::top_k_similar(0, s, 0.5, 3), (std::vector<TaskId>{1, 3}));
  EXPECT_EQ(matu::top_k_similar(0, s, 0.5, 1), (std::vector<TaskId>{1}));
  EXPECT_TRUE(matu::top_k_similar(0, s, 0.95, 3).empty());
  EXPECT_TRUE(matu::top_k_similar(0, s, 0.5, 0).empty());
}

TEST(TopK, TiesBreakByAscendingId) {
  const auto s = matrix_from_row({1.0, 0.7, 0.8, 0.7, 0.7});
  EXPECT_EQ(matu::top_k_similar(0, s, 0.5, 3), (std::vector<TaskId>{2, 1, 3}));
}

TEST(TopK, StrictThreshold) {
  const auto s = matrix_from_row({1.0, 0.5, 0.50000001});
  EXPECT_EQ(matu::top_k_similar(0, s, 0.5, 3), (std::vector<TaskId>{2}));
}

TEST(CrossTask, Examples) {
  std::vector<TaskId> ids{0, 1, 2};
  SimilarityMatrix s(ids);
  s.set_index(0, 1, 0.8);
  s.set_index(0, 2, 0.6);
  const std::map<TaskId, TaskVector> agg{{0, {9, 9}}, {1, {1, 0}}, {2, {0, 2}}};
  const auto out = matu::cross_task_aggregate(0, {1, 2}, s, SoftMask::ones(2), agg, CrossTaskMode::kSimilarityWeighted);
  EXPECT_DOUBLE_EQ(out[0], 0.8);
  EXPECT_DOUBLE_EQ(out[1], 1.2);

  EXPECT_EQ(matu::cross_task_aggregate(0, {}, s, SoftMask::ones(2), agg, CrossTaskMode::kSimilarityWeighted),
            TaskVector::zeros(2));
  const auto uni = matu::cross_task_aggregate(0, {1, 2}, s, SoftMask::ones(2), agg, CrossTaskMode::kUniform);
  EXPECT_EQ(as_vec(uni), (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(matu::cross_task_aggregate(0, {1, 2}, s, SoftMask::ones(2), agg, CrossTaskMode::kOff),
            TaskVector::zeros(2));
}

TEST(CrossTask, UnitWeightIdentity) {
  SimilarityMatrix s({0, 1});
  s.set_index(0, 1, 1.0);
  const TaskVector v{0.25, -3};
  EXPECT_EQ(matu::cross_task_aggregate(0, {1}, s, SoftMask::ones(2), {{0, {0, 0}}, {1, v}},
                                       CrossTaskMode::kSimilarityWeighted),
            v);
}

TEST(CrossTask, UsesTargetMask) {
  SimilarityMatrix s({0, 1});
  s.set_index(0, 1, 1.0);
  const auto out = matu::cross_task_aggregate(0, {1}, s, SoftMask{0.5, 0.0}, {{0, {0, 0}}, {1, {4, 4}}},
                                              CrossTaskMode::kSimilarityWeighted);
  EXPECT_EQ(as_vec(out), (std::vector<double>{2, 0}));
}

TEST(CrossTask, MissingAggregateRejected) {
  SimilarityMatrix s({0, 1});
  EXPECT_THROW(matu::cross_task_aggregate(0, {1}, s, SoftMask::ones(1), {{0, {1}}},
                                          CrossTaskMode::kSimilarityWeighted),
               std::invalid_argument);
}

TEST(Combine, SumAndMean) {
  EXPECT_EQ(as_vec(matu::combine_update({1, -1}, {0.5, 0.5}, matu::CombineMode::kSum)),
            (std::vector<double>{1.5, -0.5}));
  EXPECT_EQ(matu::combine_update({1, -1}, {0, 0}, matu::CombineMode::kSum), (TaskVector{1, -1}));
  // mean: average of the same-task vector and the weight-normalised transfer
  EXPECT_EQ(as_vec(matu::combine_update({1, -1}, {1.4, 0.7}, matu::CombineMode::kMean, 1.4)),
            (std::vector<double>{1.0, -0.25}));
  EXPECT_THROW(matu::combine_update({1}, {1, 2}, matu::CombineMode::kSum), std::invalid_argument);
  EXPECT_THROW(matu::combine_update({1}, {1}, matu::CombineMode::kMean, 0.0), std::invalid_argument);
}

TEST(Payload, SharedTaskSetsGiveIdenticalBytes) {
  auto state = matu::TaskState::initial(3, 3);
  state.tasks[0].vector = TaskVector{1, -1, 0};
  state.tasks[2].vector = TaskVector{0, 0, 5};
  const auto p1 = matu::form_client_payload({0, 2}, state);
  const auto p2 = matu::form_client_payload({0, 2}, state);
  EXPECT_EQ(matu::encode_bundle(p1, 0, 1), matu::encode_bundle(p2, 0, 1));
  EXPECT_EQ(matu::modulate(p1.unified, p1.per_task.at(0)), state.tasks[0].vector);
  EXPECT_THROW(matu::form_client_payload({7}, state), std::invalid_argument);
}

AllocationMatrix allocation(std::size_t n, std::size_t t, const std::vector<std::vector<TaskId>>& rows) {
  AllocationMatrix a(n, t);
  for (std::size_t c = 0; c < rows.size(); ++c)
    for (TaskId task : rows[c]) a.assign(c, task);
  return a;
}

TEST(ServerRound, SingleClientSingleTaskCollapses) {
  AggregationConfig cfg;
  cfg.cross_task = CrossTaskMode::kOff;
  const TaskVector v{0.5, -2, 0};
  const auto out = matu::run_server_round({single(0, 0, v)}, allocation(1, 1, {{0}}),
                                          matu::TaskState::initial(3, 1), cfg);
  EXPECT_EQ(out.state.at(0).vector, v);
  EXPECT_EQ(out.state.at(0).last_updated, 0u);
  EXPECT_EQ(matu::modulate(out.payloads.at(0).unified, out.payloads.at(0).per_task.at(0)), v);
}

TEST(ServerRound, AbsentTasksCarryForward) {
  auto state = matu::TaskState::initial(2, 2);
  state.tasks[1].vector = TaskVector{7, -7};
  const auto out = matu::run_server_round({single(0, 0, {1, 1})}, allocation(2, 2, {{0}, {1}}), state,
                                          AggregationConfig{});
  EXPECT_EQ(out.state.at(1), state.at(1));
}

TEST(ServerRound, EmptyRoundIsNoOp) {
  const auto state = matu::TaskState::initial(2, 2);
  const auto out = matu::run_server_round({}, allocation(2, 2, {{0}, {1}}), state, AggregationConfig{});
  EXPECT_EQ(out.state, state);
  EXPECT_TRUE(out.payloads.empty());
}

TEST(ServerRound, RejectsUpdatesOutsideAllocation) {
  EXPECT_THROW(matu::run_server_round({single(0, 1, {1, 1})}, allocation(2, 2, {{0}, {1}}),
                                      matu::TaskState::initial(2, 2), AggregationConfig{}),
               std::invalid_argument);
}

TEST(ServerRound, CrossTaskSkippedOnFirstAppearance) {
  AggregationConfig cfg;
  const auto alloc = allocation(2, 2, {{0}, {1}});
  const auto r0 = matu::run_server_round({single(0, 0, {1, 1}, 1), single(1, 1, {2, 2}, 1)}, alloc,
                                         matu::TaskState::initial(2, 2), cfg);
  for (const auto& rec : r0.transcript) EXPECT_EQ(rec.num_similar, 0u);
  EXPECT_EQ(r0.state.at(0).vector, (TaskVector{1, 1}));

  auto u0 = single(0, 0, {1, 1});
  auto u1 = single(1, 1, {2, 2});
  u0.round = u1.round = 1;
  const auto r1 = matu::run_server_round({u0, u1}, alloc, r0.state, cfg);
  EXPECT_EQ(r1.transcript[0].num_similar, 1u);
  // mean of [1,1] and the S-normalised transfer [2,2]
  EXPECT_EQ(r1.state.at(0).vector, (TaskVector{1.5, 1.5}));
}

TEST(ServerRound, PlantedClustersOnlyTransferWithinCluster) {
  // Two clusters with opposed signs on every coordinate.
  const std::vector<TaskVector> vs{{1, 1, -1, -1}, {2, 1, -2, -1}, {-1, -1, 1, 1}, {-2, -1, 1, 2}};
  AllocationMatrix alloc(4, 4);
  for (std::size_t c = 0; c < 4; ++c) alloc.assign(c, c);
  matu::TaskState state = matu::TaskState::initial(4, 4);
  for (TaskId t = 0; t < 4; ++t) {
    state.tasks[t].vector = vs[t];
    state.tasks[t].last_updated = 0;
  }
  std::vector<ClientUpdate> ups;
  for (TaskId t = 0; t < 4; ++t) {
    ups.push_back(single(static_cast<matu::ClientId>(t), t, vs[t]));
    ups.back().round = 1;
  }
  const auto out = matu::run_server_round(ups, alloc, state, AggregationConfig{});
  for (TaskId t = 0; t < 4; ++t) {
    const auto z = matu::top_k_similar(t, out.similarity, 0.5, 3);
    ASSERT_EQ(z.size(), 1u);
    EXPECT_EQ(z[0] / 2, t / 2);
  }
}

TEST(ServerRound, Stateless) {
  const auto alloc = allocation(2, 2, {{0, 1}, {1}});
  const std::vector<ClientUpdate> ups{update_for(0, {{0, {1, -2}}, {1, {3, 1}}}, {{0, 2}, {1, 5}}),
                                      single(1, 1, {1, 1}, 3)};
  const auto a = matu::run_server_round(ups, alloc, matu::TaskState::initial(2, 2), AggregationConfig{});
  const auto b = matu::run_server_round({ups[1], ups[0]}, alloc, matu::TaskState::initial(2, 2),
                                        AggregationConfig{});
  EXPECT_EQ(a.state, b.state);
  EXPECT_EQ(a.payloads, b.payloads);
  EXPECT_EQ(a.transcript, b.transcript);
}

}  // namespace
