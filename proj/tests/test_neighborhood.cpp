/*
 * Copyright 2026 The kper Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "kper/ckg.hpp"
#include "kper/neighborhood.hpp"

namespace kper {
namespace {

// u1 -> {i1, i2}; i1 -> e1, e2; i2 -> e3; e1 -> e4.
// Internal ids: users u0 u1; items i0 i1 i2 (0..2); entities e1..e4 = 3..6.
CollaborativeKnowledgeGraph worked_example() {
  std::vector<Interaction> rows = {{1, 1, 1}, {1, 2, 1}, {0, 0, 1}, {0, 1, 1}};
  std::vector<Triple> kg = {{1, 0, 3}, {1, 1, 4}, {2, 0, 5}, {3, 2, 6}, {0, 1, 4}};
  return CollaborativeKnowledgeGraph::build(2, 3, 7, 3, rows, kg);
}

std::set<Id> as_set(const EntitySet& s) { return {s.begin(), s.end()}; }

TEST(Entities, WorkedExampleUserSets) {
  auto g = worked_example();
  EXPECT_EQ(as_set(initial_entities(g, NodeKind::kUser, 1)), (std::set<Id>{1, 2}));
  EXPECT_EQ(as_set(expand_hop(g, initial_entities(g, NodeKind::kUser, 1))),
            (std::set<Id>{3, 4, 5}));
}

TEST(Entities, IsolatedUserHasEmptySet) {
  auto g = CollaborativeKnowledgeGraph::build(2, 2, 2, 1, {{0, 0, 1}}, {});
  EXPECT_TRUE(initial_entities(g, NodeKind::kUser, 1).empty());
  EXPECT_TRUE(expand_hop(g, {}).empty());
}

TEST(Entities, ItemSetsMatchBipartiteWalk) {
  auto g = worked_example();
  for (Id i = 0; i < 3; ++i) {
    // brute force: i itself plus every item co-interacted through some user
    std::set<Id> expected{i};
    for (const auto& a : g.interactions()) {
      if (a.item != i || a.label != 1) continue;
      for (const auto& b : g.interactions()) {
        if (b.user == a.user && b.label == 1) expected.insert(b.item);
      }
    }
    EXPECT_EQ(as_set(initial_entities(g, NodeKind::kItem, i)), expected) << "item " << i;
  }
}

TEST(Entities, ChainExpansion) {
  // i0 -> e1 -> e2
  auto g = CollaborativeKnowledgeGraph::build(1, 1, 3, 1, {{0, 0, 1}}, {{0, 0, 1}, {1, 0, 2}});
  EntitySet e1 = expand_hop(g, {0});
  EXPECT_EQ(e1, (EntitySet{1}));
  EXPECT_EQ(expand_hop(g, e1), (EntitySet{2}));
}

TEST(Entities, ExpansionEqualsSetComprehension) {
  auto g = worked_example();
  for (const EntitySet& prev : {EntitySet{0}, EntitySet{1, 2}, EntitySet{0, 3}, EntitySet{3, 4, 5}}) {
    std::set<Id> expected;
    for (const Triple& t : g.triples()) {
      if (std::find(prev.begin(), prev.end(), t.head) != prev.end()) expected.insert(t.tail);
    }
    EXPECT_EQ(as_set(expand_hop(g, prev)), expected);
  }
}

TEST(TripleSampling, SmallPoolIsPadded) {
  auto g = worked_example();
  auto s = sample_triples(g, {1}, 4, 9);
  ASSERT_EQ(s.size(), 4u);
  std::map<Triple, int> counts;
  for (const auto& t : s) ++counts[t];
  EXPECT_EQ(counts.size(), 2u);
  EXPECT_GE(counts[(Triple{1, 0, 3})], 1);
  EXPECT_GE(counts[(Triple{1, 1, 4})], 1);
}

TEST(TripleSampling, SingleTriplePoolRepeats) {
  auto g = worked_example();
  auto s = sample_triples(g, {2}, 4, 1);
  ASSERT_EQ(s.size(), 4u);
  for (const auto& t : s) EXPECT_EQ(t, (Triple{2, 0, 5}));
}

TEST(TripleSampling, LargePoolDeterministicAndDistinct) {
  std::vector<Triple> kg;
  for (Id k = 0; k < 100; ++k) kg.push_back({0, k % 3, 1 + k % 50});
  auto g = CollaborativeKnowledgeGraph::build(1, 1, 51, 3, {{0, 0, 1}}, kg);
  auto a = sample_triples(g, {0}, 16, 77);
  auto b = sample_triples(g, {0}, 16, 77);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 16u);
  // without replacement when the pool is large enough: 16 distinct positions,
  // which may still repeat a (h, r, t) value since kg has duplicates
  EXPECT_NE(a, sample_triples(g, {0}, 16, 78));
}

TEST(TripleSampling, EmptyPool) {
  auto g = worked_example();
  EXPECT_TRUE(sample_triples(g, {}, 4, 1).empty());
  EXPECT_TRUE(sample_triples(g, {6}, 4, 1).empty());
  EXPECT_THROW(sample_triples(g, {1}, 0, 1), std::invalid_argument);
}

TEST(InteractiveSampling, PaddedDeterministicAndEmpty) {
  auto g = worked_example();
  auto s = sample_interactive_neighbors(g, NodeKind::kUser, 0, 8, 5);
  ASSERT_EQ(s.size(), 8u);
  for (Id x : s) EXPECT_TRUE(x == 0 || x == 1);
  EXPECT_EQ(s, sample_interactive_neighbors(g, NodeKind::kUser, 0, 8, 5));
  auto item_side = sample_interactive_neighbors(g, NodeKind::kItem, 1, 3, 5);
  ASSERT_EQ(item_side.size(), 3u);
  for (Id u : item_side) EXPECT_TRUE(u == 0 || u == 1);
  auto lone = CollaborativeKnowledgeGraph::build(2, 1, 1, 1, {{0, 0, 1}}, {});
  EXPECT_TRUE(sample_interactive_neighbors(lone, NodeKind::kUser, 1, 8, 5).empty());
}

TEST(Neighborhoods, HopConsistencyAndFixedSize) {
  auto g = worked_example();
  const std::size_t l = 4, K = 3;
  auto nb = build_neighborhoods(g, l, K, 123, 0);
  for (NodeKind kind : {NodeKind::kUser, NodeKind::kItem}) {
    const Id n = kind == NodeKind::kUser ? 2 : 3;
    for (Id node = 0; node < n; ++node) {
      EntitySet frontier = initial_entities(g, kind, node);
      EXPECT_EQ(nb.interactive(kind, node).size(), g.neighbors(kind, node).empty() ? 0u : l);
      for (std::size_t k = 1; k <= K; ++k) {
        auto hop = nb.hop(kind, node, k);
        if (triple_pool_size(g, frontier) == 0) {
          EXPECT_TRUE(hop.empty());
        } else {
          EXPECT_EQ(hop.size(), l);
        }
        for (const Triple& t : hop) {
          EXPECT_TRUE(std::binary_search(frontier.begin(), frontier.end(), t.head))
              << "hop " << k << " head " << t.head;
        }
        frontier = expand_hop(g, frontier);
      }
    }
  }
}

TEST(Neighborhoods, DeterministicPerEpochAndThreadCount) {
  auto g = worked_example();
  auto a = build_neighborhoods(g, 4, 2, 5, 3, 1);
  EXPECT_EQ(a, build_neighborhoods(g, 4, 2, 5, 3, 1));
  EXPECT_EQ(a, build_neighborhoods(g, 4, 2, 5, 3, 4));
  EXPECT_NE(a, build_neighborhoods(g, 4, 2, 5, 4, 1));
}

}  // namespace
}  // namespace kper
