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
#include "kper/errors.hpp"
#include "kper/rng.hpp"
#include "kper/synthetic.hpp"
#include "test_support.hpp"

namespace kper {
namespace {

using testing::TempDir;
using testing::write_text;

CollaborativeKnowledgeGraph graph_from(std::size_t users, std::size_t items,
                                       std::vector<Interaction> rows,
                                       std::vector<Triple> triples = {},
                                       std::size_t entities = 0, std::size_t relations = 1) {
  return CollaborativeKnowledgeGraph::build(users, items, std::max(entities, items), relations,
                                            std::move(rows), std::move(triples));
}

TEST(Loader, ThreeLineFixture) {
  TempDir dir;
  write_text(dir / "r.tsv", "0\t0\t1\n0\t1\t0\n");
  write_text(dir / "k.tsv", "0\t0\t2\n");
  LoadedGraph g = load_ckg(dir / "r.tsv", dir / "k.tsv");
  EXPECT_EQ(g.graph.num_users(), 1u);
  EXPECT_EQ(g.graph.num_items(), 2u);
  EXPECT_EQ(g.graph.num_entities(), 3u);
  EXPECT_EQ(g.graph.num_relations(), 1u);
  auto items = g.graph.user_items(0);
  ASSERT_EQ(items.size(), 1u);
  EXPECT_EQ(items[0], 0u);
  EXPECT_EQ(g.graph.triples().size(), 1u);
  EXPECT_EQ(g.graph.triples()[0], (Triple{0, 0, 2}));
}

TEST(Loader, EmptyKnowledgeGraphIsValid) {
  TempDir dir;
  write_text(dir / "r.tsv", "5\t7\t1\n6\t7\t1\n6\t9\t0\n");
  write_text(dir / "k.tsv", "");
  LoadedGraph g = load_ckg(dir / "r.tsv", dir / "k.tsv");
  EXPECT_EQ(g.graph.triples().size(), 0u);
  EXPECT_EQ(g.graph.num_users(), 2u);
  EXPECT_EQ(g.graph.num_items(), 2u);
  EXPECT_EQ(g.graph.num_entities(), 2u);
}

TEST(Loader, RemapsToContiguousIdsAndKeepsOriginals) {
  TempDir dir;
  write_text(dir / "r.tsv", "# comment\n40\t3\t1\n10\t1\t1\n10\t3\t0\n");
  write_text(dir / "k.tsv", "3\t8\t20\n1\t5\t3\n");
  LoadedGraph g = load_ckg(dir / "r.tsv", dir / "k.tsv");
  EXPECT_EQ(g.ids.users, (std::vector<std::int64_t>{10, 40}));
  EXPECT_EQ(g.ids.items, (std::vector<std::int64_t>{1, 3}));
  EXPECT_EQ(g.ids.entities, (std::vector<std::int64_t>{1, 3, 20}));
  EXPECT_EQ(g.ids.relations, (std::vector<std::int64_t>{5, 8}));
  // 40 -> user 1, item 3 -> 1
  EXPECT_TRUE(g.graph.is_positive(1, 1));
  EXPECT_TRUE(g.graph.is_positive(0, 0));
  EXPECT_FALSE(g.graph.is_positive(0, 1));
  EXPECT_EQ(g.graph.triples()[0], (Triple{1, 1, 2}));
  EXPECT_EQ(g.graph.triples()[1], (Triple{0, 0, 1}));

  write_idmap(dir / "idmap.tsv", g.ids);
  EXPECT_EQ(read_idmap(dir / "idmap.tsv"), g.ids);
}

TEST(Loader, MalformedLineNamesTheLine) {
  TempDir dir;
  write_text(dir / "r.tsv", "0\t0\t1\n0\tx\t1\n");
  write_text(dir / "k.tsv", "0\t0\t1\n");
  try {
    load_ckg(dir / "r.tsv", dir / "k.tsv");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("r.tsv:2"), std::string::npos);
  }
  write_text(dir / "k2.tsv", "0\t0\n");
  write_text(dir / "r2.tsv", "0\t0\t1\n");
  EXPECT_THROW(load_ckg(dir / "r2.tsv", dir / "k2.tsv"), ParseError);
}

TEST(Loader, ItemOutsideEntitySpaceIsRejected) {
  TempDir dir;
  write_text(dir / "r.tsv", "0\t50\t1\n");
  write_text(dir / "k.tsv", "0\t0\t10\n");
  EXPECT_THROW(load_ckg(dir / "r.tsv", dir / "k.tsv"), ValidationError);
}

TEST(Loader, PositivesOnlyMode) {
  TempDir dir;
  write_text(dir / "r.tsv", "0\t0\n0\t1\n1\t1\n");
  write_text(dir / "k.tsv", "0\t0\t2\n");
  LoadedGraph g = load_ckg(dir / "r.tsv", dir / "k.tsv", LoadOptions{false});
  EXPECT_EQ(g.graph.num_positives(), 3u);
  EXPECT_THROW(load_ckg(dir / "r.tsv", dir / "k.tsv"), ParseError);
}

TEST(Loader, ReloadIsIdentical) {
  TempDir dir;
  write_text(dir / "r.tsv", "3\t1\t1\n2\t1\t0\n2\t0\t1\n1\t0\t1\n");
  write_text(dir / "k.tsv", "0\t1\t4\n1\t0\t4\n4\t1\t5\n");
  LoadedGraph a = load_ckg(dir / "r.tsv", dir / "k.tsv");
  LoadedGraph b = load_ckg(dir / "r.tsv", dir / "k.tsv");
  EXPECT_EQ(a.ids, b.ids);
  EXPECT_EQ(a.graph.interactions(), b.graph.interactions());
  EXPECT_EQ(a.graph.triples(), b.graph.triples());
}

TEST(Graph, AdjacencyMatchesInteractionList) {
  std::vector<Interaction> rows = {{0, 1, 1}, {0, 2, 1}, {1, 2, 1}, {2, 0, 0}, {1, 0, 0}};
  auto g = graph_from(3, 3, rows, {{0, 0, 3}, {0, 1, 4}, {3, 0, 4}}, 5, 2);
  for (Id u = 0; u < 3; ++u) {
    std::set<Id> expected;
    for (const auto& r : rows) {
      if (r.user == u && r.label == 1) expected.insert(r.item);
    }
    auto got = g.user_items(u);
    EXPECT_EQ(std::set<Id>(got.begin(), got.end()), expected);
  }
  for (Id i = 0; i < 3; ++i) {
    std::set<Id> expected;
    for (const auto& r : rows) {
      if (r.item == i && r.label == 1) expected.insert(r.user);
    }
    auto got = g.item_users(i);
    EXPECT_EQ(std::set<Id>(got.begin(), got.end()), expected);
  }
  EXPECT_EQ(g.outgoing(0).size(), 2u);
  EXPECT_EQ(g.outgoing(3).size(), 1u);
  EXPECT_EQ(g.outgoing(4).size(), 0u);
}

TEST(Graph, RejectsDuplicatePositivesAndBadRanges) {
  EXPECT_THROW(graph_from(1, 2, {{0, 1, 1}, {0, 1, 1}}), ValidationError);
  EXPECT_THROW(graph_from(1, 2, {{1, 0, 1}}), ValidationError);
  EXPECT_THROW(graph_from(1, 2, {{0, 0, 1}}, {{0, 0, 9}}, 3), ValidationError);
  EXPECT_THROW(CollaborativeKnowledgeGraph::build(1, 3, 2, 1, {}, {}), ValidationError);
}

std::vector<Interaction> positives_grid(std::size_t users, std::size_t per_user,
                                        std::size_t items) {
  std::vector<Interaction> rows;
  for (Id u = 0; u < users; ++u) {
    for (std::size_t k = 0; k < per_user; ++k) {
      rows.push_back({u, static_cast<Id>((u * 3 + k) % items), 1});
    }
  }
  return rows;
}

TEST(Split, TenInteractionsSixTwoTwo) {
  auto g = graph_from(5, 10, positives_grid(5, 2, 10));
  DatasetSplit s = split_dataset(g, 7);
  EXPECT_EQ(s.train.size(), 6u);
  EXPECT_EQ(s.validation.size(), 2u);
  EXPECT_EQ(s.test.size(), 2u);
  DatasetSplit again = split_dataset(g, 7);
  EXPECT_EQ(s.train, again.train);
  EXPECT_EQ(s.validation, again.validation);
  EXPECT_EQ(s.test, again.test);
}

TEST(Split, HundredInteractionsCoverageAndPartition) {
  auto g = graph_from(20, 30, positives_grid(20, 5, 30));
  ASSERT_EQ(g.interactions().size(), 100u);
  DatasetSplit s = split_dataset(g, 99);
  EXPECT_EQ(s.train.size(), 60u);
  EXPECT_EQ(s.validation.size(), 20u);
  EXPECT_EQ(s.test.size(), 20u);

  std::multiset<std::tuple<Id, Id, int>> all, parts;
  for (const auto& x : g.interactions()) all.insert({x.user, x.item, x.label});
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    for (const auto& x : *part) parts.insert({x.user, x.item, x.label});
  }
  EXPECT_EQ(all, parts);

  std::map<Id, int> total, in_train;
  for (const auto& x : g.interactions()) total[x.user] += x.label;
  for (const auto& x : s.train) in_train[x.user] += x.label;
  for (auto [u, n] : total) {
    if (n >= 2) {
      EXPECT_GE(in_train[u], 1) << "user " << u;
    }
  }
}

TEST(Split, StratifiedByLabel) {
  auto rows = positives_grid(10, 5, 30);
  for (Id u = 0; u < 10; ++u) {
    for (Id k = 0; k < 5; ++k) rows.push_back({u, static_cast<Id>((u * 3 + 10 + k) % 30), 0});
  }
  // drop negatives that collide with a positive
  std::set<std::pair<Id, Id>> pos;
  for (const auto& r : rows) {
    if (r.label) pos.insert({r.user, r.item});
  }
  std::erase_if(rows, [&](const Interaction& r) { return !r.label && pos.count({r.user, r.item}); });
  auto g = graph_from(10, 30, rows);
  DatasetSplit s = split_dataset(g, 1);
  auto count = [](const std::vector<Interaction>& v, int label) {
    return std::count_if(v.begin(), v.end(), [&](const Interaction& x) { return x.label == label; });
  };
  for (int label : {0, 1}) {
    const auto n = count(g.interactions(), label);
    const auto fifth = (2 * n + 5) / 10;
    EXPECT_NEAR(count(s.validation, label), fifth, 1);
    EXPECT_NEAR(count(s.test, label), fifth, 1);
    EXPECT_NEAR(count(s.train, label), n - 2 * fifth, 1);
  }
}

TEST(Split, TooFewInteractions) {
  auto g = graph_from(2, 4, {{0, 0, 1}, {0, 1, 1}, {1, 2, 1}, {1, 3, 1}});
  EXPECT_THROW(split_dataset(g, 1), ValidationError);
}

TEST(Negatives, CountMatchesAndAvoidsPositives) {
  auto g = graph_from(3, 12, {{0, 1, 1}, {0, 4, 1}, {0, 7, 1}, {1, 0, 1}, {2, 11, 1}, {2, 3, 1}});
  auto pos = positives_of(g.interactions());
  NegativeSample neg = sample_negatives(g, pos, 5);
  EXPECT_TRUE(neg.warnings.empty());
  std::map<Id, int> per_user;
  for (const auto& x : neg.negatives) {
    EXPECT_EQ(x.label, 0);
    EXPECT_FALSE(g.is_positive(x.user, x.item));
    ++per_user[x.user];
  }
  EXPECT_EQ(per_user[0], 3);
  EXPECT_EQ(per_user[1], 1);
  EXPECT_EQ(per_user[2], 2);
}

TEST(Negatives, UserWithEveryItemWarns) {
  auto g = graph_from(2, 3, {{0, 0, 1}, {0, 1, 1}, {0, 2, 1}, {1, 0, 1}});
  NegativeSample neg = sample_negatives(g, positives_of(g.interactions()), 5);
  ASSERT_EQ(neg.warnings.size(), 1u);
  EXPECT_NE(neg.warnings[0].find("user 0"), std::string::npos);
  std::size_t from_zero = 0;
  for (const auto& x : neg.negatives) {
    if (x.user == 0) {
      ++from_zero;
      EXPECT_LT(x.item, 3u);
    } else {
      EXPECT_FALSE(g.is_positive(x.user, x.item));
    }
  }
  EXPECT_EQ(from_zero, 3u);
}

TEST(Negatives, SeededReplayTwoUsers) {
  // Replays the per-user stream by hand: draw uniform indices, skip positives
  // and repeats, stop at the positive count.
  auto g = graph_from(2, 8, {{0, 2, 1}, {0, 5, 1}, {1, 0, 1}});
  const std::uint64_t seed = 42;
  NegativeSample neg = sample_negatives(g, positives_of(g.interactions()), seed);
  std::vector<Interaction> expected;
  for (Id u = 0; u < 2; ++u) {
    Rng rng(mix_seed({seed, 0x7e6ULL, u}));
    std::set<Id> seen;
    const std::size_t want = g.user_items(u).size();
    while (seen.size() < want) {
      const Id item = static_cast<Id>(rng.index(8));
      if (g.is_positive(u, item) || seen.count(item)) continue;
      seen.insert(item);
      expected.push_back({u, item, 0});
    }
  }
  EXPECT_EQ(neg.negatives, expected);
  EXPECT_EQ(sample_negatives(g, positives_of(g.interactions()), seed).negatives, expected);
}

TEST(Negatives, EvaluationNegativesAttachedOnce) {
  auto g = graph_from(10, 30, positives_grid(10, 5, 30));
  DatasetSplit s = split_dataset(g, 4);
  const auto val_pos = s.validation.size();
  attach_evaluation_negatives(g, s);
  EXPECT_EQ(s.validation.size(), 2 * val_pos);
  const auto before = s.validation;
  attach_evaluation_negatives(g, s);
  EXPECT_EQ(s.validation, before);
  for (const auto& x : s.test) {
    if (x.label == 0) {
      EXPECT_FALSE(g.is_positive(x.user, x.item));
    }
  }
}

TEST(Prepared, RoundTrip) {
  TempDir dir;
  auto g = graph_from(10, 30, positives_grid(10, 5, 30), {{0, 0, 31}, {31, 1, 32}}, 33, 2);
  DatasetSplit s = split_dataset(g, 4);
  attach_evaluation_negatives(g, s);
  write_prepared(dir.path(), g, s);
  PreparedData back = read_prepared(dir.path());
  EXPECT_EQ(back.split.train, s.train);
  EXPECT_EQ(back.split.validation, s.validation);
  EXPECT_EQ(back.split.test, s.test);
  EXPECT_EQ(back.split.split_seed, 4u);
  EXPECT_EQ(back.graph.triples(), g.triples());
  EXPECT_EQ(back.graph.num_entities(), 33u);
}

TEST(Synthetic, FewerInteractionsThanUsersIsRejected) {
  SyntheticSpec spec = SyntheticSpec::tiny(1);
  spec.users = 40;
  spec.entities = 25;
  EXPECT_THROW(generate_synthetic(spec), std::invalid_argument);
  spec.interactions = 120;
  const SyntheticData d = generate_synthetic(spec);
  std::set<Id> users;
  for (const auto& r : d.ratings) users.insert(r.user);
  EXPECT_EQ(users.size(), 40u);
}

}  // namespace
}  // namespace kper
