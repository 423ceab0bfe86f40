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
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "kper/errors.hpp"
#include "kper/evaluation.hpp"
#include "test_support.hpp"

namespace kper {
namespace {

// Scores from a fixed table.
class TableScorer : public Scorer {
 public:
  explicit TableScorer(std::vector<std::vector<double>> s) : s_(std::move(s)) {}
  void score(Id user, std::span<const Id> items, std::span<double> out) const override {
    for (std::size_t k = 0; k < items.size(); ++k) out[k] = s_[user][items[k]];
  }
  double probability(Id user, Id item) const override {
    return 1.0 / (1.0 + std::exp(-s_[user][item]));
  }

 private:
  std::vector<std::vector<double>> s_;
};

// Brute-force ranking: every candidate against every other, by count of
// items that beat it.
std::vector<Id> oracle_ranking(const std::vector<double>& scores, const std::set<Id>& excluded) {
  std::vector<std::pair<std::size_t, Id>> ranked;
  for (Id i = 0; i < scores.size(); ++i) {
    if (excluded.count(i)) continue;
    std::size_t better = 0;
    for (Id j = 0; j < scores.size(); ++j) {
      if (j == i || excluded.count(j)) continue;
      if (scores[j] > scores[i] || (scores[j] == scores[i] && j < i)) ++better;
    }
    ranked.push_back({better, i});
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<Id> out;
  for (auto& r : ranked) out.push_back(r.second);
  return out;
}

struct Fixture {
  CollaborativeKnowledgeGraph graph;
  DatasetSplit split;
  std::vector<std::vector<double>> scores;
};

// 3 users, 6 items, hand-placed train/val/test positives and tied scores
Fixture three_users() {
  Fixture f;
  std::vector<Interaction> train = {{0, 0, 1}, {0, 1, 1}, {1, 1, 1}, {1, 2, 1}, {2, 0, 1},
                                    {2, 1, 1}, {2, 2, 1}, {0, 5, 0}};
  std::vector<Interaction> val = {{0, 2, 1}, {1, 4, 0}};
  std::vector<Interaction> test = {{0, 3, 1}, {0, 4, 1}, {1, 5, 1}, {1, 0, 0}, {2, 3, 0}};
  std::vector<Interaction> all = train;
  all.insert(all.end(), val.begin(), val.end());
  all.insert(all.end(), test.begin(), test.end());
  f.graph = CollaborativeKnowledgeGraph::build(3, 6, 6, 1, all, {});
  f.split.train = train;
  f.split.validation = val;
  f.split.test = test;
  f.scores = {{0.9, 0.1, 0.8, 0.3, 0.3, 0.7},
              {0.2, 0.2, 0.2, 0.2, 0.2, 0.1},
              {0.5, 0.4, 0.3, 0.2, 0.1, 0.0}};
  return f;
}

TEST(TopK, SingleUserPerfectFirstHit) {
  RankingTask t;
  t.users = {0};
  t.targets = {{1}};
  t.excluded = {{}};
  t.num_items = 3;
  std::vector<std::vector<Id>> rankings = {{1, 0, 2}};
  const std::size_t ks[] = {1};
  TopKMetrics m = topk_metrics(t, rankings, ks);
  EXPECT_EQ(m.recall[0], 1.0);
  EXPECT_EQ(m.precision[0], 1.0);
}

TEST(TopK, TaskExcludesTrainAndValidationPositives) {
  Fixture f = three_users();
  RankingTask t = test_ranking_task(f.graph, f.split);
  ASSERT_EQ(t.users, (std::vector<Id>{0, 1}));  // user 2 has no test positive
  EXPECT_EQ(t.targets[0], (std::vector<Id>{3, 4}));
  EXPECT_EQ(t.excluded[0], (std::vector<Id>{0, 1, 2}));
  EXPECT_EQ(t.targets[1], (std::vector<Id>{5}));
  EXPECT_EQ(t.excluded[1], (std::vector<Id>{1, 2}));
}

TEST(TopK, ThreeUserFixtureAgainstOracle) {
  Fixture f = three_users();
  TableScorer scorer(f.scores);
  RankingTask t = test_ranking_task(f.graph, f.split);
  auto rankings = rank_top(scorer, t, 6);
  for (std::size_t u = 0; u < t.users.size(); ++u) {
    std::set<Id> ex(t.excluded[u].begin(), t.excluded[u].end());
    EXPECT_EQ(rankings[u], oracle_ranking(f.scores[t.users[u]], ex));
  }
  // user 0 candidates 3 4 5 -> 5 (0.7), 3, 4 (tie to lower id)
  EXPECT_EQ(rankings[0], (std::vector<Id>{5, 3, 4}));
  const std::size_t ks[] = {1, 2, 3};
  TopKMetrics m = topk_metrics(t, rankings, ks);
  // user 1 candidates 0 3 4 5 -> 0 3 4 tied at 0.2, 5 last
  const double r1[] = {(0.0 / 2 + 0.0) / 2, (1.0 / 2 + 0.0) / 2, (2.0 / 2 + 0.0) / 2};
  const double p1[] = {0.0, (1.0 / 2 + 0.0) / 2, (2.0 / 3 + 0.0) / 2};
  for (int j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(m.recall[j], r1[j]);
    EXPECT_DOUBLE_EQ(m.precision[j], p1[j]);
  }
}

TEST(TopK, MonotoneInK) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0, 1);
  RankingTask t;
  std::vector<std::vector<Id>> rankings;
  for (Id user = 0; user < 20; ++user) {
    t.users.push_back(user);
    std::vector<Id> items(30);
    std::iota(items.begin(), items.end(), 0);
    std::shuffle(items.begin(), items.end(), gen);
    rankings.push_back(items);
    std::vector<Id> tg;
    for (Id i = 0; i < 30; ++i) {
      if (u(gen) < 0.2) tg.push_back(i);
    }
    if (tg.empty()) tg.push_back(user);
    t.targets.push_back(tg);
    t.excluded.push_back({});
  }
  t.num_items = 30;
  const std::size_t ks[] = {1, 2, 5, 10, 20, 30};
  TopKMetrics m = topk_metrics(t, rankings, ks);
  for (std::size_t j = 1; j < 6; ++j) {
    EXPECT_GE(m.recall[j], m.recall[j - 1]);
    EXPECT_GE(m.precision[j] * static_cast<double>(ks[j]),
              m.precision[j - 1] * static_cast<double>(ks[j - 1]) - 1e-12);
  }
  EXPECT_DOUBLE_EQ(m.recall[5], 1.0);
}

TEST(TopK, ThreadedRankingMatchesSerial) {
  Fixture f = three_users();
  TableScorer scorer(f.scores);
  RankingTask t = test_ranking_task(f.graph, f.split);
  EXPECT_EQ(rank_top(scorer, t, 4, 1), rank_top(scorer, t, 4, 3));
  EXPECT_EQ(top_ids(std::vector<Id>{4, 2, 9}, std::vector<double>{1, 1, 2}, 2),
            (std::vector<Id>{9, 2}));
}

// Mann-Whitney by explicit pair counting
double pair_auc(const std::vector<std::uint8_t>& y, const std::vector<double>& s) {
  double num = 0;
  double pairs = 0;
  for (std::size_t a = 0; a < y.size(); ++a) {
    for (std::size_t b = 0; b < y.size(); ++b) {
      if (y[a] != 1 || y[b] != 0) continue;
      pairs += 1;
      num += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
    }
  }
  return num / pairs;
}

TEST(Auc, HandCases) {
  EXPECT_EQ(auc(std::vector<std::uint8_t>{1, 1, 0, 0}, std::vector<double>{0.9, 0.8, 0.2, 0.1}), 1.0);
  EXPECT_EQ(auc(std::vector<std::uint8_t>{1, 0, 1, 0}, std::vector<double>{0.5, 0.5, 0.5, 0.5}), 0.5);
  // one inversion among four pos/neg pairs
  EXPECT_EQ(auc(std::vector<std::uint8_t>{1, 1, 0, 0}, std::vector<double>{0.9, 0.3, 0.5, 0.1}), 0.75);
}

TEST(Auc, SingleClassIsAnError) {
  EXPECT_THROW(auc(std::vector<std::uint8_t>{1, 1}, std::vector<double>{0.2, 0.4}),
               std::invalid_argument);
}

TEST(Auc, RandomTiesAgainstPairCount) {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> level(0, 6);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::uint8_t> y;
    std::vector<double> s;
    for (int k = 0; k < 40; ++k) {
      y.push_back(static_cast<std::uint8_t>(k % 3 == 0));
      s.push_back(level(gen) * 0.25);
    }
    EXPECT_NEAR(auc(y, s), pair_auc(y, s), 1e-14);
  }
}

TEST(Auc, CtrOverScorer) {
  Fixture f = three_users();
  TableScorer scorer(f.scores);
  const double a = ctr_auc(scorer, f.split.test);
  std::vector<std::uint8_t> y;
  std::vector<double> s;
  for (const auto& x : f.split.test) {
    y.push_back(x.label);
    s.push_back(scorer.probability(x.user, x.item));
  }
  EXPECT_NEAR(a, pair_auc(y, s), 1e-15);
}

TEST(Psr, ZeroExponentIsMicroRecall) {
  Fixture f = three_users();
  TableScorer scorer(f.scores);
  RankingTask t = test_ranking_task(f.graph, f.split);
  auto rankings = rank_top(scorer, t, 6);
  std::vector<std::size_t> deg = {7, 1, 0, 3, 2, 9};
  for (std::size_t k : {1, 2, 3}) {
    std::size_t hits = 0, total = 0;
    for (std::size_t u = 0; u < t.users.size(); ++u) {
      total += t.targets[u].size();
      for (std::size_t r = 0; r < std::min(k, rankings[u].size()); ++r) {
        hits += std::count(t.targets[u].begin(), t.targets[u].end(), rankings[u][r]);
      }
    }
    EXPECT_EQ(psr_at_k(t, rankings, k, 0.0, deg),
              static_cast<double>(hits) / static_cast<double>(total));
  }
}

RankingTask one_user(std::vector<Id> targets) {
  RankingTask t;
  t.users = {0};
  t.targets = {std::move(targets)};
  t.excluded = {{}};
  t.num_items = 4;
  return t;
}

TEST(Psr, SingleRecoveredItemIsOne) {
  std::vector<std::size_t> deg = {10, 1, 1, 1};
  EXPECT_DOUBLE_EQ(psr_at_k(one_user({0}), {{0, 1}}, 1, 0.1, deg), 1.0);
}

TEST(Psr, TwoItemHandCase) {
  // N+ = 1 for item 0, 100 for item 1; only the popular one recovered
  std::vector<std::size_t> deg = {1, 100, 1, 1};
  const double w = std::pow(100.0, -0.1);
  const double psr = psr_at_k(one_user({0, 1}), {{1, 2}}, 1, 0.1, deg);
  EXPECT_DOUBLE_EQ(psr, w / (1.0 + w));
  EXPECT_NEAR(psr, 0.38686, 1e-5);
}

TEST(Psr, UnseenItemsWeighLikeSingletons) {
  std::vector<std::size_t> zero = {0, 100, 1, 1}, one = {1, 100, 1, 1};
  EXPECT_EQ(psr_at_k(one_user({0, 1}), {{0}}, 1, 0.1, zero),
            psr_at_k(one_user({0, 1}), {{0}}, 1, 0.1, one));
  RankingTask empty;
  EXPECT_THROW(psr_at_k(empty, {}, 1, 0.1, zero), std::invalid_argument);
}

TEST(ColdGroups, GreedyCutFourOneOne) {
  std::vector<std::size_t> deg = {4, 1, 1};
  auto g = cold_user_groups(deg);
  EXPECT_EQ(g[0], (std::vector<Id>{0}));
  EXPECT_EQ(g[1], (std::vector<Id>{1, 2}));
  EXPECT_TRUE(g[2].empty());
}

TEST(ColdGroups, EqualDegreesSplitEvenly) {
  std::vector<std::size_t> deg(9, 5);
  auto g = cold_user_groups(deg);
  for (const auto& grp : g) EXPECT_EQ(grp.size(), 3u);
  EXPECT_EQ(g[0], (std::vector<Id>{0, 1, 2}));
}

TEST(ColdGroups, DescendingAndBalancedOnSmoothDegrees) {
  std::vector<std::size_t> deg;
  for (std::size_t k = 0; k < 300; ++k) deg.push_back(1 + (k * 7) % 3);  // 1..3
  auto g = cold_user_groups(deg);
  std::size_t sums[3] = {0, 0, 0};
  for (int j = 0; j < 3; ++j) {
    for (Id u : g[j]) sums[j] += deg[u];
  }
  const std::size_t total = sums[0] + sums[1] + sums[2];
  EXPECT_EQ(total, std::accumulate(deg.begin(), deg.end(), std::size_t{0}));
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(static_cast<double>(sums[j]), total / 3.0, 3.0);
  // warm users have at least the degree of any cold user
  for (Id w : g[0]) {
    for (Id c : g[2]) EXPECT_GE(deg[w], deg[c]);
  }
}

TEST(ColdGroups, NeedsThreeUsers) {
  std::vector<std::size_t> deg = {3, 1};
  EXPECT_THROW(cold_user_groups(deg), ValidationError);
}

TEST(Popularity, RanksByTrainDegree) {
  Fixture f = three_users();
  auto train = f.graph.with_interactions(positives_of(f.split.train));
  PopularityScorer pop(train);
  std::vector<Id> items = {0, 1, 2, 3, 4, 5};
  std::vector<double> s(6);
  pop.score(0, items, s);
  // degrees 2 3 2 0 0 0
  EXPECT_GT(s[1], s[0]);
  EXPECT_EQ(s[0], s[2]);
  EXPECT_GT(s[0], s[3]);
  EXPECT_EQ(s[3], s[5]);
}

TEST(Report, EvaluateMatchesOracleAndRoundTrips) {
  Fixture f = three_users();
  TableScorer scorer(f.scores);
  EvaluationOptions opt;
  opt.ks = {1, 2, 3};
  EvaluationReport r = evaluate(scorer, f.graph, f.split, opt);
  RankingTask t = test_ranking_task(f.graph, f.split);
  auto rankings = rank_top(scorer, t, 3);
  const std::size_t ks[] = {1, 2, 3};
  TopKMetrics m = topk_metrics(t, rankings, ks);
  for (int j = 0; j < 3; ++j) {
    EXPECT_EQ(r.get("recall", ks[j]), m.recall[j]);
    EXPECT_EQ(r.get("precision", ks[j]), m.precision[j]);
  }
  for (const MetricRow& row : r.rows) {
    if (row.metric == "users" || row.metric == "test_users" || row.metric == "interactions") {
      continue;
    }
    EXPECT_GE(row.value, 0.0) << row.metric;
    EXPECT_LE(row.value, 1.0) << row.metric;
  }
  testing::TempDir dir;
  write_report_tsv(dir / "r.tsv", r);
  EvaluationReport back = read_report_tsv(dir / "r.tsv");
  ASSERT_EQ(back.rows.size(), r.rows.size());
  for (std::size_t k = 0; k < r.rows.size(); ++k) {
    EXPECT_EQ(back.rows[k].metric, r.rows[k].metric);
    EXPECT_EQ(back.rows[k].k, r.rows[k].k);
    EXPECT_EQ(back.rows[k].group, r.rows[k].group);
    EXPECT_EQ(back.rows[k].value, r.rows[k].value);
  }
  EXPECT_EQ(back.meta, r.meta);
  const std::string text = testing::read_bytes(dir / "r.tsv");
  EXPECT_NE(text.find("metric\tK\tgroup\tvalue\n"), std::string::npos);
  std::ostringstream table;
  print_report_table(table, r);
  EXPECT_NE(table.str().find("recall"), std::string::npos);
}

TEST(Report, DefaultSweepCoversAllCutoffs) {
  EXPECT_EQ(std::vector<std::size_t>(kDefaultKs.begin(), kDefaultKs.end()),
            (std::vector<std::size_t>{1, 5, 10, 20, 50, 100}));
}

TEST(Report, SummaryMeanAndStd) {
  EvaluationReport a, b;
  a.add("recall", 10, "all", 0.2);
  b.add("recall", 10, "all", 0.4);
  std::vector<EvaluationReport> rs = {a, b};
  auto s = summarize_reports(rs);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_DOUBLE_EQ(s[0].mean, 0.3);
  EXPECT_NEAR(s[0].stddev, std::sqrt(0.02), 1e-15);
  EXPECT_EQ(s[0].n, 2u);
}

TEST(Validation, SubsampleIsDeterministic) {
  auto data = testing::tiny_data(4, 40, 20);
  RankingTask all = validation_ranking_task(data.graph, data.split);
  RankingTask a = validation_ranking_task(data.graph, data.split, 5, 9);
  RankingTask b = validation_ranking_task(data.graph, data.split, 5, 9);
  ASSERT_GT(all.users.size(), 5u);
  EXPECT_EQ(a.users.size(), 5u);
  EXPECT_EQ(a.users, b.users);
  for (std::size_t k = 0; k < a.users.size(); ++k) {
    // excluded holds the train positives only
    auto train = data.graph.with_interactions(positives_of(data.split.train));
    auto pos = train.user_items(a.users[k]);
    EXPECT_EQ(a.excluded[k], std::vector<Id>(pos.begin(), pos.end()));
  }
}

}  // namespace
}  // namespace kper
