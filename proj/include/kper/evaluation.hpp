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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kper/ckg.hpp"
#include "kper/scorer.hpp"

namespace kper {

// Ranks by train-set positive degree.
class PopularityScorer : public Scorer {
 public:
  explicit PopularityScorer(const CollaborativeKnowledgeGraph& train_graph);
  void score(Id user, std::span<const Id> items, std::span<double> out) const override;
  // Degree normalised by the maximum degree.
  double probability(Id user, Id item) const override;

 private:
  std::vector<double> degree_;
  double max_degree_ = 1.0;
};

// Per-user ranking task: rank every item outside `excluded` and compare the
// top of the list against `targets`.
struct RankingTask {
  std::vector<Id> users;                      // users with at least one target
  std::vector<std::vector<Id>> targets;       // sorted, parallel to users
  std::vector<std::vector<Id>> excluded;      // sorted, parallel to users
  std::size_t num_items = 0;
};

// Test task: targets are test positives, excluded are train and validation
// positives.
RankingTask test_ranking_task(const CollaborativeKnowledgeGraph& graph, const DatasetSplit& split);
// Validation task: targets are validation positives, excluded are train
// positives. `max_users` > 0 keeps a seeded subset of that many users.
RankingTask validation_ranking_task(const CollaborativeKnowledgeGraph& graph,
                                    const DatasetSplit& split, std::size_t max_users = 0,
                                    std::uint64_t seed = 0);

// Top `depth` candidates per user, best first. Ties go to the smaller id.
std::vector<std::vector<Id>> rank_top(const Scorer& scorer, const RankingTask& task,
                                      std::size_t depth, std::size_t threads = 1);

// Sort (score desc, id asc) and keep the first `depth`.
std::vector<Id> top_ids(std::span<const Id> items, std::span<const double> scores,
                        std::size_t depth);

struct TopKMetrics {
  std::vector<std::size_t> ks;
  std::vector<double> recall;
  std::vector<double> precision;
  std::size_t users = 0;
};

// Macro averages over task users. `rankings` must be at least max(ks) deep
// where the candidate count allows.
TopKMetrics topk_metrics(const RankingTask& task, const std::vector<std::vector<Id>>& rankings,
                         std::span<const std::size_t> ks);

// Recall@k averaged over the task users listed in `subset` (indices into
// task.users).
double recall_for_users(const RankingTask& task, const std::vector<std::vector<Id>>& rankings,
                        std::size_t k, std::span<const std::size_t> subset);

// Popularity stratified recall with weights (1 / N+)^beta, N+ = 0 read as 1.
double psr_at_k(const RankingTask& task, const std::vector<std::vector<Id>>& rankings,
                std::size_t k, double beta, std::span<const std::size_t> train_item_degree);

// Rank-based AUC with ties worth one half. Throws std::invalid_argument when
// only one class is present.
double auc(std::span<const std::uint8_t> labels, std::span<const double> scores);

// AUC of scorer.probability over labelled pairs.
double ctr_auc(const Scorer& scorer, std::span<const Interaction> pairs, std::size_t threads = 1);

// Users by descending train degree (ties: smaller id first), cut greedily:
// a group closes once its interaction sum reaches total / 3, and the last
// group takes the remainder. Throws ValidationError for fewer than 3 users.
std::array<std::vector<Id>, 3> cold_user_groups(std::span<const std::size_t> train_degree);
std::array<std::vector<Id>, 3> cold_user_groups(const CollaborativeKnowledgeGraph& train_graph);

inline constexpr std::array<std::size_t, 6> kDefaultKs = {1, 5, 10, 20, 50, 100};
inline constexpr std::array<const char*, 3> kGroupNames = {"warm", "normal", "cold"};

struct MetricRow {
  std::string metric;
  std::size_t k = 0;  // 0 where a cutoff does not apply
  std::string group;
  double value = 0.0;
};

struct EvaluationReport {
  std::vector<MetricRow> rows;
  std::map<std::string, std::string> meta;

  void add(std::string metric, std::size_t k, std::string group, double value);
  // Throws std::out_of_range when absent.
  double get(const std::string& metric, std::size_t k, const std::string& group = "all") const;
};

struct EvaluationOptions {
  std::vector<std::size_t> ks{kDefaultKs.begin(), kDefaultKs.end()};
  double psr_beta = 0.1;
  std::size_t group_k = 10;
  std::size_t threads = 1;
  bool with_groups = true;
};

// Full test protocol: top-K, AUC, PSR per K, warm/normal/cold recall.
EvaluationReport evaluate(const Scorer& scorer, const CollaborativeKnowledgeGraph& graph,
                          const DatasetSplit& split, const EvaluationOptions& options = {});

// `metric<TAB>K<TAB>group<TAB>value`, preceded by `# key=value` meta lines.
void write_report_tsv(const std::filesystem::path& path, const EvaluationReport& report);
EvaluationReport read_report_tsv(const std::filesystem::path& path);
void print_report_table(std::ostream& out, const EvaluationReport& report);

// Mean and sample standard deviation per (metric, K, group) across reports.
struct SummaryRow {
  MetricRow key;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};
std::vector<SummaryRow> summarize_reports(std::span<const EvaluationReport> reports);

}  // namespace kper
