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

#include "kper/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "kper/config.hpp"
#include "kper/errors.hpp"
#include "kper/parallel.hpp"
#include "kper/rng.hpp"

namespace kper {

PopularityScorer::PopularityScorer(const CollaborativeKnowledgeGraph& train_graph)
    : degree_(train_graph.num_items()) {
  for (Id i = 0; i < train_graph.num_items(); ++i) {
    degree_[i] = static_cast<double>(train_graph.item_users(i).size());
    max_degree_ = std::max(max_degree_, degree_[i]);
  }
}

void PopularityScorer::score(Id, std::span<const Id> items, std::span<double> out) const {
  for (std::size_t k = 0; k < items.size(); ++k) out[k] = degree_[items[k]];
}

double PopularityScorer::probability(Id, Id item) const { return degree_[item] / max_degree_; }

namespace {

std::vector<std::vector<Id>> positives_by_user(std::size_t num_users,
                                               std::span<const Interaction> rows) {
  std::vector<std::vector<Id>> out(num_users);
  for (const auto& r : rows) {
    if (r.label != 0) out[r.user].push_back(r.item);
  }
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

std::vector<std::size_t> item_degrees(std::size_t num_items, std::span<const Interaction> rows) {
  std::vector<std::size_t> deg(num_items, 0);
  for (const auto& r : rows) {
    if (r.label != 0) ++deg[r.item];
  }
  return deg;
}

std::vector<std::size_t> user_degrees(std::size_t num_users, std::span<const Interaction> rows) {
  std::vector<std::size_t> deg(num_users, 0);
  for (const auto& r : rows) {
    if (r.label != 0) ++deg[r.user];
  }
  return deg;
}

std::vector<Id> merge_sorted(const std::vector<Id>& a, const std::vector<Id>& b) {
  std::vector<Id> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::size_t hits_at(const std::vector<Id>& ranking, const std::vector<Id>& targets,
                    std::size_t k) {
  std::size_t hits = 0;
  const std::size_t n = std::min(k, ranking.size());
  for (std::size_t r = 0; r < n; ++r) {
    if (std::binary_search(targets.begin(), targets.end(), ranking[r])) ++hits;
  }
  return hits;
}

}  // namespace

RankingTask test_ranking_task(const CollaborativeKnowledgeGraph& graph, const DatasetSplit& split) {
  const std::size_t nu = graph.num_users();
  auto train = positives_by_user(nu, split.train);
  auto val = positives_by_user(nu, split.validation);
  auto test = positives_by_user(nu, split.test);
  RankingTask task;
  task.num_items = graph.num_items();
  for (Id u = 0; u < nu; ++u) {
    if (test[u].empty()) continue;
    task.users.push_back(u);
    task.targets.push_back(std::move(test[u]));
    task.excluded.push_back(merge_sorted(train[u], val[u]));
  }
  return task;
}

RankingTask validation_ranking_task(const CollaborativeKnowledgeGraph& graph,
                                    const DatasetSplit& split, std::size_t max_users,
                                    std::uint64_t seed) {
  const std::size_t nu = graph.num_users();
  auto train = positives_by_user(nu, split.train);
  auto val = positives_by_user(nu, split.validation);
  std::vector<Id> users;
  for (Id u = 0; u < nu; ++u) {
    if (!val[u].empty()) users.push_back(u);
  }
  if (max_users > 0 && users.size() > max_users) {
    Rng rng(mix_seed({seed, 0x7a1}));
    std::shuffle(users.begin(), users.end(), rng.engine());
    users.resize(max_users);
    std::sort(users.begin(), users.end());
  }
  RankingTask task;
  task.num_items = graph.num_items();
  for (Id u : users) {
    task.users.push_back(u);
    task.targets.push_back(std::move(val[u]));
    task.excluded.push_back(std::move(train[u]));
  }
  return task;
}

std::vector<Id> top_ids(std::span<const Id> items, std::span<const double> scores,
                        std::size_t depth) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t n = std::min(depth, items.size());
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return items[a] < items[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    better);
  std::vector<Id> out(n);
  for (std::size_t r = 0; r < n; ++r) out[r] = items[order[r]];
  return out;
}

std::vector<std::vector<Id>> rank_top(const Scorer& scorer, const RankingTask& task,
                                      std::size_t depth, std::size_t threads) {
  std::vector<std::vector<Id>> out(task.users.size());
  parallel_for(task.users.size(), threads, [&](std::size_t b, std::size_t e, std::size_t) {
    std::vector<Id> candidates;
    std::vector<double> scores;
    for (std::size_t k = b; k < e; ++k) {
      candidates.clear();
      const auto& ex = task.excluded[k];
      auto it = ex.begin();
      for (Id i = 0; i < task.num_items; ++i) {
        while (it != ex.end() && *it < i) ++it;
        if (it != ex.end() && *it == i) continue;
        candidates.push_back(i);
      }
      scores.resize(candidates.size());
      scorer.score(task.users[k], candidates, scores);
      out[k] = top_ids(candidates, scores, depth);
    }
  });
  return out;
}

TopKMetrics topk_metrics(const RankingTask& task, const std::vector<std::vector<Id>>& rankings,
                         std::span<const std::size_t> ks) {
  TopKMetrics m;
  m.ks.assign(ks.begin(), ks.end());
  m.recall.assign(ks.size(), 0.0);
  m.precision.assign(ks.size(), 0.0);
  m.users = task.users.size();
  if (m.users == 0) return m;
  for (std::size_t u = 0; u < task.users.size(); ++u) {
    const double t = static_cast<double>(task.targets[u].size());
    for (std::size_t j = 0; j < ks.size(); ++j) {
      const double hits = static_cast<double>(hits_at(rankings[u], task.targets[u], ks[j]));
      m.recall[j] += hits / t;
      m.precision[j] += hits / static_cast<double>(ks[j]);
    }
  }
  for (std::size_t j = 0; j < ks.size(); ++j) {
    m.recall[j] /= static_cast<double>(m.users);
    m.precision[j] /= static_cast<double>(m.users);
  }
  return m;
}

double recall_for_users(const RankingTask& task, const std::vector<std::vector<Id>>& rankings,
                        std::size_t k, std::span<const std::size_t> subset) {
  if (subset.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t u : subset) {
    sum += static_cast<double>(hits_at(rankings[u], task.targets[u], k)) /
           static_cast<double>(task.targets[u].size());
  }
  return sum / static_cast<double>(subset.size());
}

double psr_at_k(const RankingTask& task, const std::vector<std::vector<Id>>& rankings,
                std::size_t k, double beta, std::span<const std::size_t> train_item_degree) {
  auto weight = [&](Id i) {
    const double n = static_cast<double>(std::max<std::size_t>(train_item_degree[i], 1));
    return std::pow(1.0 / n, beta);
  };
  double num = 0.0;
  double den = 0.0;
  for (std::size_t u = 0; u < task.users.size(); ++u) {
    const auto& targets = task.targets[u];
    for (Id i : targets) den += weight(i);
    const std::size_t n = std::min(k, rankings[u].size());
    for (std::size_t r = 0; r < n; ++r) {
      if (std::binary_search(targets.begin(), targets.end(), rankings[u][r])) {
        num += weight(rankings[u][r]);
      }
    }
  }
  if (den == 0.0) throw std::invalid_argument("psr: empty test set");
  return num / den;
}

double auc(std::span<const std::uint8_t> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw std::invalid_argument("auc: length mismatch");
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t a = 0; a < n;) {
    std::size_t b = a;
    while (b < n && scores[order[b]] == scores[order[a]]) ++b;
    const double mid = 0.5 * static_cast<double>(a + 1 + b);  // mean of ranks a+1 .. b
    for (std::size_t j = a; j < b; ++j) {
      if (labels[order[j]] != 0) {
        pos_rank_sum += mid;
        ++pos;
      }
    }
    a = b;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("auc: needs both positive and negative pairs");
  const double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double ctr_auc(const Scorer& scorer, std::span<const Interaction> pairs, std::size_t threads) {
  std::vector<double> scores(pairs.size());
  std::vector<std::uint8_t> labels(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t k = b; k < e; ++k) {
      scores[k] = scorer.probability(pairs[k].user, pairs[k].item);
      labels[k] = pairs[k].label;
    }
  });
  return auc(labels, scores);
}

std::array<std::vector<Id>, 3> cold_user_groups(std::span<const std::size_t> train_degree) {
  if (train_degree.size() < 3) throw ValidationError("cold-start groups need at least 3 users");
  std::vector<Id> order(train_degree.size());
  std::iota(order.begin(), order.end(), Id{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Id a, Id b) { return train_degree[a] > train_degree[b]; });
  const double total = std::accumulate(train_degree.begin(), train_degree.end(), 0.0);
  const double target = total / 3.0;
  std::array<std::vector<Id>, 3> groups;
  std::size_t g = 0;
  double sum = 0.0;
  for (Id u : order) {
    groups[g].push_back(u);
    sum += static_cast<double>(train_degree[u]);
    if (g < 2 && sum >= target) {
      ++g;
      sum = 0.0;
    }
  }
  return groups;
}

std::array<std::vector<Id>, 3> cold_user_groups(const CollaborativeKnowledgeGraph& train_graph) {
  std::vector<std::size_t> deg(train_graph.num_users());
  for (Id u = 0; u < deg.size(); ++u) deg[u] = train_graph.user_items(u).size();
  return cold_user_groups(deg);
}

void EvaluationReport::add(std::string metric, std::size_t k, std::string group, double value) {
  rows.push_back({std::move(metric), k, std::move(group), value});
}

double EvaluationReport::get(const std::string& metric, std::size_t k,
                             const std::string& group) const {
  for (const auto& r : rows) {
    if (r.metric == metric && r.k == k && r.group == group) return r.value;
  }
  throw std::out_of_range("no metric " + metric + "@" + std::to_string(k) + " for " + group);
}

EvaluationReport evaluate(const Scorer& scorer, const CollaborativeKnowledgeGraph& graph,
                          const DatasetSplit& split, const EvaluationOptions& options) {
  EvaluationReport report;
  const RankingTask task = test_ranking_task(graph, split);
  std::size_t depth = options.group_k;
  for (std::size_t k : options.ks) depth = std::max(depth, k);
  const auto rankings = rank_top(scorer, task, depth, options.threads);

  const TopKMetrics m = topk_metrics(task, rankings, options.ks);
  for (std::size_t j = 0; j < m.ks.size(); ++j) {
    report.add("recall", m.ks[j], "all", m.recall[j]);
    report.add("precision", m.ks[j], "all", m.precision[j]);
  }
  const auto train_item_deg = item_degrees(graph.num_items(), split.train);
  for (std::size_t k : options.ks) {
    report.add("psr", k, "all", psr_at_k(task, rankings, k, options.psr_beta, train_item_deg));
  }
  report.meta["psr_beta"] = format_double(options.psr_beta);
  report.meta["test_users"] = std::to_string(task.users.size());

  try {
    report.add("auc", 0, "all", ctr_auc(scorer, split.test, options.threads));
  } catch (const std::invalid_argument& e) {
    report.meta["auc_error"] = e.what();
  }

  if (options.with_groups && graph.num_users() >= 3) {
    const auto train_user_deg = user_degrees(graph.num_users(), split.train);
    const auto groups = cold_user_groups(train_user_deg);
    std::vector<int> group_of(graph.num_users(), 0);
    for (int g = 0; g < 3; ++g) {
      for (Id u : groups[g]) group_of[u] = g;
    }
    std::array<std::vector<std::size_t>, 3> members;
    for (std::size_t k = 0; k < task.users.size(); ++k) members[group_of[task.users[k]]].push_back(k);
    for (int g = 0; g < 3; ++g) {
      std::size_t interactions = 0;
      for (Id u : groups[g]) interactions += train_user_deg[u];
      report.add("recall", options.group_k, kGroupNames[g],
                 recall_for_users(task, rankings, options.group_k, members[g]));
      report.add("users", 0, kGroupNames[g], static_cast<double>(groups[g].size()));
      report.add("test_users", 0, kGroupNames[g], static_cast<double>(members[g].size()));
      report.add("interactions", 0, kGroupNames[g], static_cast<double>(interactions));
    }
  }
  report.meta["split_seed"] = std::to_string(split.split_seed);
  return report;
}

void write_report_tsv(const std::filesystem::path& path, const EvaluationReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [k, v] : report.meta) out << "# " << k << '=' << v << '\n';
  out << "metric\tK\tgroup\tvalue\n";
  for (const auto& r : report.rows) {
    out << r.metric << '\t' << r.k << '\t' << r.group << '\t' << format_double(r.value) << '\n';
  }
}

EvaluationReport read_report_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  EvaluationReport report;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) report.meta[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("metric\t", 0) == 0) continue;
    }
    std::istringstream fields(line);
    MetricRow r;
    std::string value;
    if (!(fields >> r.metric >> r.k >> r.group >> value)) {
      throw ParseError(path.string(), lineno, "expected metric, K, group, value");
    }
    try {
      r.value = std::stod(value);
    } catch (const std::exception&) {
      throw ParseError(path.string(), lineno, "bad value '" + value + "'");
    }
    report.rows.push_back(std::move(r));
  }
  return report;
}

void print_report_table(std::ostream& out, const EvaluationReport& report) {
  out << std::left << std::setw(14) << "metric" << std::setw(6) << "K" << std::setw(10)
      << "group" << "value\n";
  for (const auto& r : report.rows) {
    std::ostringstream v;
    if (r.metric == "users" || r.metric == "test_users" || r.metric == "interactions") {
      v << static_cast<long long>(std::llround(r.value));
    } else {
      v << std::fixed << std::setprecision(4) << r.value;
    }
    out << std::left << std::setw(14) << r.metric << std::setw(6)
        << (r.k == 0 ? std::string("-") : std::to_string(r.k)) << std::setw(10) << r.group
        << v.str() << '\n';
  }
}

std::vector<SummaryRow> summarize_reports(std::span<const EvaluationReport> reports) {
  std::vector<SummaryRow> out;
  std::vector<std::vector<double>> values;
  for (const auto& rep : reports) {
    for (const auto& r : rep.rows) {
      std::size_t j = 0;
      while (j < out.size() &&
             !(out[j].key.metric == r.metric && out[j].key.k == r.k && out[j].key.group == r.group)) {
        ++j;
      }
      if (j == out.size()) {
        out.push_back({{r.metric, r.k, r.group, 0.0}, 0.0, 0.0, 0});
        values.emplace_back();
      }
      values[j].push_back(r.value);
    }
  }
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto& v = values[j];
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    out[j].mean = mean;
    out[j].stddev = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    out[j].n = v.size();
  }
  return out;
}

}  // namespace kper
