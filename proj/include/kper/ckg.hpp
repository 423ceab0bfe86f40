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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace kper {

using Id = std::uint32_t;

enum class NodeKind : std::uint8_t { kUser = 0, kItem = 1 };

struct Interaction {
  Id user = 0;
  Id item = 0;
  std::uint8_t label = 0;

  auto operator<=>(const Interaction&) const = default;
};

struct Triple {
  Id head = 0;
  Id relation = 0;
  Id tail = 0;

  auto operator<=>(const Triple&) const = default;
};

// Users and items in one graph with the item-side knowledge graph. Items
// occupy entity ids [0, num_items). Immutable once built.
class CollaborativeKnowledgeGraph {
 public:
  CollaborativeKnowledgeGraph() = default;

  // Validates ranges and duplicate positives, then indexes adjacency.
  // Throws ValidationError.
  static CollaborativeKnowledgeGraph build(std::size_t num_users, std::size_t num_items,
                                           std::size_t num_entities,
                                           std::size_t num_relations,
                                           std::vector<Interaction> interactions,
                                           std::vector<Triple> triples);

  // Same id spaces and knowledge graph, different interaction list. Used to
  // build the train-only view that encoders and seed selection see.
  CollaborativeKnowledgeGraph with_interactions(std::vector<Interaction> interactions) const;

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_relations() const { return num_relations_; }

  const std::vector<Interaction>& interactions() const { return interactions_; }
  const std::vector<Triple>& triples() const { return triples_; }
  std::size_t num_positives() const { return user_items_.size(); }

  // Positively interacted items of u, ascending.
  std::span<const Id> user_items(Id user) const;
  // Users with a positive interaction on i, ascending.
  std::span<const Id> item_users(Id item) const;
  std::span<const Id> neighbors(NodeKind kind, Id node) const {
    return kind == NodeKind::kUser ? user_items(node) : item_users(node);
  }
  // Triples whose head is `entity`, in input order.
  std::span<const Triple> outgoing(Id entity) const;

  bool is_positive(Id user, Id item) const;

 private:
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::size_t num_entities_ = 0;
  std::size_t num_relations_ = 0;
  std::vector<Interaction> interactions_;
  std::vector<Triple> triples_;

  std::vector<std::size_t> user_offsets_;
  std::vector<Id> user_items_;
  std::vector<std::size_t> item_offsets_;
  std::vector<Id> item_users_;
  std::vector<std::size_t> kg_offsets_;
  std::vector<Triple> kg_by_head_;
};

// Original identifiers, indexed by internal id.
struct IdMap {
  std::vector<std::int64_t> users;
  std::vector<std::int64_t> items;
  std::vector<std::int64_t> entities;  // entities[i] == items[i] for i < num_items
  std::vector<std::int64_t> relations;

  bool operator==(const IdMap&) const = default;
};

struct LoadOptions {
  // false: ratings lines are `user item` and every line is a positive.
  bool labeled = true;
};

struct LoadedGraph {
  CollaborativeKnowledgeGraph graph;
  IdMap ids;
  std::vector<std::string> warnings;
};

// Reads `user item label` ratings and `head relation tail` triples, remaps
// every id space to contiguous ranges. Throws ParseError / ValidationError.
LoadedGraph load_ckg(const std::filesystem::path& ratings_path,
                     const std::filesystem::path& kg_path, const LoadOptions& options = {});

struct DatasetSplit {
  std::vector<Interaction> train;
  std::vector<Interaction> validation;
  std::vector<Interaction> test;
  std::uint64_t split_seed = 0;
};

// 6:2:2 split, stratified by label. Every user with at least two positives
// keeps one in train. Deterministic in `seed`.
DatasetSplit split_dataset(const CollaborativeKnowledgeGraph& graph, std::uint64_t seed);

struct NegativeSample {
  std::vector<Interaction> negatives;
  std::vector<std::string> warnings;
};

// One negative per positive in `positives`, per user, drawn uniformly from
// items the user never interacted with positively in `graph`.
NegativeSample sample_negatives(const CollaborativeKnowledgeGraph& graph,
                                std::span<const Interaction> positives, std::uint64_t seed);
NegativeSample sample_negatives(const CollaborativeKnowledgeGraph& graph,
                                const DatasetSplit& split, std::uint64_t seed);

std::vector<Interaction> positives_of(std::span<const Interaction> interactions);

// For positives-only data: gives validation and test one sampled negative per
// positive so that CTR AUC is defined. Drawn once per split, not per epoch.
// No-op for a split part that already contains negatives.
void attach_evaluation_negatives(const CollaborativeKnowledgeGraph& graph, DatasetSplit& split,
                                 std::vector<std::string>* warnings = nullptr);

// --- TSV persistence -------------------------------------------------------

void write_interactions(const std::filesystem::path& path, std::span<const Interaction> rows);
std::vector<Interaction> read_interactions(const std::filesystem::path& path);
void write_triples(const std::filesystem::path& path, std::span<const Triple> rows);
std::vector<Triple> read_triples(const std::filesystem::path& path);
void write_idmap(const std::filesystem::path& path, const IdMap& ids);
IdMap read_idmap(const std::filesystem::path& path);

// A prepared directory: train/val/test.tsv, kg.tsv, counts.tsv, idmap.tsv.
struct PreparedData {
  CollaborativeKnowledgeGraph graph;
  DatasetSplit split;
};

void write_prepared(const std::filesystem::path& dir, const CollaborativeKnowledgeGraph& graph,
                    const DatasetSplit& split);
PreparedData read_prepared(const std::filesystem::path& dir);

}  // namespace kper
