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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "kper/ckg.hpp"

namespace kper {

// Sorted, duplicate-free entity ids.
using EntitySet = std::vector<Id>;

// Hop-0 entity set. A user starts from its positively interacted items; an
// item starts from itself plus every item co-interacted by its users.
EntitySet initial_entities(const CollaborativeKnowledgeGraph& graph, NodeKind kind, Id node);

// { t : (h, r, t) in graph, h in prev }
EntitySet expand_hop(const CollaborativeKnowledgeGraph& graph, const EntitySet& prev);

// Number of triples whose head lies in `prev`.
std::size_t triple_pool_size(const CollaborativeKnowledgeGraph& graph, const EntitySet& prev);

// Exactly `size` triples with heads in `prev`: a uniform draw without
// replacement when the pool is large enough; otherwise the whole pool once
// followed by uniform padding with replacement. Empty pool -> empty result.
std::vector<Triple> sample_triples(const CollaborativeKnowledgeGraph& graph, const EntitySet& prev,
                                   std::size_t size, std::uint64_t seed);

// `l` interaction counterparts of a node, same padding rule as
// sample_triples. Isolated nodes get an empty list.
std::vector<Id> sample_interactive_neighbors(const CollaborativeKnowledgeGraph& graph,
                                             NodeKind kind, Id node, std::size_t l,
                                             std::uint64_t seed);

// Per-node interactive neighbours and per-hop triple samples for one epoch.
class TripleNeighborhoods {
 public:
  TripleNeighborhoods() = default;
  TripleNeighborhoods(std::size_t num_users, std::size_t num_items, std::size_t sample_size,
                      std::size_t depth, std::uint64_t sampling_seed);

  std::size_t sample_size() const { return sample_size_; }
  std::size_t depth() const { return depth_; }
  std::uint64_t sampling_seed() const { return sampling_seed_; }
  std::size_t num_nodes(NodeKind kind) const { return side(kind).inter_count.size(); }

  std::span<const Id> interactive(NodeKind kind, Id node) const;
  // Hop k in [1, depth]. Empty when the node has no knowledge reach there.
  std::span<const Triple> hop(NodeKind kind, Id node, std::size_t k) const;

  void set_interactive(NodeKind kind, Id node, std::span<const Id> ids);
  void set_hop(NodeKind kind, Id node, std::size_t k, std::span<const Triple> triples);

  bool operator==(const TripleNeighborhoods&) const = default;

 private:
  struct Side {
    std::vector<Id> inter;
    std::vector<std::uint32_t> inter_count;
    std::vector<Triple> hops;
    std::vector<std::uint8_t> hop_filled;

    bool operator==(const Side&) const = default;
  };
  const Side& side(NodeKind kind) const { return kind == NodeKind::kUser ? users_ : items_; }
  Side& side(NodeKind kind) { return kind == NodeKind::kUser ? users_ : items_; }

  std::size_t sample_size_ = 0;
  std::size_t depth_ = 0;
  std::uint64_t sampling_seed_ = 0;
  Side users_;
  Side items_;
};

// Samples every user and item of `train_graph`. The stream for a node is
// mix_seed(run_seed, epoch, kind, node), so the result does not depend on
// `threads`.
TripleNeighborhoods build_neighborhoods(const CollaborativeKnowledgeGraph& train_graph,
                                        std::size_t sample_size, std::size_t depth,
                                        std::uint64_t run_seed, std::uint64_t epoch,
                                        std::size_t threads = 1);

// Debug dump: `node<TAB>hop<TAB>h,r,t` with node written as u<id> / i<id>.
void write_neighborhoods_tsv(const std::filesystem::path& path, const TripleNeighborhoods& nb);

}  // namespace kper
