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

#include "kper/neighborhood.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "kper/parallel.hpp"
#include "kper/rng.hpp"

namespace kper {
namespace {

// Floyd's algorithm: `count` distinct indices from [0, n), ascending.
std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> picked;
  picked.reserve(count);
  for (std::size_t j = n - count; j < n; ++j) {
    const std::size_t t = rng.index(j + 1);
    if (std::find(picked.begin(), picked.end(), t) == picked.end()) {
      picked.push_back(t);
    } else {
      picked.push_back(j);
    }
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

// Indices into a pool of `n` elements following the fixed-size padding rule.
std::vector<std::size_t> fixed_size_indices(std::size_t n, std::size_t size, Rng& rng) {
  if (n == 0 || size == 0) return {};
  if (n >= size) return sample_distinct(n, size, rng);
  std::vector<std::size_t> ix(n);
  for (std::size_t i = 0; i < n; ++i) ix[i] = i;
  while (ix.size() < size) ix.push_back(rng.index(n));
  return ix;
}

void sort_unique(EntitySet& s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
}

constexpr std::uint64_t kInteractiveStream = 0;

}  // namespace

EntitySet initial_entities(const CollaborativeKnowledgeGraph& graph, NodeKind kind, Id node) {
  if (kind == NodeKind::kUser) {
    auto items = graph.user_items(node);
    return EntitySet(items.begin(), items.end());
  }
  EntitySet out{node};
  for (Id u : graph.item_users(node)) {
    auto items = graph.user_items(u);
    out.insert(out.end(), items.begin(), items.end());
  }
  sort_unique(out);
  return out;
}

EntitySet expand_hop(const CollaborativeKnowledgeGraph& graph, const EntitySet& prev) {
  EntitySet out;
  for (Id h : prev) {
    for (const Triple& t : graph.outgoing(h)) out.push_back(t.tail);
  }
  sort_unique(out);
  return out;
}

std::size_t triple_pool_size(const CollaborativeKnowledgeGraph& graph, const EntitySet& prev) {
  std::size_t n = 0;
  for (Id h : prev) n += graph.outgoing(h).size();
  return n;
}

std::vector<Triple> sample_triples(const CollaborativeKnowledgeGraph& graph, const EntitySet& prev,
                                   std::size_t size, std::uint64_t seed) {
  if (size == 0) throw std::invalid_argument("sample_triples: size must be >= 1");
  // Pool = concatenation of outgoing(h) for h in prev, addressed by prefix sums.
  std::vector<std::size_t> prefix;
  std::vector<Id> heads;
  std::size_t total = 0;
  for (Id h : prev) {
    const std::size_t deg = graph.outgoing(h).size();
    if (deg == 0) continue;
    heads.push_back(h);
    prefix.push_back(total);
    total += deg;
  }
  Rng rng(seed);
  std::vector<Triple> out;
  for (std::size_t idx : fixed_size_indices(total, size, rng)) {
    const auto it = std::upper_bound(prefix.begin(), prefix.end(), idx) - 1;
    const std::size_t slot = static_cast<std::size_t>(it - prefix.begin());
    out.push_back(graph.outgoing(heads[slot])[idx - *it]);
  }
  return out;
}

std::vector<Id> sample_interactive_neighbors(const CollaborativeKnowledgeGraph& graph,
                                             NodeKind kind, Id node, std::size_t l,
                                             std::uint64_t seed) {
  auto pool = graph.neighbors(kind, node);
  Rng rng(seed);
  std::vector<Id> out;
  for (std::size_t idx : fixed_size_indices(pool.size(), l, rng)) out.push_back(pool[idx]);
  return out;
}

TripleNeighborhoods::TripleNeighborhoods(std::size_t num_users, std::size_t num_items,
                                         std::size_t sample_size, std::size_t depth,
                                         std::uint64_t sampling_seed)
    : sample_size_(sample_size), depth_(depth), sampling_seed_(sampling_seed) {
  for (auto [s, n] : {std::pair<Side*, std::size_t>{&users_, num_users}, {&items_, num_items}}) {
    s->inter.assign(n * sample_size, 0);
    s->inter_count.assign(n, 0);
    s->hops.assign(n * depth * sample_size, Triple{});
    s->hop_filled.assign(n * depth, 0);
  }
}

std::span<const Id> TripleNeighborhoods::interactive(NodeKind kind, Id node) const {
  const Side& s = side(kind);
  return {s.inter.data() + static_cast<std::size_t>(node) * sample_size_, s.inter_count[node]};
}

std::span<const Triple> TripleNeighborhoods::hop(NodeKind kind, Id node, std::size_t k) const {
  const Side& s = side(kind);
  const std::size_t slot = static_cast<std::size_t>(node) * depth_ + (k - 1);
  if (!s.hop_filled[slot]) return {};
  return {s.hops.data() + slot * sample_size_, sample_size_};
}

void TripleNeighborhoods::set_interactive(NodeKind kind, Id node, std::span<const Id> ids) {
  Side& s = side(kind);
  if (ids.size() > sample_size_) throw std::invalid_argument("too many interactive neighbours");
  std::copy(ids.begin(), ids.end(), s.inter.begin() + static_cast<std::ptrdiff_t>(node * sample_size_));
  s.inter_count[node] = static_cast<std::uint32_t>(ids.size());
}

void TripleNeighborhoods::set_hop(NodeKind kind, Id node, std::size_t k,
                                  std::span<const Triple> triples) {
  Side& s = side(kind);
  const std::size_t slot = static_cast<std::size_t>(node) * depth_ + (k - 1);
  if (triples.empty()) {
    s.hop_filled[slot] = 0;
    return;
  }
  if (triples.size() != sample_size_) throw std::invalid_argument("hop sample has wrong size");
  std::copy(triples.begin(), triples.end(),
            s.hops.begin() + static_cast<std::ptrdiff_t>(slot * sample_size_));
  s.hop_filled[slot] = 1;
}

TripleNeighborhoods build_neighborhoods(const CollaborativeKnowledgeGraph& train_graph,
                                        std::size_t sample_size, std::size_t depth,
                                        std::uint64_t run_seed, std::uint64_t epoch,
                                        std::size_t threads) {
  TripleNeighborhoods nb(train_graph.num_users(), train_graph.num_items(), sample_size, depth,
                         mix_seed({run_seed, epoch}));
  const std::size_t n_users = train_graph.num_users();
  const std::size_t n_total = n_users + train_graph.num_items();
  // Nodes write disjoint slots, so workers need no synchronisation.
  parallel_for(n_total, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t n = begin; n < end; ++n) {
      const NodeKind kind = n < n_users ? NodeKind::kUser : NodeKind::kItem;
      const Id node = static_cast<Id>(n < n_users ? n : n - n_users);
      const std::uint64_t stream =
          mix_seed({run_seed, epoch, static_cast<std::uint64_t>(kind), node});
      nb.set_interactive(kind, node,
                         sample_interactive_neighbors(train_graph, kind, node, sample_size,
                                                      mix_seed({stream, kInteractiveStream})));
      if (depth == 0) continue;
      EntitySet frontier = initial_entities(train_graph, kind, node);
      for (std::size_t k = 1; k <= depth; ++k) {
        nb.set_hop(kind, node, k,
                   sample_triples(train_graph, frontier, sample_size, mix_seed({stream, k})));
        if (k < depth) frontier = expand_hop(train_graph, frontier);
      }
    }
  });
  return nb;
}

void write_neighborhoods_tsv(const std::filesystem::path& path, const TripleNeighborhoods& nb) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# node\thop\th,r,t\n";
  for (NodeKind kind : {NodeKind::kUser, NodeKind::kItem}) {
    const char prefix = kind == NodeKind::kUser ? 'u' : 'i';
    for (Id node = 0; node < nb.num_nodes(kind); ++node) {
      for (std::size_t k = 1; k <= nb.depth(); ++k) {
        for (const Triple& t : nb.hop(kind, node, k)) {
          out << prefix << node << '\t' << k << '\t' << t.head << ',' << t.relation << ','
              << t.tail << '\n';
        }
      }
    }
  }
}

}  // namespace kper
