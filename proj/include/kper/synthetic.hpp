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
#include <vector>

#include "kper/ckg.hpp"

namespace kper {

// Parameters of a planted-topic generator: items and knowledge entities
// belong to topics, users prefer a few topics, and knowledge triples mostly
// stay inside a topic, so both interactions and the knowledge graph carry
// signal.
struct SyntheticSpec {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t entities = 0;  // including items
  std::size_t relations = 0;
  std::size_t triples = 0;
  std::size_t interactions = 0;  // positives
  std::size_t topics = 20;
  double topic_affinity = 0.8;  // share of a user's items drawn from preferred topics
  double kg_affinity = 0.8;     // share of triples whose tail shares the head's topic
  double popularity_skew = 0.8; // Zipf exponent of item popularity
  std::uint64_t seed = 1;

  // Same counts as the public Last.FM knowledge-aware benchmark.
  static SyntheticSpec lastfm_scale(std::uint64_t seed = 1);
  // 10 users, 10 items, 20 entities, 30 triples.
  static SyntheticSpec tiny(std::uint64_t seed = 1);
};

struct SyntheticData {
  std::vector<Interaction> ratings;  // positives then one sampled negative each
  std::vector<Triple> triples;
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t entities = 0;
  std::size_t relations = 0;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Graph over the generator's ids directly (no remapping needed).
CollaborativeKnowledgeGraph synthetic_graph(const SyntheticData& data);

// `user item label` and `head relation tail` files, tab separated.
void write_synthetic(const std::filesystem::path& ratings_path,
                     const std::filesystem::path& kg_path, const SyntheticData& data);

}  // namespace kper
