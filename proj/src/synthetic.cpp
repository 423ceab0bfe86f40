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

#include "kper/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "kper/rng.hpp"

namespace kper {

SyntheticSpec SyntheticSpec::lastfm_scale(std::uint64_t seed) {
  SyntheticSpec s;
  s.users = 1872;
  s.items = 3846;
  s.entities = 9366;
  s.relations = 60;
  s.triples = 15518;
  s.interactions = 42346;
  s.topics = 24;
  s.seed = seed;
  return s;
}

SyntheticSpec SyntheticSpec::tiny(std::uint64_t seed) {
  SyntheticSpec s;
  s.users = 10;
  s.items = 10;
  s.entities = 20;
  s.relations = 4;
  s.triples = 30;
  s.interactions = 30;
  s.topics = 3;
  s.seed = seed;
  return s;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.users == 0 || spec.items == 0 || spec.entities < spec.items || spec.topics == 0 ||
      spec.relations == 0) {
    throw std::invalid_argument("synthetic spec needs users, items, relations, topics and entities >= items");
  }
  if (spec.interactions < spec.users) {
    throw std::invalid_argument("every user needs an interaction: interactions < users");
  }
  if (spec.interactions > spec.users * spec.items) {
    throw std::invalid_argument("more interactions requested than user-item pairs");
  }
  std::mt19937_64 rng(mix_seed({spec.seed, 0x5e7}));
  const std::size_t T = spec.topics;

  std::vector<std::size_t> entity_topic(spec.entities);
  for (std::size_t e = 0; e < spec.entities; ++e) entity_topic[e] = rng() % T;
  std::vector<std::vector<Id>> items_in_topic(T), entities_in_topic(T);
  for (std::size_t e = 0; e < spec.entities; ++e) {
    (e < spec.items ? items_in_topic : entities_in_topic)[entity_topic[e]].push_back(static_cast<Id>(e));
  }

  // Zipf popularity over a random item order
  std::vector<double> pop(spec.items);
  std::vector<std::size_t> perm(spec.items);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t r = 0; r < spec.items; ++r) {
    pop[perm[r]] = 1.0 / std::pow(static_cast<double>(r + 1), spec.popularity_skew);
  }
  auto weights_of = [&](const std::vector<Id>& ids) {
    std::vector<double> w(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) w[k] = pop[ids[k]];
    return w;
  };
  std::vector<std::discrete_distribution<std::size_t>> topic_item;
  for (std::size_t t = 0; t < T; ++t) {
    auto w = weights_of(items_in_topic[t]);
    topic_item.emplace_back(w.begin(), w.end());
  }
  std::discrete_distribution<std::size_t> any_item(pop.begin(), pop.end());

  // user activity: heavy tailed, at least one interaction each
  std::vector<double> activity(spec.users);
  std::lognormal_distribution<double> act(0.0, 1.0);
  for (auto& a : activity) a = act(rng);
  const double act_sum = std::accumulate(activity.begin(), activity.end(), 0.0);
  std::vector<std::size_t> budget(spec.users);
  std::size_t assigned = 0;
  for (std::size_t u = 0; u < spec.users; ++u) {
    budget[u] = std::max<std::size_t>(
        1, static_cast<std::size_t>(activity[u] / act_sum * static_cast<double>(spec.interactions)));
    budget[u] = std::min(budget[u], spec.items);
    assigned += budget[u];
  }
  while (assigned < spec.interactions) {
    const std::size_t u = rng() % spec.users;
    if (budget[u] < spec.items) {
      ++budget[u];
      ++assigned;
    }
  }
  while (assigned > spec.interactions) {
    const std::size_t u = rng() % spec.users;
    if (budget[u] > 1) {
      --budget[u];
      --assigned;
    }
  }

  SyntheticData data;
  data.users = spec.users;
  data.items = spec.items;
  data.entities = spec.entities;
  data.relations = spec.relations;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::set<Id>> chosen(spec.users);
  for (std::size_t u = 0; u < spec.users; ++u) {
    const std::size_t t1 = rng() % T;
    const std::size_t t2 = rng() % T;
    std::size_t tries = 0;
    while (chosen[u].size() < budget[u]) {
      std::size_t item;
      const std::size_t t = unit(rng) < 0.7 ? t1 : t2;
      if (unit(rng) < spec.topic_affinity && !items_in_topic[t].empty() && tries < 50 * budget[u]) {
        item = items_in_topic[t][topic_item[t](rng)];
      } else {
        item = any_item(rng);
      }
      ++tries;
      if (tries > 200 * budget[u]) item = rng() % spec.items;
      chosen[u].insert(static_cast<Id>(item));
    }
    for (Id i : chosen[u]) data.ratings.push_back({static_cast<Id>(u), i, 1});
  }
  const std::size_t positives = data.ratings.size();
  for (std::size_t k = 0; k < positives; ++k) {
    const Id u = data.ratings[k].user;
    if (chosen[u].size() >= spec.items) continue;
    Id j;
    do {
      j = static_cast<Id>(rng() % spec.items);
    } while (chosen[u].count(j) != 0);
    data.ratings.push_back({u, j, 0});
  }

  // relations are tied to topics so that (relation, tail) pairs are informative
  std::set<Triple> triples;
  std::size_t guard = 0;
  while (triples.size() < spec.triples && guard++ < 100 * spec.triples + 1000) {
    // most heads are items; the rest are other entities, giving deeper hops
    const bool item_head = unit(rng) < 0.7 || spec.entities == spec.items;
    const Id head = item_head ? static_cast<Id>(rng() % spec.items)
                              : static_cast<Id>(spec.items + rng() % (spec.entities - spec.items));
    const std::size_t t = entity_topic[head];
    Id tail;
    if (unit(rng) < spec.kg_affinity && !entities_in_topic[t].empty()) {
      tail = entities_in_topic[t][rng() % entities_in_topic[t].size()];
    } else {
      tail = static_cast<Id>(rng() % spec.entities);
    }
    if (tail == head) continue;
    const Id rel = static_cast<Id>((t + (rng() % 3) * T) % spec.relations);
    triples.insert({head, rel, tail});
  }
  data.triples.assign(triples.begin(), triples.end());
  std::shuffle(data.triples.begin(), data.triples.end(), rng);
  return data;
}

CollaborativeKnowledgeGraph synthetic_graph(const SyntheticData& data) {
  return CollaborativeKnowledgeGraph::build(data.users, data.items, data.entities, data.relations,
                                            positives_of(data.ratings), data.triples);
}

void write_synthetic(const std::filesystem::path& ratings_path,
                     const std::filesystem::path& kg_path, const SyntheticData& data) {
  std::ofstream r(ratings_path);
  if (!r) throw std::runtime_error("cannot write " + ratings_path.string());
  for (const auto& x : data.ratings) r << x.user << '\t' << x.item << '\t' << int(x.label) << '\n';
  std::ofstream k(kg_path);
  if (!k) throw std::runtime_error("cannot write " + kg_path.string());
  for (const auto& t : data.triples) k << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
}

}  // namespace kper
