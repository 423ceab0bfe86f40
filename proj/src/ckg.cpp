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

#include "kper/ckg.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "kper/errors.hpp"
#include "kper/rng.hpp"

namespace kper {
namespace {

// Builds CSR adjacency: offsets has n + 1 entries.
template <typename Row, typename KeyFn, typename ValFn, typename Val>
void build_csr(std::size_t n, const std::vector<Row>& rows, KeyFn key, ValFn val,
               std::vector<std::size_t>& offsets, std::vector<Val>& values) {
  offsets.assign(n + 1, 0);
  for (const Row& r : rows) ++offsets[key(r) + 1];
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  values.resize(offsets[n]);
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (const Row& r : rows) values[cursor[key(r)]++] = val(r);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

std::int64_t parse_id(std::string_view field, const std::string& path, std::size_t line_no) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(path, line_no, "not an integer: '" + std::string(field) + "'");
  }
  if (value < 0) {
    throw ParseError(path, line_no, "negative id: " + std::string(field));
  }
  return value;
}

// Calls fn(fields, line_no) for each non-blank, non-comment line.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn fn) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    auto first = view.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || view[first] == '#') continue;
    fn(split_fields(view), line_no);
  }
}

std::size_t rounded_fifth(std::size_t n) {
  // round(0.2 n) with halves rounded up, in integer arithmetic
  return (2 * n + 5) / 10;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

CollaborativeKnowledgeGraph CollaborativeKnowledgeGraph::build(
    std::size_t num_users, std::size_t num_items, std::size_t num_entities,
    std::size_t num_relations, std::vector<Interaction> interactions,
    std::vector<Triple> triples) {
  if (num_items > num_entities) {
    throw ValidationError("num_items (" + std::to_string(num_items) +
                          ") exceeds num_entities (" + std::to_string(num_entities) + ")");
  }
  for (const Interaction& x : interactions) {
    if (x.user >= num_users || x.item >= num_items || x.label > 1) {
      throw ValidationError("interaction out of range: user " + std::to_string(x.user) +
                            " item " + std::to_string(x.item) + " label " +
                            std::to_string(x.label));
    }
  }
  for (const Triple& t : triples) {
    if (t.head >= num_entities || t.tail >= num_entities || t.relation >= num_relations) {
      throw ValidationError("triple out of range: " + std::to_string(t.head) + " " +
                            std::to_string(t.relation) + " " + std::to_string(t.tail));
    }
  }

  CollaborativeKnowledgeGraph g;
  g.num_users_ = num_users;
  g.num_items_ = num_items;
  g.num_entities_ = num_entities;
  g.num_relations_ = num_relations;
  g.interactions_ = std::move(interactions);
  g.triples_ = std::move(triples);

  std::vector<Interaction> pos = positives_of(g.interactions_);
  build_csr(num_users, pos, [](const Interaction& x) { return x.user; },
            [](const Interaction& x) { return x.item; }, g.user_offsets_, g.user_items_);
  build_csr(num_items, pos, [](const Interaction& x) { return x.item; },
            [](const Interaction& x) { return x.user; }, g.item_offsets_, g.item_users_);
  for (std::size_t u = 0; u < num_users; ++u) {
    auto first = g.user_items_.begin() + static_cast<std::ptrdiff_t>(g.user_offsets_[u]);
    auto last = g.user_items_.begin() + static_cast<std::ptrdiff_t>(g.user_offsets_[u + 1]);
    std::sort(first, last);
    if (std::adjacent_find(first, last) != last) {
      throw ValidationError("duplicate positive interaction for user " + std::to_string(u));
    }
  }
  for (std::size_t i = 0; i < num_items; ++i) {
    std::sort(g.item_users_.begin() + static_cast<std::ptrdiff_t>(g.item_offsets_[i]),
              g.item_users_.begin() + static_cast<std::ptrdiff_t>(g.item_offsets_[i + 1]));
  }
  build_csr(num_entities, g.triples_, [](const Triple& t) { return t.head; },
            [](const Triple& t) { return t; }, g.kg_offsets_, g.kg_by_head_);
  return g;
}

CollaborativeKnowledgeGraph CollaborativeKnowledgeGraph::with_interactions(
    std::vector<Interaction> interactions) const {
  return build(num_users_, num_items_, num_entities_, num_relations_, std::move(interactions),
               triples_);
}

std::span<const Id> CollaborativeKnowledgeGraph::user_items(Id user) const {
  return {user_items_.data() + user_offsets_[user], user_offsets_[user + 1] - user_offsets_[user]};
}

std::span<const Id> CollaborativeKnowledgeGraph::item_users(Id item) const {
  return {item_users_.data() + item_offsets_[item], item_offsets_[item + 1] - item_offsets_[item]};
}

std::span<const Triple> CollaborativeKnowledgeGraph::outgoing(Id entity) const {
  return {kg_by_head_.data() + kg_offsets_[entity], kg_offsets_[entity + 1] - kg_offsets_[entity]};
}

bool CollaborativeKnowledgeGraph::is_positive(Id user, Id item) const {
  auto items = user_items(user);
  return std::binary_search(items.begin(), items.end(), item);
}

LoadedGraph load_ckg(const std::filesystem::path& ratings_path,
                     const std::filesystem::path& kg_path, const LoadOptions& options) {
  struct RawRating {
    std::int64_t user, item;
    std::uint8_t label;
  };
  struct RawTriple {
    std::int64_t head, relation, tail;
  };
  const std::string rpath = ratings_path.string();
  const std::string kpath = kg_path.string();

  std::vector<RawRating> ratings;
  for_each_record(ratings_path, [&](const std::vector<std::string_view>& f, std::size_t line) {
    if (options.labeled) {
      if (f.size() != 3) {
        throw ParseError(rpath, line, "expected 3 fields (user item label), got " +
                                          std::to_string(f.size()));
      }
    } else if (f.size() != 2 && f.size() != 3) {
      throw ParseError(rpath, line,
                       "expected 2 fields (user item), got " + std::to_string(f.size()));
    }
    RawRating r{parse_id(f[0], rpath, line), parse_id(f[1], rpath, line), 1};
    if (f.size() == 3) {
      std::int64_t label = parse_id(f[2], rpath, line);
      if (label > 1) throw ParseError(rpath, line, "label must be 0 or 1");
      if (!options.labeled && label != 1) {
        throw ParseError(rpath, line, "positives-only input contains a 0 label");
      }
      r.label = static_cast<std::uint8_t>(label);
    }
    ratings.push_back(r);
  });

  std::vector<RawTriple> raw_triples;
  for_each_record(kg_path, [&](const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() != 3) {
      throw ParseError(kpath, line, "expected 3 fields (head relation tail), got " +
                                        std::to_string(f.size()));
    }
    raw_triples.push_back(
        {parse_id(f[0], kpath, line), parse_id(f[1], kpath, line), parse_id(f[2], kpath, line)});
  });

  LoadedGraph out;
  std::set<std::int64_t> users, items, kg_entities, relations;
  for (const RawRating& r : ratings) {
    users.insert(r.user);
    items.insert(r.item);
  }
  for (const RawTriple& t : raw_triples) {
    kg_entities.insert(t.head);
    kg_entities.insert(t.tail);
    relations.insert(t.relation);
  }
  // Ratings and KG share one original id space for items. An item id beyond
  // every KG entity id means the two files were not built together.
  if (!kg_entities.empty()) {
    const std::int64_t max_entity = *kg_entities.rbegin();
    for (std::int64_t item : items) {
      if (item > max_entity) {
        throw ValidationError("item " + std::to_string(item) +
                              " from ratings is outside the KG entity space (max entity id " +
                              std::to_string(max_entity) + ")");
      }
    }
  }

  out.ids.users.assign(users.begin(), users.end());
  out.ids.items.assign(items.begin(), items.end());
  out.ids.entities = out.ids.items;
  for (std::int64_t e : kg_entities) {
    if (!items.count(e)) out.ids.entities.push_back(e);
  }
  out.ids.relations.assign(relations.begin(), relations.end());

  auto index_of = [](const std::vector<std::int64_t>& originals) {
    std::unordered_map<std::int64_t, Id> m;
    m.reserve(originals.size());
    for (std::size_t i = 0; i < originals.size(); ++i) m.emplace(originals[i], static_cast<Id>(i));
    return m;
  };
  const auto user_ix = index_of(out.ids.users);
  const auto entity_ix = index_of(out.ids.entities);
  const auto relation_ix = index_of(out.ids.relations);

  std::vector<Interaction> interactions;
  interactions.reserve(ratings.size());
  std::unordered_set<std::uint64_t> seen_pos, seen_neg;
  std::size_t dup_pos = 0, dup_neg = 0;
  for (const RawRating& r : ratings) {
    Interaction x{user_ix.at(r.user), entity_ix.at(r.item), r.label};
    const std::uint64_t key = (static_cast<std::uint64_t>(x.user) << 32) | x.item;
    if (x.label == 1) {
      if (!seen_pos.insert(key).second) {
        ++dup_pos;
        continue;
      }
    } else if (!seen_neg.insert(key).second) {
      ++dup_neg;
      continue;
    }
    interactions.push_back(x);
  }
  // A pair labelled both ways keeps its positive label.
  std::size_t conflicting = 0;
  std::erase_if(interactions, [&](const Interaction& x) {
    const std::uint64_t key = (static_cast<std::uint64_t>(x.user) << 32) | x.item;
    const bool drop = x.label == 0 && seen_pos.count(key);
    conflicting += drop;
    return drop;
  });
  if (dup_pos) out.warnings.push_back("dropped " + std::to_string(dup_pos) + " duplicate positive pairs");
  if (dup_neg) out.warnings.push_back("dropped " + std::to_string(dup_neg) + " duplicate negative pairs");
  if (conflicting) {
    out.warnings.push_back("dropped " + std::to_string(conflicting) +
                           " negative pairs that are also labelled positive");
  }

  std::vector<Triple> triples;
  triples.reserve(raw_triples.size());
  for (const RawTriple& t : raw_triples) {
    triples.push_back({entity_ix.at(t.head), relation_ix.at(t.relation), entity_ix.at(t.tail)});
  }

  out.graph = CollaborativeKnowledgeGraph::build(out.ids.users.size(), out.ids.items.size(),
                                                 out.ids.entities.size(),
                                                 out.ids.relations.size(),
                                                 std::move(interactions), std::move(triples));
  return out;
}

std::vector<Interaction> positives_of(std::span<const Interaction> interactions) {
  std::vector<Interaction> pos;
  for (const Interaction& x : interactions) {
    if (x.label == 1) pos.push_back(x);
  }
  return pos;
}

DatasetSplit split_dataset(const CollaborativeKnowledgeGraph& graph, std::uint64_t seed) {
  const auto& all = graph.interactions();
  if (all.size() < 5) {
    throw ValidationError("need at least 5 interactions to split, got " +
                          std::to_string(all.size()));
  }
  DatasetSplit split;
  split.split_seed = seed;
  std::vector<std::size_t> train_ix, val_ix, test_ix;

  for (std::uint8_t label : {std::uint8_t{1}, std::uint8_t{0}}) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (all[i].label == label) order.push_back(i);
    }
    if (order.empty()) continue;
    Rng rng(mix_seed({seed, 0x5b117ULL, label}));
    std::shuffle(order.begin(), order.end(), rng.engine());

    const std::size_t n = order.size();
    const std::size_t n_val = rounded_fifth(n);
    const std::size_t n_test = rounded_fifth(n);
    const std::size_t n_train = n - n_val - n_test;

    std::vector<std::size_t> reserved, rest;
    if (label == 1) {
      // Users with >= 2 positives keep their first shuffled positive in train.
      std::vector<std::size_t> positives_per_user(graph.num_users(), 0);
      for (std::size_t i : order) ++positives_per_user[all[i].user];
      std::vector<bool> has_reserved(graph.num_users(), false);
      for (std::size_t i : order) {
        const Id u = all[i].user;
        if (positives_per_user[u] >= 2 && !has_reserved[u]) {
          has_reserved[u] = true;
          reserved.push_back(i);
        } else {
          rest.push_back(i);
        }
      }
    } else {
      rest = order;
    }
    if (reserved.size() > n_train) {
      throw ValidationError("cannot keep one train positive per user within the 6:2:2 ratio");
    }
    const std::size_t fill = n_train - reserved.size();
    train_ix.insert(train_ix.end(), reserved.begin(), reserved.end());
    train_ix.insert(train_ix.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(fill));
    val_ix.insert(val_ix.end(), rest.begin() + static_cast<std::ptrdiff_t>(fill),
                  rest.begin() + static_cast<std::ptrdiff_t>(fill + n_val));
    test_ix.insert(test_ix.end(), rest.begin() + static_cast<std::ptrdiff_t>(fill + n_val),
                   rest.end());
  }

  auto gather = [&](std::vector<std::size_t>& ix) {
    std::sort(ix.begin(), ix.end());
    std::vector<Interaction> rows;
    rows.reserve(ix.size());
    for (std::size_t i : ix) rows.push_back(all[i]);
    return rows;
  };
  split.train = gather(train_ix);
  split.validation = gather(val_ix);
  split.test = gather(test_ix);
  return split;
}

NegativeSample sample_negatives(const CollaborativeKnowledgeGraph& graph,
                                std::span<const Interaction> positives, std::uint64_t seed) {
  NegativeSample out;
  std::vector<std::size_t> needed(graph.num_users(), 0);
  for (const Interaction& x : positives) {
    if (x.label == 1) ++needed[x.user];
  }
  const std::size_t n_items = graph.num_items();
  std::vector<Id> chosen;
  std::unordered_set<Id> taken;
  for (Id u = 0; u < graph.num_users(); ++u) {
    const std::size_t count = needed[u];
    if (count == 0) continue;
    Rng rng(mix_seed({seed, 0x7e6ULL, u}));
    auto pos = graph.user_items(u);
    const std::size_t n_candidates = n_items - pos.size();
    chosen.clear();

    if (count <= n_candidates) {
      if (2 * count <= n_candidates) {
        taken.clear();
        while (chosen.size() < count) {
          const Id item = static_cast<Id>(rng.index(n_items));
          if (std::binary_search(pos.begin(), pos.end(), item)) continue;
          if (!taken.insert(item).second) continue;
          chosen.push_back(item);
        }
      } else {
        std::vector<Id> candidates;
        candidates.reserve(n_candidates);
        for (Id item = 0; item < n_items; ++item) {
          if (!std::binary_search(pos.begin(), pos.end(), item)) candidates.push_back(item);
        }
        // partial Fisher-Yates
        for (std::size_t k = 0; k < count; ++k) {
          const std::size_t j = k + rng.index(candidates.size() - k);
          std::swap(candidates[k], candidates[j]);
          chosen.push_back(candidates[k]);
        }
      }
    } else if (n_candidates > 0) {
      std::vector<Id> candidates;
      for (Id item = 0; item < n_items; ++item) {
        if (!std::binary_search(pos.begin(), pos.end(), item)) candidates.push_back(item);
      }
      for (std::size_t k = 0; k < count; ++k) chosen.push_back(candidates[rng.index(candidates.size())]);
      out.warnings.push_back("user " + std::to_string(u) + ": only " +
                             std::to_string(n_candidates) + " non-interacted items for " +
                             std::to_string(count) + " negatives; sampled with replacement");
    } else {
      for (std::size_t k = 0; k < count; ++k) chosen.push_back(static_cast<Id>(rng.index(n_items)));
      out.warnings.push_back("user " + std::to_string(u) +
                             " interacted with every item; negatives drawn with replacement "
                             "from the full catalog");
    }
    for (Id item : chosen) out.negatives.push_back({u, item, 0});
  }
  return out;
}

NegativeSample sample_negatives(const CollaborativeKnowledgeGraph& graph,
                                const DatasetSplit& split, std::uint64_t seed) {
  return sample_negatives(graph, split.train, seed);
}

void attach_evaluation_negatives(const CollaborativeKnowledgeGraph& graph, DatasetSplit& split,
                                 std::vector<std::string>* warnings) {
  auto attach = [&](std::vector<Interaction>& part, std::uint64_t salt) {
    const bool has_negative =
        std::any_of(part.begin(), part.end(), [](const Interaction& x) { return x.label == 0; });
    if (has_negative || part.empty()) return;
    NegativeSample neg = sample_negatives(graph, part, mix_seed({split.split_seed, salt}));
    part.insert(part.end(), neg.negatives.begin(), neg.negatives.end());
    if (warnings) warnings->insert(warnings->end(), neg.warnings.begin(), neg.warnings.end());
  };
  attach(split.validation, 0xa11dULL);
  attach(split.test, 0x7e57ULL);
}

void write_interactions(const std::filesystem::path& path, std::span<const Interaction> rows) {
  std::ofstream out = open_output(path);
  for (const Interaction& x : rows) {
    out << x.user << '\t' << x.item << '\t' << static_cast<int>(x.label) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Interaction> read_interactions(const std::filesystem::path& path) {
  std::vector<Interaction> rows;
  const std::string p = path.string();
  for_each_record(path, [&](const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() != 3) throw ParseError(p, line, "expected 3 fields (user item label)");
    const std::int64_t label = parse_id(f[2], p, line);
    if (label > 1) throw ParseError(p, line, "label must be 0 or 1");
    rows.push_back({static_cast<Id>(parse_id(f[0], p, line)),
                    static_cast<Id>(parse_id(f[1], p, line)), static_cast<std::uint8_t>(label)});
  });
  return rows;
}

void write_triples(const std::filesystem::path& path, std::span<const Triple> rows) {
  std::ofstream out = open_output(path);
  for (const Triple& t : rows) out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Triple> read_triples(const std::filesystem::path& path) {
  std::vector<Triple> rows;
  const std::string p = path.string();
  for_each_record(path, [&](const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() != 3) throw ParseError(p, line, "expected 3 fields (head relation tail)");
    rows.push_back({static_cast<Id>(parse_id(f[0], p, line)),
                    static_cast<Id>(parse_id(f[1], p, line)),
                    static_cast<Id>(parse_id(f[2], p, line))});
  });
  return rows;
}

void write_idmap(const std::filesystem::path& path, const IdMap& ids) {
  std::ofstream out = open_output(path);
  out << "# kind\toriginal\tinternal\n";
  auto emit = [&](const char* kind, const std::vector<std::int64_t>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) out << kind << '\t' << v[i] << '\t' << i << '\n';
  };
  emit("user", ids.users);
  emit("item", ids.items);
  emit("entity", ids.entities);
  emit("relation", ids.relations);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

IdMap read_idmap(const std::filesystem::path& path) {
  std::map<std::string, std::vector<std::pair<std::int64_t, std::int64_t>>> by_kind;
  const std::string p = path.string();
  for_each_record(path, [&](const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() != 3) throw ParseError(p, line, "expected kind, original, internal");
    by_kind[std::string(f[0])].emplace_back(parse_id(f[2], p, line), parse_id(f[1], p, line));
  });
  auto take = [&](const char* kind) {
    auto& rows = by_kind[kind];
    std::sort(rows.begin(), rows.end());
    std::vector<std::int64_t> v;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].first != static_cast<std::int64_t>(i)) {
        throw ValidationError(p + ": internal ids for '" + kind + "' are not contiguous");
      }
      v.push_back(rows[i].second);
    }
    return v;
  };
  IdMap ids;
  ids.users = take("user");
  ids.items = take("item");
  ids.entities = take("entity");
  ids.relations = take("relation");
  return ids;
}

void write_prepared(const std::filesystem::path& dir, const CollaborativeKnowledgeGraph& graph,
                    const DatasetSplit& split) {
  std::filesystem::create_directories(dir);
  write_interactions(dir / "train.tsv", split.train);
  write_interactions(dir / "val.tsv", split.validation);
  write_interactions(dir / "test.tsv", split.test);
  write_triples(dir / "kg.tsv", graph.triples());
  std::ofstream out = open_output(dir / "counts.tsv");
  out << "num_users\t" << graph.num_users() << '\n'
      << "num_items\t" << graph.num_items() << '\n'
      << "num_entities\t" << graph.num_entities() << '\n'
      << "num_relations\t" << graph.num_relations() << '\n'
      << "split_seed\t" << split.split_seed << '\n';
  if (!out) throw std::runtime_error("write failed: " + (dir / "counts.tsv").string());
}

PreparedData read_prepared(const std::filesystem::path& dir) {
  std::map<std::string, std::uint64_t> counts;
  const std::string p = (dir / "counts.tsv").string();
  for_each_record(dir / "counts.tsv", [&](const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() != 2) throw ParseError(p, line, "expected key and value");
    counts[std::string(f[0])] = static_cast<std::uint64_t>(parse_id(f[1], p, line));
  });
  for (const char* key : {"num_users", "num_items", "num_entities", "num_relations", "split_seed"}) {
    if (!counts.count(key)) throw ValidationError(p + ": missing " + key);
  }
  PreparedData data;
  data.split.train = read_interactions(dir / "train.tsv");
  data.split.validation = read_interactions(dir / "val.tsv");
  data.split.test = read_interactions(dir / "test.tsv");
  data.split.split_seed = counts["split_seed"];
  std::vector<Interaction> all = data.split.train;
  all.insert(all.end(), data.split.validation.begin(), data.split.validation.end());
  all.insert(all.end(), data.split.test.begin(), data.split.test.end());
  data.graph = CollaborativeKnowledgeGraph::build(counts["num_users"], counts["num_items"],
                                                  counts["num_entities"], counts["num_relations"],
                                                  std::move(all), read_triples(dir / "kg.tsv"));
  return data;
}

}  // namespace kper
