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
#include <string>
#include <utility>
#include <vector>

namespace kper {

struct TrainConfig {
  std::size_t dim = 64;          // d
  std::size_t depth = 2;         // K
  std::size_t sample_size = 16;  // l
  std::size_t batch_size = 1024;
  double learning_rate = 1e-3;
  double lambda1 = 1e-4;
  double lambda2 = 1e-5;
  double eta = -0.5;
  double tau = 2.0 / 3.0;
  std::size_t seeds_per_side = 64;
  double seed_exclusion = 0.5;  // bottom fraction by degree never chosen as seeds
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::uint64_t seed = 2026;
  std::size_t threads = 1;
  bool use_referencing = true;      // false: v+ = v*, no sparsity term
  bool masked_referencing = false;  // softmax only over open gates
  bool freeze_negatives = false;    // reuse epoch-0 negatives every epoch
  std::size_t val_max_users = 0;    // 0 = every validation user
  std::size_t eval_top_k = 10;      // model selection metric is recall@eval_top_k

  // Ordered key=value pairs, doubles in shortest round-trip form.
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
  std::string to_text() const;

  // Throws std::invalid_argument for an unknown key or malformed value.
  void set(const std::string& key, const std::string& value);
  // `key=value` lines, '#' comments. Throws ParseError.
  void merge_text(const std::string& text, const std::string& origin = "<config>");
  static TrainConfig from_text(const std::string& text, const std::string& origin = "<config>");
  static TrainConfig load(const std::filesystem::path& path);

  // Throws std::invalid_argument when a value is out of range.
  void validate() const;

  // FNV-1a of to_text(), hex.
  std::string hash() const;

  bool operator==(const TrainConfig&) const = default;
};

std::string format_double(double v);

}  // namespace kper
