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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "kper/adam.hpp"
#include "kper/config.hpp"
#include "kper/params.hpp"

namespace kper {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParameters params;
  TrainConfig config;
  std::uint64_t epoch = 0;  // epochs completed
  double best_metric = 0.0;
  std::uint64_t best_epoch = 0;
  std::uint64_t epochs_since_best = 0;
  std::optional<AdamState> adam;  // present for resumable checkpoints
  std::map<std::string, std::string> meta;

  bool operator==(const Checkpoint&) const = default;
};

// Layout: "KPER", u32 version, u32 tensor count, per tensor (u32 name
// length, name, u32 rank, u64 dims), then each tensor's row-major f64
// payload, then u64 length and a key=value text block. Little-endian.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& origin = "<bytes>");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws std::runtime_error naming the path when missing or malformed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kper
