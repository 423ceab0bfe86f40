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

#include <span>

#include "kper/ckg.hpp"

namespace kper {

// Anything that can rank items for a user. Higher is better.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual void score(Id user, std::span<const Id> items, std::span<double> out) const = 0;
  // Score on the probability scale, used for CTR AUC.
  virtual double probability(Id user, Id item) const = 0;
};

}  // namespace kper
