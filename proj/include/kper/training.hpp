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
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "kper/adam.hpp"
#include "kper/checkpoint.hpp"
#include "kper/ckg.hpp"
#include "kper/config.hpp"
#include "kper/model.hpp"
#include "kper/neighborhood.hpp"
#include "kper/params.hpp"
#include "kper/seed_referencing.hpp"

namespace kper {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double ce = 0.0;        // batch means averaged over the epoch
  double sp = 0.0;
  double l2 = 0.0;
  double total = 0.0;
  double open_prob = 0.0;  // mean gate-open probability per (node, seed)
  double val_recall = 0.0;
  double seconds = 0.0;
};

// `epoch<TAB>ce<TAB>sp<TAB>l2<TAB>total<TAB>val_recall@10<TAB>seconds`
std::string format_epoch_log(const EpochLog& e);
std::string epoch_log_header(std::size_t top_k);

// Training-set seed pool for `config`.
SeedPool seed_pool_for(const CollaborativeKnowledgeGraph& train_graph, const TrainConfig& config,
                       std::vector<std::string>* warnings = nullptr);

class Trainer {
 public:
  // `graph` is the full graph (its positives are never drawn as negatives);
  // encoders and seeds only see split.train.
  Trainer(const CollaborativeKnowledgeGraph& graph, const DatasetSplit& split,
          const TrainConfig& config);
  // Continues from a checkpoint that carries optimizer state.
  Trainer(const CollaborativeKnowledgeGraph& graph, const DatasetSplit& split,
          const Checkpoint& resume_from);

  // One pass over the training data plus validation. Throws
  // NonFiniteLossError, after writing the offending batch to the dump path
  // when one is set.
  EpochLog run_epoch();

  bool finished() const;

  // Runs epochs until early stopping or max_epochs. `on_epoch` sees every log.
  void train(const std::function<void(const EpochLog&)>& on_epoch = {});

  // Resumable snapshot of the current state.
  Checkpoint checkpoint() const;
  // Parameters from the epoch with the best validation metric (current
  // parameters before any epoch has run).
  Checkpoint best_checkpoint() const;

  double validation_recall() const;

  void set_dump_path(std::filesystem::path p) { dump_path_ = std::move(p); }
  void set_best(Checkpoint best) { best_ = std::move(best); }

  const TrainConfig& config() const { return config_; }
  const CollaborativeKnowledgeGraph& train_graph() const { return train_graph_; }
  const SeedPool& pool() const { return pool_; }
  const ModelParameters& params() const { return params_; }
  const std::vector<EpochLog>& history() const { return history_; }
  std::size_t epoch() const { return epoch_; }
  double best_metric() const { return best_metric_; }
  std::size_t best_epoch() const { return best_epoch_; }
  std::vector<std::string> warnings() const { return warnings_; }

 private:
  void setup();

  const CollaborativeKnowledgeGraph& graph_;
  const DatasetSplit& split_;
  TrainConfig config_;
  CollaborativeKnowledgeGraph train_graph_;
  std::vector<Interaction> train_positives_;
  SeedPool pool_;
  ModelOptions opts_;
  ModelParameters params_;
  AdamState adam_;
  TripleNeighborhoods eval_nb_;
  std::size_t epoch_ = 0;
  double best_metric_ = -1.0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  std::optional<Checkpoint> best_;
  std::vector<EpochLog> history_;
  std::vector<std::string> warnings_;
  std::filesystem::path dump_path_;
};

}  // namespace kper
