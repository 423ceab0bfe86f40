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

#include "kper/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kper/errors.hpp"
#include "kper/evaluation.hpp"
#include "kper/rng.hpp"

namespace kper {

namespace {

constexpr std::uint64_t kShuffleSalt = 0x5f1e;
constexpr std::uint64_t kNegativeSalt = 0x6e6;
constexpr std::uint64_t kInitSalt = 0x1417;

void dump_batch(const std::filesystem::path& path, std::span<const Interaction> batch,
                std::span<const double> probs) {
  std::ofstream out(path);
  out << "user\titem\tlabel\tprob\n";
  for (std::size_t k = 0; k < batch.size(); ++k) {
    out << batch[k].user << '\t' << batch[k].item << '\t' << int(batch[k].label) << '\t'
        << format_double(k < probs.size() ? probs[k] : 0.0) << '\n';
  }
}

}  // namespace

std::string epoch_log_header(std::size_t top_k) {
  return "epoch\tce\tsp\tl2\ttotal\tval_recall@" + std::to_string(top_k) + "\tseconds";
}

std::string format_epoch_log(const EpochLog& e) {
  std::ostringstream s;
  s << e.epoch << '\t' << format_double(e.ce) << '\t' << format_double(e.sp) << '\t'
    << format_double(e.l2) << '\t' << format_double(e.total) << '\t'
    << format_double(e.val_recall) << '\t' << format_double(std::round(e.seconds * 1000) / 1000);
  return s.str();
}

SeedPool seed_pool_for(const CollaborativeKnowledgeGraph& train_graph, const TrainConfig& config,
                       std::vector<std::string>* warnings) {
  return build_seed_pool(train_graph, config.seeds_per_side, config.seed_exclusion, warnings);
}

Trainer::Trainer(const CollaborativeKnowledgeGraph& graph, const DatasetSplit& split,
                 const TrainConfig& config)
    : graph_(graph), split_(split), config_(config) {
  setup();
  params_ = init_parameters(model_dims(train_graph_, pool_, config_.dim),
                            mix_seed({config_.seed, kInitSalt}));
  adam_ = AdamState::zeros(params_.dims());
}

Trainer::Trainer(const CollaborativeKnowledgeGraph& graph, const DatasetSplit& split,
                 const Checkpoint& resume_from)
    : graph_(graph), split_(split), config_(resume_from.config) {
  setup();
  if (!resume_from.adam) throw ValidationError("checkpoint has no optimizer state to resume from");
  if (!(resume_from.params.dims() == model_dims(train_graph_, pool_, config_.dim))) {
    throw ValidationError("checkpoint dimensions do not match the prepared data");
  }
  params_ = resume_from.params;
  adam_ = *resume_from.adam;
  epoch_ = resume_from.epoch;
  best_metric_ = resume_from.best_metric;
  best_epoch_ = resume_from.best_epoch;
  since_best_ = resume_from.epochs_since_best;
}

void Trainer::setup() {
  config_.validate();
  train_positives_ = positives_of(split_.train);
  train_graph_ = graph_.with_interactions(train_positives_);
  pool_ = seed_pool_for(train_graph_, config_, &warnings_);
  opts_ = ModelOptions::from(config_);
  eval_nb_ = evaluation_neighborhoods(train_graph_, config_);
}

EpochLog Trainer::run_epoch() {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t e = epoch_;

  // labelled negatives in the input are replaced by fresh samples
  NegativeSample neg = sample_negatives(
      graph_, train_positives_,
      mix_seed({config_.seed, kNegativeSalt, config_.freeze_negatives ? 0 : e}));
  if (e == 0) warnings_.insert(warnings_.end(), neg.warnings.begin(), neg.warnings.end());
  std::vector<Interaction> data = train_positives_;
  data.insert(data.end(), neg.negatives.begin(), neg.negatives.end());
  Rng rng(mix_seed({config_.seed, kShuffleSalt, e}));
  std::shuffle(data.begin(), data.end(), rng.engine());

  const TripleNeighborhoods nb = build_neighborhoods(train_graph_, config_.sample_size,
                                                     config_.depth, config_.seed, e,
                                                     config_.threads);
  ModelParameters grads = ModelParameters::zeros(params_.dims());
  const AdamOptions adam_opts{config_.learning_rate};

  EpochLog log;
  log.epoch = epoch_ + 1;
  std::size_t batches = 0;
  double entries = 0.0;
  for (std::size_t b0 = 0; b0 < data.size(); b0 += config_.batch_size) {
    const std::span<const Interaction> batch(data.data() + b0,
                                             std::min(config_.batch_size, data.size() - b0));
    grads.set_zero();
    BatchContext ctx{params_, pool_, opts_, nb, GateNoise::for_batch(config_.seed, e, batches),
                     config_.lambda1, config_.threads};
    const BatchOutput out = batch_forward_backward(ctx, batch, &grads);
    const double l2 = l2_squared(params_);
    const double total = out.ce + config_.lambda1 * out.sp + config_.lambda2 * l2;
    if (!std::isfinite(total) || !grads.all_finite()) {
      std::ostringstream msg;
      msg << "non-finite loss at epoch " << log.epoch << " batch " << batches << " (ce="
          << out.ce << " sp=" << out.sp << " l2=" << l2 << ", " << batch.size() << " pairs";
      if (!dump_path_.empty()) {
        dump_batch(dump_path_, batch, out.probs);
        msg << ", dumped to " << dump_path_.string();
      }
      msg << ")";
      throw NonFiniteLossError(msg.str());
    }
    add_scaled(grads, params_, 2.0 * config_.lambda2);
    adam_step(params_, grads, adam_, adam_opts);

    std::size_t distinct = 0;
    if (opts_.use_referencing) {
      std::vector<Id> us, is;
      for (const auto& r : batch) {
        us.push_back(r.user);
        is.push_back(r.item);
      }
      std::sort(us.begin(), us.end());
      std::sort(is.begin(), is.end());
      distinct = static_cast<std::size_t>(std::unique(us.begin(), us.end()) - us.begin()) *
                     pool_.count(NodeKind::kUser) +
                 static_cast<std::size_t>(std::unique(is.begin(), is.end()) - is.begin()) *
                     pool_.count(NodeKind::kItem);
    }
    log.ce += out.ce;
    log.sp += out.sp;
    log.l2 += l2;
    log.total += total;
    log.open_prob += out.sp;
    entries += static_cast<double>(distinct);
    ++batches;
  }
  if (batches > 0) {
    const double nb_f = static_cast<double>(batches);
    log.ce /= nb_f;
    log.sp /= nb_f;
    log.l2 /= nb_f;
    log.total /= nb_f;
  }
  log.open_prob = entries > 0.0 ? log.open_prob / entries : 0.0;

  ++epoch_;
  log.val_recall = validation_recall();
  if (log.val_recall > best_metric_) {
    best_metric_ = log.val_recall;
    best_epoch_ = epoch_;
    since_best_ = 0;
    best_ = checkpoint();
  } else {
    ++since_best_;
  }
  log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  history_.push_back(log);
  return log;
}

double Trainer::validation_recall() const {
  const RankingTask task =
      validation_ranking_task(graph_, split_, config_.val_max_users, config_.seed);
  if (task.users.empty()) return 0.0;
  const ModelScorer scorer(params_, pool_, opts_, eval_nb_);
  const auto rankings = rank_top(scorer, task, config_.eval_top_k, config_.threads);
  const std::size_t k = config_.eval_top_k;
  return topk_metrics(task, rankings, std::span<const std::size_t>(&k, 1)).recall[0];
}

bool Trainer::finished() const {
  return epoch_ >= config_.max_epochs || (epoch_ > 0 && since_best_ >= config_.patience);
}

void Trainer::train(const std::function<void(const EpochLog&)>& on_epoch) {
  while (!finished()) {
    const EpochLog log = run_epoch();
    if (on_epoch) on_epoch(log);
  }
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.params = params_;
  c.config = config_;
  c.epoch = epoch_;
  c.best_metric = best_metric_;
  c.best_epoch = best_epoch_;
  c.epochs_since_best = since_best_;
  c.adam = adam_;
  return c;
}

Checkpoint Trainer::best_checkpoint() const {
  if (best_) return *best_;
  return checkpoint();
}

}  // namespace kper
