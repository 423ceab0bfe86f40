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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "kper/adam.hpp"
#include "kper/checkpoint.hpp"
#include "kper/config.hpp"
#include "kper/errors.hpp"
#include "kper/training.hpp"
#include "kper/verify.hpp"
#include "test_support.hpp"

namespace kper {
namespace {

using testing::TempDir;

ModelDims init_dims() {
  ModelDims d;
  d.num_users = 30;
  d.num_entities = 50;
  d.num_relations = 4;
  d.dim = 64;
  d.hidden = 64;
  d.num_seeds = 8;
  return d;
}

TEST(Init, XavierBoundsAndZeroBiases) {
  const ModelParameters p = init_parameters(init_dims(), 9);
  p.for_each([](std::string_view name, const Matrix& m) {
    if (is_bias(name)) {
      for (double x : m.flat()) EXPECT_EQ(x, 0.0) << name;
      return;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (double x : m.flat()) {
      EXPECT_LE(std::abs(x), bound) << name;
    }
  });
  // gate_w is d x 2d
  EXPECT_EQ(p.gate_w.rows(), 64u);
  EXPECT_EQ(p.gate_w.cols(), 128u);
}

TEST(Init, SameSeedSameTensors) {
  EXPECT_EQ(init_parameters(init_dims(), 4), init_parameters(init_dims(), 4));
  EXPECT_FALSE(init_parameters(init_dims(), 4) == init_parameters(init_dims(), 5));
}

TEST(Init, SampleVarianceOfWideMatrix) {
  const ModelParameters p = init_parameters(init_dims(), 13);
  const auto w = p.gate_w.flat();
  double mean = 0, sq = 0;
  for (double x : w) mean += x;
  mean /= static_cast<double>(w.size());
  for (double x : w) sq += (x - mean) * (x - mean);
  const double var = sq / static_cast<double>(w.size() - 1);
  EXPECT_NEAR(var, 2.0 / (64 + 128), 0.2 * 2.0 / (64 + 128));
}

ModelDims scalar_dims() {
  ModelDims d;
  d.dim = 1;
  d.hidden = 1;
  return d;
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ModelParameters p = ModelParameters::zeros(scalar_dims());
  ModelParameters g = ModelParameters::zeros(scalar_dims());
  g.gate_q(0, 0) = 0.37;
  g.attn_b2(0, 0) = -250.0;
  AdamState st = AdamState::zeros(p.dims());
  adam_step(p, g, st, AdamOptions{1e-3});
  // bias-corrected first step: lr * g / (|g| + eps)
  EXPECT_NEAR(p.gate_q(0, 0), -1e-3, 1e-10);
  EXPECT_NEAR(p.attn_b2(0, 0), 1e-3, 1e-12);
  EXPECT_EQ(p.gate_b(0, 0), 0.0);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ModelParameters p = random_parameters(scalar_dims(), 3);
  const ModelParameters before = p;
  AdamState st = AdamState::zeros(p.dims());
  adam_step(p, ModelParameters::zeros(p.dims()), st, AdamOptions{1e-2});
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FiveStepScalarTrace) {
  const double grads[] = {0.5, -1.25, 2.0, 0.1, -0.7};
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  // hand-rolled oracle
  double w = 0.3, m = 0, v = 0;
  ModelParameters p = ModelParameters::zeros(scalar_dims());
  p.gate_b(0, 0) = 0.3;
  AdamState st = AdamState::zeros(p.dims());
  for (int t = 1; t <= 5; ++t) {
    const double g = grads[t - 1];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    w -= lr * mh / (std::sqrt(vh) + eps);

    ModelParameters gp = ModelParameters::zeros(scalar_dims());
    gp.gate_b(0, 0) = g;
    adam_step(p, gp, st, AdamOptions{lr, b1, b2, eps});
    EXPECT_NEAR(p.gate_b(0, 0), w, 1e-12) << "step " << t;
  }
}

TEST(Config, TextRoundTripAndHash) {
  TrainConfig c;
  c.dim = 32;
  c.tau = 0.1;
  c.lambda1 = 3e-7;
  c.masked_referencing = true;
  c.seed = 123456789012345ULL;
  const TrainConfig back = TrainConfig::from_text(c.to_text());
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.hash(), c.hash());
  TrainConfig d = c;
  d.eta = -0.4;
  EXPECT_NE(d.hash(), c.hash());
  EXPECT_EQ(c.hash().size(), 16u);
}

TEST(Config, SetAndValidate) {
  TrainConfig c;
  c.set("lr", "0.005");
  EXPECT_EQ(c.learning_rate, 0.005);
  EXPECT_THROW(c.set("no_such_key", "1"), std::invalid_argument);
  EXPECT_THROW(c.set("d", "abc"), std::invalid_argument);
  c.eta = 0.2;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.eta = -0.5;
  c.tau = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Config, FileErrorsNameTheLine) {
  TempDir dir;
  testing::write_text(dir / "c.txt", "# comment\nd=16\nthis line is wrong\n");
  try {
    TrainConfig::load(dir / "c.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  testing::write_text(dir / "ok.txt", "d=16\nK=1\n");
  const TrainConfig c = TrainConfig::load(dir / "ok.txt");
  EXPECT_EQ(c.dim, 16u);
  EXPECT_EQ(c.depth, 1u);
}

Checkpoint sample_checkpoint() {
  Checkpoint c;
  c.params = random_parameters(init_dims(), 21);
  c.params.user_table(0, 0) = -0.0;
  c.params.user_table(0, 1) = std::numeric_limits<double>::denorm_min();
  c.params.user_table(0, 2) = 1e308;
  c.config.dim = 64;
  c.epoch = 7;
  c.best_metric = 0.1234567890123456789;
  c.best_epoch = 5;
  c.epochs_since_best = 2;
  c.adam = AdamState::zeros(init_dims());
  c.adam->step = 77;
  c.adam->m.gate_q(0, 3) = 1.0 / 3.0;
  c.meta["note"] = "x y";
  return c;
}

bool bitwise_equal(const ModelParameters& a, const ModelParameters& b) {
  std::vector<const Matrix*> lhs;
  a.for_each([&](std::string_view, const Matrix& m) { lhs.push_back(&m); });
  bool same = true;
  std::size_t k = 0;
  b.for_each([&](std::string_view, const Matrix& m) {
    const Matrix& l = *lhs[k++];
    same = same && l.rows() == m.rows() && l.cols() == m.cols() &&
           std::memcmp(l.flat().data(), m.flat().data(), m.size() * sizeof(double)) == 0;
  });
  return same;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const Checkpoint c = sample_checkpoint();
  const std::string bytes = serialize_checkpoint(c);
  EXPECT_EQ(bytes.substr(0, 4), "KPER");
  const Checkpoint back = deserialize_checkpoint(bytes);
  EXPECT_TRUE(bitwise_equal(back.params, c.params));
  EXPECT_TRUE(std::signbit(back.params.user_table(0, 0)));
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_checkpoint(back), bytes);

  TempDir dir;
  save_checkpoint(dir / "a.ckpt", c);
  EXPECT_EQ(testing::read_bytes(dir / "a.ckpt"), bytes);
  EXPECT_EQ(load_checkpoint(dir / "a.ckpt"), c);
}

TEST(Checkpoint, CorruptAndMissingFilesAreReported) {
  const std::string bytes = serialize_checkpoint(sample_checkpoint());
  EXPECT_THROW(deserialize_checkpoint("NOPE" + bytes.substr(4)), std::runtime_error);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() / 2)), std::runtime_error);
  TempDir dir;
  try {
    load_checkpoint(dir / "missing.ckpt");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("missing.ckpt"), std::string::npos);
  }
}

TEST(Descent, OneStepLowersBatchLoss) {
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GradFixture f = make_grad_fixture(seed + 40);
    const GradCheckInput in{f.pool, f.opts, f.nb, f.batch, 1e-4, 1e-5};
    ModelParameters p = init_parameters(f.dims, seed);
    const double before = total_objective(in, p);
    const ModelParameters g = total_gradient(in, p);
    AdamState st = AdamState::zeros(f.dims);
    adam_step(p, g, st, AdamOptions{1e-3});
    improved += total_objective(in, p) < before;
  }
  EXPECT_GE(improved, 9);
}

TEST(Trainer, ThreeEpochRunsAreBitwiseIdentical) {
  const auto data = testing::tiny_data();
  const TrainConfig cfg = testing::tiny_config();
  Trainer a(data.graph, data.split, cfg), b(data.graph, data.split, cfg);
  for (int e = 0; e < 3; ++e) {
    const EpochLog la = a.run_epoch(), lb = b.run_epoch();
    EXPECT_EQ(la.ce, lb.ce);
    EXPECT_EQ(la.sp, lb.sp);
    EXPECT_EQ(la.l2, lb.l2);
    EXPECT_EQ(la.total, lb.total);
    EXPECT_EQ(la.val_recall, lb.val_recall);
  }
  EXPECT_EQ(serialize_checkpoint(a.checkpoint()), serialize_checkpoint(b.checkpoint()));
  EXPECT_EQ(serialize_checkpoint(a.best_checkpoint()), serialize_checkpoint(b.best_checkpoint()));
}

TEST(Trainer, ResumeEqualsUninterruptedRun) {
  const auto data = testing::tiny_data();
  const TrainConfig cfg = testing::tiny_config();
  Trainer full(data.graph, data.split, cfg);
  full.run_epoch();
  full.run_epoch();

  Trainer first(data.graph, data.split, cfg);
  first.run_epoch();
  const Checkpoint saved = deserialize_checkpoint(serialize_checkpoint(first.checkpoint()));
  Trainer resumed(data.graph, data.split, saved);
  resumed.run_epoch();
  EXPECT_TRUE(bitwise_equal(resumed.params(), full.params()));
  EXPECT_EQ(serialize_checkpoint(resumed.checkpoint()), serialize_checkpoint(full.checkpoint()));
}

TEST(Trainer, ResumeNeedsOptimizerState) {
  const auto data = testing::tiny_data();
  Trainer t(data.graph, data.split, testing::tiny_config());
  Checkpoint c = t.checkpoint();
  c.adam.reset();
  EXPECT_THROW(Trainer(data.graph, data.split, c), ValidationError);
}

TEST(Trainer, LargeSparsityWeightClosesGates) {
  const auto data = testing::tiny_data();
  TrainConfig cfg = testing::tiny_config();
  cfg.lambda1 = 1.0;
  cfg.learning_rate = 1e-2;
  Trainer t(data.graph, data.split, cfg);
  double prev = 2.0;
  for (int e = 0; e < 4; ++e) {
    const EpochLog log = t.run_epoch();
    EXPECT_GT(log.open_prob, 0.0);
    EXPECT_LT(log.open_prob, prev) << "epoch " << log.epoch;
    prev = log.open_prob;
  }
}

TEST(Trainer, EarlyStoppingHonoursPatience) {
  const auto data = testing::tiny_data();
  TrainConfig cfg = testing::tiny_config();
  cfg.patience = 1;
  cfg.max_epochs = 30;
  cfg.learning_rate = 1e-3;
  Trainer t(data.graph, data.split, cfg);
  t.train();
  EXPECT_LE(t.epoch(), t.best_epoch() + cfg.patience);
  EXPECT_GE(t.epoch(), 1u);
  EXPECT_EQ(t.best_checkpoint().epoch, t.best_epoch());
  EXPECT_EQ(t.best_checkpoint().best_metric, t.best_metric());
}

TEST(Trainer, NonFiniteLossAbortsWithDump) {
  const auto data = testing::tiny_data();
  Trainer t(data.graph, data.split, testing::tiny_config());
  Checkpoint c = t.checkpoint();
  c.params.user_table(0, 0) = std::numeric_limits<double>::quiet_NaN();
  c.params.user_table(1, 0) = std::numeric_limits<double>::quiet_NaN();
  Trainer broken(data.graph, data.split, c);
  TempDir dir;
  broken.set_dump_path(dir / "bad_batch.tsv");
  EXPECT_THROW(broken.run_epoch(), NonFiniteLossError);
  EXPECT_TRUE(std::filesystem::exists(dir / "bad_batch.tsv"));
}

TEST(Trainer, EpochLogLine) {
  EpochLog e;
  e.epoch = 3;
  e.ce = 0.5;
  e.val_recall = 0.25;
  e.seconds = 1.23456;
  const std::string line = format_epoch_log(e);
  EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 6);
  EXPECT_EQ(line.substr(0, 6), "3\t0.5\t");
  EXPECT_EQ(epoch_log_header(10), "epoch\tce\tsp\tl2\ttotal\tval_recall@10\tseconds");
}

}  // namespace
}  // namespace kper
