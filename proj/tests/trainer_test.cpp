// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

#include "warden/trainer.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "warden/synthetic_task.hpp"

namespace warden {
namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.iterations = 20;
  cfg.batch_size = 8;
  cfg.checkpoint_every = 5;
  return cfg;
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_EQ(quantile({3.0, 1.0, 2.0}, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(quantile({0.0, 10.0}, 0.9), 9.0);
  EXPECT_EQ(quantile({5.0}, 0.9), 5.0);
  EXPECT_EQ(quantile({1.0, 4.0, 2.0}, 1.0), 4.0);
  EXPECT_THROW(quantile({}, 0.5), std::invalid_argument);
}

TEST(Entropy, UniformIsLogN) {
  EXPECT_NEAR(entropy({0.25, 0.25, 0.25, 0.25}), std::log(4.0), 1e-15);
  EXPECT_EQ(entropy({1.0, 0.0}), 0.0);
}

TEST(EpochSampler, EachEpochIsAPermutation) {
  EpochSampler s(10, 3);
  for (int epoch = 0; epoch < 3; ++epoch) {
    const auto idx = s.next(10);
    EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 10u);
  }
  EpochSampler a(7, 1), b(7, 1);
  EXPECT_EQ(a.next(20), b.next(20));
}

TEST(Enums, RoundTrip) {
  EXPECT_EQ(parse_aggregation("mean"), Aggregation::Mean);
  EXPECT_EQ(parse_aggregation(to_string(Aggregation::Dro)), Aggregation::Dro);
  EXPECT_EQ(parse_base_method("capo"), BaseMethod::Capo);
  EXPECT_THROW(parse_base_method("dpo"), std::invalid_argument);
}

TEST(Train, DeterministicForFixedSeed) {
  const auto task = make_heavy_tail_task(TaskConfig{}, 4);
  const auto cfg = small_config();
  const auto a = train(task.init, task.adversarial, task.utility, cfg);
  const auto b = train(task.init, task.adversarial, task.utility, cfg);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.params.embed, b.params.embed);
  EXPECT_EQ(a.params.out, b.params.out);
}

TEST(Train, RecordsAndHooks) {
  const auto task = make_heavy_tail_task(TaskConfig{}, 1);
  const auto cfg = small_config();
  std::vector<std::size_t> checkpoints;
  std::size_t records = 0;
  TrainHooks hooks;
  hooks.on_checkpoint = [&](std::size_t k, const ToyModelParams&) { checkpoints.push_back(k); };
  hooks.on_record = [&](const ExperimentRecord&) { ++records; };
  const auto r = train(task.init, task.adversarial, task.utility, cfg, hooks);
  EXPECT_EQ(records, cfg.iterations);
  EXPECT_EQ(checkpoints, (std::vector<std::size_t>{5, 10, 15, 20, 20}));
  ASSERT_EQ(r.records.size(), cfg.iterations);
  for (const auto& rec : r.records) {
    EXPECT_LE(rec.p50, rec.p90);
    EXPECT_LE(rec.p90, rec.max);
    EXPECT_GE(rec.lambda, 0.0);
    ASSERT_TRUE(rec.utility_loss.has_value());
    EXPECT_LE(rec.weights_entropy, std::log(static_cast<double>(cfg.batch_size)) + 1e-12);
  }
  EXPECT_EQ(r.dual.history.size(), cfg.iterations);
}

TEST(Train, NoUtilityLeavesFieldEmpty) {
  const auto task = make_heavy_tail_task(TaskConfig{}, 1);
  auto cfg = small_config();
  cfg.use_utility = false;
  const auto r = train(task.init, task.adversarial, {}, cfg);
  for (const auto& rec : r.records) EXPECT_FALSE(rec.utility_loss.has_value());
}

TEST(Train, MeanAggregationHasUniformEntropy) {
  const auto task = make_heavy_tail_task(TaskConfig{}, 2);
  auto cfg = small_config();
  cfg.aggregation = Aggregation::Mean;
  const auto r = train(task.init, task.adversarial, task.utility, cfg);
  for (const auto& rec : r.records) {
    EXPECT_NEAR(rec.weights_entropy, std::log(8.0), 1e-12);
  }
}

double fixed_vs_mean_distance(const SyntheticTask& task, TrainConfig cfg, double lambda) {
  cfg.dro.lambda_mode = LambdaMode::Fixed;
  cfg.dro.lambda_bounds = {0.0, std::max(1e3, lambda)};
  cfg.dro.lambda_init = lambda;
  cfg.aggregation = Aggregation::Dro;
  const auto dro = train(task.init, task.adversarial, task.utility, cfg);
  cfg.aggregation = Aggregation::Mean;
  const auto mean = train(task.init, task.adversarial, task.utility, cfg);
  return std::sqrt((dro.params.embed - mean.params.embed).squaredNorm() +
                   (dro.params.out - mean.params.out).squaredNorm());
}

TEST(Train, LargeFixedLambdaApproachesMeanAtFirstOrder) {
  // The gap to Mean aggregation shrinks like 1 / (lambda + kappa).
  const auto task = make_heavy_tail_task(TaskConfig{}, 3);
  auto cfg = small_config();
  cfg.iterations = 10;
  const double d6 = fixed_vs_mean_distance(task, cfg, 1e6);
  const double d7 = fixed_vs_mean_distance(task, cfg, 1e7);
  EXPECT_GT(d6, 0.0);
  EXPECT_NEAR(d6 / d7, 10.0, 0.1);
  EXPECT_LE(fixed_vs_mean_distance(task, cfg, 1e9), 1e-6);
}

TEST(Train, SingleSampleBatchIgnoresLambda) {
  const auto task = make_heavy_tail_task(TaskConfig{}, 6);
  auto cfg = small_config();
  cfg.batch_size = 1;
  cfg.use_utility = false;
  cfg.dro.lambda_mode = LambdaMode::Fixed;
  cfg.dro.lambda_init = 0.3;
  const auto a = train(task.init, task.adversarial, {}, cfg);
  cfg.dro.lambda_init = 40.0;
  const auto b = train(task.init, task.adversarial, {}, cfg);
  EXPECT_EQ(a.params.embed, b.params.embed);
  EXPECT_EQ(a.params.out, b.params.out);
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_NEAR(a.records[k].agg_loss - 0.3 * cfg.dro.epsilon, a.records[k].max, 1e-12);
    EXPECT_NEAR(b.records[k].agg_loss - 40.0 * cfg.dro.epsilon, b.records[k].max, 1e-12);
  }
}

TEST(Train, CapoRunsAndStaysFinite) {
  const auto task = make_heavy_tail_task(TaskConfig{}, 5);
  auto cfg = small_config();
  cfg.loss_kind = BaseMethod::Capo;
  cfg.use_utility = false;
  cfg.model_lr = 0.004;
  const auto r = train(task.init, task.adversarial, {}, cfg);
  for (const auto& rec : r.records) EXPECT_TRUE(std::isfinite(rec.agg_loss));
}

TEST(Train, RejectsBadInputs) {
  const auto task = make_heavy_tail_task(TaskConfig{}, 1);
  auto cfg = small_config();
  EXPECT_THROW(train(task.init, {}, task.utility, cfg), std::invalid_argument);
  EXPECT_THROW(train(task.init, task.adversarial, {}, cfg), std::invalid_argument);
  auto bad = task.adversarial;
  bad[0].desired = 99;
  EXPECT_THROW(train(task.init, bad, task.utility, cfg), std::invalid_argument);
}

TEST(Train, NonFiniteLossNamesSample) {
  const auto task = make_heavy_tail_task(TaskConfig{}, 1);
  auto init = task.init;
  init.out(0, 0) = 1e308;
  init.out(1, 0) = 1e308;
  init.embed.setConstant(1e10);
  auto cfg = small_config();
  try {
    // validate() rejects non-finite params, but these overflow in the forward pass.
    train(init, task.adversarial, task.utility, cfg);
    FAIL() << "expected NonFiniteLoss";
  } catch (const NonFiniteLoss& e) {
    EXPECT_LT(e.sample_index(), task.adversarial.size());
  }
}

TEST(ChainRule, DroGradientMatchesFiniteDifferences) {
  TrainConfig cfg;
  for (auto kind : {BaseMethod::Cat, BaseMethod::Capo}) {
    cfg.loss_kind = kind;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      EXPECT_LE(chain_rule_check(cfg, seed).max_relative_error, 1e-4);
    }
  }
}

TEST(SyntheticTask, LayoutAndHardFraction) {
  const TaskConfig tc;
  const auto task = make_heavy_tail_task(tc, 7);
  EXPECT_EQ(task.adversarial.size(), tc.num_adversarial);
  EXPECT_EQ(task.utility.size(), tc.num_utility);
  EXPECT_EQ(std::count(task.is_hard.begin(), task.is_hard.end(), true), 20);
  const ReferenceParams ref(task.init);
  for (std::size_t i = 0; i < task.adversarial.size(); ++i) {
    const double l = cat_loss(task.init, ref, task.adversarial[i], Vector::Zero(tc.embed_dim));
    // Hard samples start with the undesired response favoured.
    if (task.is_hard[i]) {
      EXPECT_GT(l, 0.0);
    } else {
      EXPECT_LT(l, 0.0);
    }
  }
}

}  // namespace
}  // namespace warden
