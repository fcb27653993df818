#include <gtest/gtest.h>

#include <cmath>

#include "bidrl/trainer.hpp"
#include "test_util.hpp"

using namespace bidrl;

namespace {

TrainSetup tiny_setup(TrainMode mode = TrainMode::MultiAgentBidding) {
  TrainSetup s;
  s.env = testutil::desk_env();
  s.env.max_episode_steps = 100;
  s.network.actor_hidden = {16};
  s.network.critic_hidden = {16};
  s.network.target_embedding_dim = 8;
  s.network.target_encoder_hidden = {8};
  s.train = is_single(mode) ? TrainConfig::single_defaults(mode) : TrainConfig::bidding_defaults();
  if (is_single(mode)) s.network.use_attention_pooling = false;
  s.train.iterations = 3;
  s.train.num_envs = 4;
  s.train.steps_per_rollout = 16;
  s.train.num_minibatches = 2;
  s.train.ppo_epochs = 2;
  s.train.eval_interval = 2;
  s.train.eval_episodes = 2;
  return s;
}

}  // namespace

TEST(Trainer, FullScaleDefaults) {
  const TrainConfig b = TrainConfig::bidding_defaults();
  EXPECT_EQ(b.iterations, 400);
  EXPECT_EQ(b.num_envs, 4096);
  EXPECT_EQ(b.steps_per_rollout, 256);
  EXPECT_EQ(b.num_minibatches, 256);
  EXPECT_EQ(b.ppo_epochs, 4);
  EXPECT_EQ(b.learning_rate, 2.5e-4);
  EXPECT_TRUE(b.anneal_lr);
  EXPECT_EQ(b.gamma, 0.99);
  EXPECT_EQ(b.gae_lambda, 0.95);
  EXPECT_EQ(b.clip_coef, 0.05);
  EXPECT_EQ(b.entropy_coef, 0.03);
  EXPECT_EQ(b.value_coef, 1.0);
  EXPECT_EQ(b.max_grad_norm, 0.5);
  EXPECT_EQ(b.seeds, kDefaultSeeds);
  const TrainConfig s = TrainConfig::single_defaults(TrainMode::SingleSparse);
  EXPECT_EQ(s.ppo_epochs, 8);
  EXPECT_EQ(s.num_minibatches, 512);
  EXPECT_EQ(s.clip_coef, 0.327);
  EXPECT_EQ(s.learning_rate, 1.74e-4);
}

TEST(Trainer, AnnealSchedule) {
  for (int i = 0; i <= 150; ++i) {
    EXPECT_NEAR(annealed_lr(2e-3, i, 150, true), 2e-3 * (1.0 - i / 150.0), 1e-12);
    EXPECT_EQ(annealed_lr(2e-3, i, 150, false), 2e-3);
  }
}

TEST(Trainer, ZeroIterationsReturnsFreshNetwork) {
  TrainSetup s = tiny_setup();
  s.train.iterations = 0;
  const TrainResult r = train(s, 11);
  EXPECT_TRUE(r.curve.empty());
  EXPECT_EQ(r.env_steps, 0);
  s.resolve();
  ActorCritic<float> fresh(s.network, {catfeeder::kSelfDim, catfeeder::kBlockDim, 2});
  Rng rng = make_stream(11, 0xC0FFEE);
  fresh.initialize(rng);
  ASSERT_EQ(r.checkpoint.params.size(), fresh.parameter_count());
  for (std::size_t i = 0; i < r.checkpoint.params.size(); ++i) ASSERT_EQ(r.checkpoint.params[i], fresh.params()(i));
  EXPECT_EQ(r.checkpoint.metadata.at("iteration"), 0);
}

TEST(Trainer, CurveCadenceAndBudget) {
  const TrainResult r = train(tiny_setup(), 12);
  ASSERT_EQ(r.curve.size(), 3u);  // 0, 2, 3
  EXPECT_EQ(r.curve[0].iteration, 0);
  EXPECT_EQ(r.curve[1].iteration, 2);
  EXPECT_EQ(r.curve[2].iteration, 3);
  EXPECT_EQ(r.curve[2].env_steps, 3 * 4 * 16);
  EXPECT_EQ(r.env_steps, 3 * 4 * 16);
  EXPECT_EQ(r.iterations_done, 3);
  EXPECT_EQ(r.checkpoint.network.bid_levels, 7);
  EXPECT_EQ(r.checkpoint.metadata.at("mode"), "bidding");
}

TEST(Trainer, Reproducible) {
  const TrainResult a = train(tiny_setup(), 13);
  const TrainResult b = train(tiny_setup(), 13);
  ASSERT_EQ(a.curve.size(), b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_EQ(a.curve[i].mean_score, b.curve[i].mean_score);
    EXPECT_EQ(a.curve[i].policy_loss, b.curve[i].policy_loss);
    EXPECT_EQ(a.curve[i].value_loss, b.curve[i].value_loss);
    EXPECT_EQ(a.curve[i].approx_kl, b.curve[i].approx_kl);
  }
  EXPECT_EQ(a.checkpoint.params, b.checkpoint.params);
  const TrainResult c = train(tiny_setup(), 14);
  EXPECT_NE(a.checkpoint.params, c.checkpoint.params);
}

TEST(Trainer, SingleBaselineHasOneBidLevel) {
  const TrainResult r = train_single_baseline(tiny_setup(TrainMode::SingleExpiryShaping), 15);
  EXPECT_EQ(r.checkpoint.network.bid_levels, 1);
  EXPECT_FALSE(r.checkpoint.network.use_attention_pooling);
  EXPECT_EQ(r.checkpoint.layout.fixed_blocks, 3);
  EXPECT_EQ(r.checkpoint.metadata.at("mode"), "single-es");
  EXPECT_THROW(train(tiny_setup(TrainMode::SingleSparse), 1), InvalidParameter);
  EXPECT_THROW(train_single_baseline(tiny_setup(), 1), InvalidParameter);
}

TEST(Trainer, HooksAndStop) {
  TrainSetup s = tiny_setup();
  s.train.checkpoint_interval = 1;
  int checkpoints = 0;
  int iterations = 0;
  TrainHooks hooks;
  hooks.on_checkpoint = [&](const Checkpoint&, int) { ++checkpoints; };
  hooks.on_iteration = [&](int, const UpdateStats&) { ++iterations; };
  hooks.should_stop = [&] { return iterations >= 2; };
  const TrainResult r = train(s, 16, hooks);
  EXPECT_TRUE(r.interrupted);
  EXPECT_EQ(r.iterations_done, 2);
  EXPECT_EQ(checkpoints, 2);
}

TEST(Trainer, Validation) {
  TrainSetup s = tiny_setup();
  s.train.num_envs = 0;
  EXPECT_THROW(train(s, 1), InvalidParameter);
  s = tiny_setup();
  s.train.gamma = 1.0;
  EXPECT_THROW(train(s, 1), InvalidParameter);
  s = tiny_setup();
  s.train.seeds.clear();
  EXPECT_THROW(train(s, 1), InvalidParameter);
}
