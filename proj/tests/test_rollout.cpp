#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bidrl/rollout.hpp"
#include "test_util.hpp"

using namespace bidrl;

namespace {

NetworkConfig small_net(int bid_levels) {
  NetworkConfig c;
  c.actor_hidden = {16};
  c.critic_hidden = {16};
  c.target_embedding_dim = 8;
  c.target_encoder_hidden = {8};
  c.bid_levels = bid_levels;
  return c;
}

AuctionParams auction(PenaltyModel model) {
  AuctionParams a;
  a.penalty_model = model;
  a.rho = 0.1;
  return a;
}

}  // namespace

TEST(Gae, LambdaZeroIsTdError) {
  const std::vector<double> r{1, 0, 2, 0, 1}, v{0.5, 0.4, 0.3, 0.2, 0.1};
  const std::vector<std::uint8_t> d(5, 0);
  const auto a = gae(r, v, d, 0.7, 0.9, 0.0);
  for (int t = 0; t < 5; ++t) {
    const double next = t + 1 < 5 ? v[t + 1] : 0.7;
    EXPECT_NEAR(a[t], r[t] + 0.9 * next - v[t], 1e-15);
  }
}

TEST(Gae, LambdaOneTelescopes) {
  const std::vector<double> r{1, -2, 0.5, 3, 1}, v{0.5, 0.4, -0.3, 0.2, 0.1};
  const std::vector<std::uint8_t> d(5, 0);
  const double g = 0.9, boot = 1.3;
  const auto a = gae(r, v, d, boot, g, 1.0);
  for (int t = 0; t < 5; ++t) {
    double expect = std::pow(g, 5 - t) * boot - v[t];
    for (int l = 0; t + l < 5; ++l) expect += std::pow(g, l) * r[t + l];
    EXPECT_NEAR(a[t], expect, 1e-12);
  }
}

TEST(Gae, HandBuiltStreamMatchesOracle) {
  const std::vector<double> r{1, 0, 2, 0, 1}, v{0.5, 0.4, 0.3, 0.2, 0.1};
  const std::vector<std::uint8_t> d(5, 0);
  const auto a = gae(r, v, d, 0.0, 0.9, 0.95);
  const auto o = testutil::gae_oracle(r, v, d, 0.0, 0.9, 0.95);
  for (int t = 0; t < 5; ++t) EXPECT_NEAR(a[t], o[t], 1e-12);
}

TEST(Gae, RandomStreamsMatchOracle) {
  Rng rng = make_stream(1);
  double worst = 0.0;
  for (double lambda : {0.0, 0.5, 0.95, 1.0}) {
    for (int c = 0; c < 100; ++c) {
      std::vector<double> r(10), v(10);
      std::vector<std::uint8_t> d(10);
      for (int t = 0; t < 10; ++t) {
        r[t] = uniform01(rng) * 10 - 5;
        v[t] = uniform01(rng) * 10 - 5;
        d[t] = uniform01(rng) < 0.15;
      }
      const double boot = uniform01(rng) * 10 - 5;
      const auto a = gae(r, v, d, boot, 0.99, lambda);
      const auto o = testutil::gae_oracle(r, v, d, boot, 0.99, lambda);
      for (int t = 0; t < 10; ++t) worst = std::max(worst, std::abs(a[t] - o[t]));
    }
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Gae, BufferStreamsAreIndependent) {
  RolloutBuffer buf;
  buf.reset(6, 2, 2, 1, 1);
  Rng rng = make_stream(2);
  for (int i = 0; i < buf.entries(); ++i) {
    buf.valid[i] = 1;
    buf.reward[i] = uniform01(rng);
    buf.value[i] = static_cast<float>(uniform01(rng));
    buf.done[i] = uniform01(rng) < 0.2;
  }
  for (int k = 0; k < 4; ++k) {
    buf.bootstrap_value[k] = static_cast<float>(uniform01(rng));
    buf.bootstrap_valid[k] = 1;
  }
  compute_gae(buf, 0.99, 0.95);
  for (int e = 0; e < 2; ++e) {
    for (int a = 0; a < 2; ++a) {
      std::vector<double> r, v;
      std::vector<std::uint8_t> d;
      for (int t = 0; t < 6; ++t) {
        const int i = buf.index(t, e, a);
        r.push_back(buf.reward[i]);
        v.push_back(buf.value[i]);
        d.push_back(buf.done[i]);
      }
      const auto o = testutil::gae_oracle(r, v, d, buf.bootstrap_value[e * 2 + a], 0.99, 0.95);
      for (int t = 0; t < 6; ++t) {
        const int i = buf.index(t, e, a);
        EXPECT_NEAR(buf.advantages[i], o[t], 1e-5);
        EXPECT_NEAR(buf.returns[i], o[t] + v[t], 1e-5);
      }
    }
  }
}

TEST(Rollout, BufferSizeCountsAgentEntries) {
  catfeeder::Config env = testutil::desk_env();
  BiddingTask task(env, auction(PenaltyModel::AllPay), 2, 1, false);
  ActorCritic<float> net(small_net(7), task.layout());
  Rng rng = make_stream(3);
  net.initialize(rng);
  RolloutBuffer buf;
  collect_rollouts(task, net, 3, buf);
  EXPECT_EQ(buf.entries(), 18);
  EXPECT_EQ(buf.valid_count(), 18);
  EXPECT_EQ(buf.block_offsets.back(), 18 * 2);
}

TEST(Rollout, ZeroPolicyIsUniform) {
  BiddingTask task(testutil::desk_env(), auction(PenaltyModel::AllPay), 8, 2, false);
  ActorCritic<float> net(small_net(7), task.layout());  // all-zero parameters
  RolloutBuffer buf;
  collect_rollouts(task, net, 250, buf);
  const int n = buf.valid_count();
  std::vector<int> actions(5, 0), bids(7, 0);
  for (int i = 0; i < buf.entries(); ++i) {
    actions[buf.action[i]] += 1;
    bids[buf.bid[i]] += 1;
    EXPECT_NEAR(buf.log_prob[i], -std::log(5.0) - std::log(7.0), 1e-5);
  }
  for (int c : actions) EXPECT_LE(std::abs(c - n / 5.0), testutil::four_sigma(n, 0.2));
  for (int c : bids) EXPECT_LE(std::abs(c - n / 7.0), testutil::four_sigma(n, 1.0 / 7));
}

TEST(Rollout, Deterministic) {
  auto run = [] {
    BiddingTask task(testutil::desk_env(), auction(PenaltyModel::WinnerPays), 4, 77, false);
    ActorCritic<float> net(small_net(7), task.layout());
    Rng rng = make_stream(4);
    net.initialize(rng);
    RolloutBuffer buf;
    collect_rollouts(task, net, 40, buf);
    return buf;
  };
  const RolloutBuffer a = run();
  const RolloutBuffer b = run();
  EXPECT_EQ(a.action, b.action);
  EXPECT_EQ(a.bid, b.bid);
  EXPECT_EQ(a.log_prob, b.log_prob);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.reward, b.reward);
  EXPECT_EQ(a.self, b.self);
  EXPECT_EQ(a.blocks, b.blocks);
  EXPECT_EQ(a.done, b.done);
}

TEST(Rollout, WorkerCountDoesNotChangeStepping) {
  auto run = [](int workers) {
    BiddingTask task(testutil::desk_env(), auction(PenaltyModel::AllPay), 6, 5, false, workers);
    ActorCritic<float> net(small_net(7), task.layout());
    Rng rng = make_stream(5);
    net.initialize(rng);
    RolloutBuffer buf;
    collect_rollouts(task, net, 30, buf);
    return buf.reward;
  };
  EXPECT_EQ(run(1), run(3));
}

TEST(Rollout, PenaltiesReconcileWithAuctions) {
  for (PenaltyModel model : {PenaltyModel::WinnerPays, PenaltyModel::AllPay}) {
    BiddingTask task(testutil::desk_env(), auction(model), 4, 6, false);
    ActorCritic<float> net(small_net(7), task.layout());
    Rng rng = make_stream(6);
    net.initialize(rng);
    RolloutBuffer buf;
    collect_rollouts(task, net, 100, buf);
    double recorded = 0.0;
    long long paid = 0;
    for (int t = 0; t < buf.steps; ++t) {
      for (int e = 0; e < buf.envs; ++e) {
        const bool auction = buf.auction_held[t * buf.envs + e];
        const int winner = buf.executed_agent[t * buf.envs + e];
        for (int a = 0; a < buf.agents; ++a) {
          const int i = buf.index(t, e, a);
          recorded += buf.penalty[i];
          if (auction && buf.valid[i] && (model == PenaltyModel::AllPay || a == winner)) paid += buf.bid[i];
        }
      }
    }
    EXPECT_GT(paid, 0);
    EXPECT_NEAR(recorded, 0.1 * paid, 1e-9);
  }
}

TEST(Rollout, ScalarizedTaskSumsRewards) {
  catfeeder::Config env = testutil::desk_env();
  ScalarizedTask task(env, TrainMode::SingleSparse, 3, 7);
  ActorCritic<float> net(small_net(1), task.layout());
  RolloutBuffer buf;
  collect_rollouts(task, net, 500, buf);
  EXPECT_EQ(buf.entries(), 1500);
  for (int i = 0; i < buf.entries(); ++i) {
    EXPECT_EQ(buf.bid[i], 0);
    EXPECT_EQ(std::fmod(buf.reward[i], 50.0), 0.0);  // sparse: multiples of the feed/expiry magnitude
  }
}
