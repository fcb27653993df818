#include <gtest/gtest.h>

#include <numeric>
#include <string>

#include "bidrl/experiments.hpp"
#include "bidrl/render.hpp"
#include "test_util.hpp"

using namespace bidrl;

namespace {

NetworkConfig small_net(bool pooling = true) {
  NetworkConfig n;
  n.actor_hidden = {16};
  n.critic_hidden = {16};
  n.target_embedding_dim = 8;
  n.target_encoder_hidden = {8};
  n.use_attention_pooling = pooling;
  return n;
}

// Randomly initialised checkpoint; metadata as the trainer writes it.
Checkpoint random_checkpoint(const catfeeder::Config& env, const AuctionParams& auction, TrainMode mode,
                             std::uint64_t seed, long long env_steps = 0, bool pooling = true) {
  TrainSetup setup;
  setup.env = env;
  setup.auction = auction;
  setup.network = small_net(pooling && !is_single(mode));
  setup.train.mode = mode;
  setup.resolve();
  ActorCritic<float> net(setup.network, layout_for(env, mode));
  Rng rng = make_stream(seed, 0xC0FFEE);
  net.initialize(rng);
  return Checkpoint::from_model(net, checkpoint_metadata(setup, seed, 0, env_steps));
}

catfeeder::Config short_env() {
  catfeeder::Config env = testutil::desk_env();
  env.max_episode_steps = 200;
  return env;
}

}  // namespace

TEST(Eval, ScoreIsFedMinusExpiredAlongTheTrace) {
  const catfeeder::Config env = short_env();
  const AuctionParams auction;
  const Checkpoint ckpt = random_checkpoint(env, auction, TrainMode::MultiAgentBidding, 3);
  const auto trace = rollout_episode(ckpt, env, auction, TrainMode::MultiAgentBidding, 1825);
  ASSERT_EQ(static_cast<int>(trace.size()), env.max_episode_steps);
  int fed = 0, expired = 0;
  for (const TraceStep& t : trace) {
    fed += t.fed;
    expired += t.expired;
    EXPECT_EQ(t.score, fed - expired);
  }
  EvalSetup setup{env, auction, TrainMode::MultiAgentBidding, 1, {1825}};
  const EvalReport report = evaluate(ckpt, setup);
  ASSERT_EQ(report.scores.size(), 1u);
  EXPECT_EQ(report.scores[0], fed - expired);
}

TEST(Eval, UniformRandomPolicyScoresBelowZero) {
  const catfeeder::CatFeeder game(testutil::desk_env());
  Rng rng = make_stream(77, 0);
  double total = 0.0;
  const int episodes = 100;
  for (int ep = 0; ep < episodes; ++ep) {
    catfeeder::State s = game.reset(rng);
    int score = 0;
    while (true) {
      const Transition tr = game.step(s, uniform_int(rng, 0, catfeeder::kActionCount - 1), rng);
      for (std::uint8_t e : tr.events) score += ((e & kCompleted) ? 1 : 0) - ((e & kFailed) ? 1 : 0);
      if (tr.terminal) break;
    }
    total += score;
  }
  EXPECT_LT(total / episodes, 0.0);
}

TEST(Eval, HistogramsConserveTimesteps) {
  const catfeeder::Config env = short_env();
  AuctionParams auction;
  auction.beta = 4;
  const Checkpoint ckpt = random_checkpoint(env, auction, TrainMode::MultiAgentBidding, 5);
  EvalSetup setup{env, auction, TrainMode::MultiAgentBidding, 3, {1825, 410}};
  const EvalReport r = evaluate(ckpt, setup);
  EXPECT_EQ(r.scores.size(), 6u);
  EXPECT_EQ(r.seed_means.size(), 2u);
  EXPECT_EQ(r.timesteps, 6LL * env.max_episode_steps);
  EXPECT_EQ(std::accumulate(r.control_histogram.begin(), r.control_histogram.end(), 0LL), r.timesteps);
  ASSERT_EQ(r.bid_histogram.size(), 3u);
  for (const auto& agent : r.bid_histogram) {
    ASSERT_EQ(agent.size(), 5u);
    // Every slot stays live with respawn on, so every slot bids at every auction.
    EXPECT_EQ(std::accumulate(agent.begin(), agent.end(), 0LL), r.auctions);
  }
  EXPECT_GE(r.auctions, 6LL * env.max_episode_steps / auction.tau);
  EXPECT_LE(r.forced_auctions, r.auctions);
  double mean = 0.0;
  for (int s : r.scores) mean += s;
  EXPECT_DOUBLE_EQ(r.mean, mean / 6.0);
}

TEST(Eval, GreedyEvaluationIsDeterministic) {
  const catfeeder::Config env = short_env();
  const AuctionParams auction;
  const Checkpoint ckpt = random_checkpoint(env, auction, TrainMode::MultiAgentBidding, 9);
  EvalSetup setup{env, auction, TrainMode::MultiAgentBidding, 4, {1825, 410}};
  setup.log_auctions = true;
  const EvalReport a = evaluate(ckpt, setup);
  const EvalReport b = evaluate(ckpt, setup);
  setup.workers = 3;
  const EvalReport c = evaluate(ckpt, setup);
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_EQ(a.scores, c.scores);
  EXPECT_EQ(a.control_histogram, c.control_histogram);
  EXPECT_EQ(a.bid_histogram, c.bid_histogram);
  EXPECT_EQ(auctions_jsonl(a), auctions_jsonl(c));
}

TEST(Eval, SingleBidLevelSplitsControlUniformly) {
  // With one bid level every auction is a full tie.
  catfeeder::Config env = testutil::desk_env();
  env.max_episode_steps = 1000;
  AuctionParams auction;
  auction.beta = 0;
  const Checkpoint ckpt = random_checkpoint(env, auction, TrainMode::MultiAgentBidding, 21);
  EvalSetup setup{env, auction, TrainMode::MultiAgentBidding, 8, {1825, 410}};
  setup.log_auctions = true;
  const EvalReport r = evaluate(ckpt, setup);
  ASSERT_EQ(static_cast<long long>(r.auction_log.size()), r.auctions);
  std::vector<long long> wins(3, 0);
  for (const AuctionLogRecord& rec : r.auction_log) {
    for (int b : rec.bids) EXPECT_EQ(b, 0);
    wins[rec.winner] += 1;
  }
  const double n = static_cast<double>(r.auctions);
  for (long long w : wins) EXPECT_LE(std::abs(w - n / 3.0), testutil::four_sigma(n, 1.0 / 3.0));
}

TEST(Eval, ScalingRunsAndMatchesEvaluateAtTrainingCount) {
  const catfeeder::Config env = short_env();
  const AuctionParams auction;
  const Checkpoint ckpt = random_checkpoint(env, auction, TrainMode::MultiAgentBidding, 4);
  EvalSetup base{env, auction, TrainMode::MultiAgentBidding, 2, {1825, 410}};
  const std::vector<int> counts{3, 4, 5, 6};
  const SweepResult sweep = scaling_experiment(ckpt, base, counts);
  EXPECT_EQ(sweep.param, "targets");
  ASSERT_EQ(sweep.points.size(), counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const SweepPoint& p = sweep.points[i];
    EXPECT_EQ(p.value, counts[i]);
    ASSERT_EQ(p.reports.size(), 2u);
    EXPECT_EQ(p.reports[0].control_histogram.size(), static_cast<std::size_t>(counts[i]));
  }
  const EvalReport direct = evaluate(ckpt, base);
  std::vector<int> swept;
  for (const EvalReport& r : sweep.points[0].reports) swept.insert(swept.end(), r.scores.begin(), r.scores.end());
  EXPECT_EQ(swept, direct.scores);
  EXPECT_NEAR(sweep.points[0].mean(), direct.mean, 1e-12);
}

TEST(Eval, ScalingErrors) {
  const catfeeder::Config env = short_env();
  const AuctionParams auction;
  const Checkpoint fixed = random_checkpoint(env, auction, TrainMode::MultiAgentBidding, 4, 0, false);
  EvalSetup base{env, auction, TrainMode::MultiAgentBidding, 1, {1825}};
  const std::vector<int> same{3};
  const std::vector<int> more{3, 4};
  EXPECT_NO_THROW(scaling_experiment(fixed, base, same));
  EXPECT_THROW(scaling_experiment(fixed, base, more), LayoutMismatch);

  const Checkpoint pooled = random_checkpoint(env, auction, TrainMode::MultiAgentBidding, 4);
  base.env.grid_size = 2;
  const std::vector<int> crowded{4};
  EXPECT_THROW(scaling_experiment(pooled, base, crowded), CapacityError);
}

TEST(Eval, IncompatibleCheckpointRejected) {
  const catfeeder::Config env = short_env();
  AuctionParams auction;
  const Checkpoint ckpt = random_checkpoint(env, auction, TrainMode::MultiAgentBidding, 4);
  auction.beta = 3;
  EXPECT_THROW(evaluate(ckpt, EvalSetup{env, auction, TrainMode::MultiAgentBidding, 1, {1}}), LayoutMismatch);
  EXPECT_THROW(evaluate(ckpt, EvalSetup{env, AuctionParams{}, TrainMode::SingleSparse, 1, {1}}), LayoutMismatch);
}

TEST(Eval, CompareBaselines) {
  const catfeeder::Config env = short_env();
  std::vector<MethodRuns> runs;
  for (const Method& m : all_methods()) {
    AuctionParams a;
    a.penalty_model = m.penalty;
    runs.push_back({m.name, {random_checkpoint(env, a, m.mode, 1825, 1000), random_checkpoint(env, a, m.mode, 410, 1000)}});
  }
  const auto rows = compare_baselines(runs, env, 2);
  ASSERT_EQ(rows.size(), 5u);
  for (const CompareRow& r : rows) {
    EXPECT_EQ(r.env_steps, 1000);
    EXPECT_EQ(r.seeds, (std::vector<std::uint64_t>{1825, 410}));
    EXPECT_NEAR(r.mean, (r.seed_means[0] + r.seed_means[1]) / 2.0, 1e-12);
  }
  const csv::Table t = csv::parse(compare_csv(rows));
  EXPECT_EQ(t.rows.size(), 5u);
  EXPECT_EQ(t.rows[0][t.column("method")], "AllPay");

  std::vector<MethodRuns> partial(runs.begin(), runs.begin() + 2);
  try {
    compare_baselines(partial, env, 1);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("SingleSparse"), std::string::npos);
  }

  runs[3].checkpoints[1].metadata["env_steps"] = 999;
  EXPECT_THROW(compare_baselines(runs, env, 1), InvalidParameter);
}

TEST(Eval, CsvWritersParseStrictly) {
  const catfeeder::Config env = short_env();
  const AuctionParams auction;
  const Checkpoint ckpt = random_checkpoint(env, auction, TrainMode::MultiAgentBidding, 4);
  EvalSetup setup{env, auction, TrainMode::MultiAgentBidding, 2, {1825, 410}};
  setup.log_auctions = true;
  const EvalReport r = evaluate(ckpt, setup);

  const csv::Table scores = csv::parse(scores_csv(r));
  EXPECT_EQ(scores.rows.size(), 4u);
  EXPECT_EQ(scores.rows[2][scores.column("seed")], "410");
  EXPECT_EQ(csv::parse(summary_csv(r)).rows.size(), 1u);
  EXPECT_EQ(csv::parse(control_csv(r)).rows.size(), 3u);
  EXPECT_EQ(csv::parse(bids_csv(r)).rows.size(), 3u * 7u);

  std::size_t lines = 0;
  const std::string jsonl = auctions_jsonl(r);
  std::istringstream in(jsonl);
  for (std::string line; std::getline(in, line); ++lines) {
    const Json j = Json::parse(line);
    EXPECT_EQ(j.at("bids").size(), 3u);
  }
  EXPECT_EQ(static_cast<long long>(lines), r.auctions);

  const std::vector<int> counts{3, 4};
  const csv::Table sweep = csv::parse(sweep_csv(scaling_experiment(ckpt, setup, counts)));
  EXPECT_EQ(sweep.rows.size(), 4u);

  std::vector<CurveRecord> curve(3);
  curve[1].iteration = 5;
  const csv::Table c = csv::parse(curve_csv(curve));
  EXPECT_EQ(c.rows.size(), 3u);
  EXPECT_EQ(c.rows[1][c.column("iteration")], "5");

  EXPECT_THROW(csv::parse("a,b\n1\n"), Error);
  EXPECT_THROW(csv::parse("a,b\n1,2"), Error);
  EXPECT_THROW(csv::parse("a,b\n\n1,2\n"), Error);
}

TEST(Eval, AblationParamNames) {
  EXPECT_EQ(ablation_param_from_string("bid_penalty"), AblationParam::BidPenalty);
  try {
    ablation_param_from_string("gamma");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const char* p : {"bid_upper_bound", "bid_penalty", "action_window", "targets"}) {
      EXPECT_NE(msg.find(p), std::string::npos) << p;
    }
  }
  AuctionParams a;
  apply_ablation(a, AblationParam::BidUpperBound, 0);
  EXPECT_EQ(a.beta, 0);
  EXPECT_THROW(apply_ablation(a, AblationParam::ActionWindow, 2.5), InvalidParameter);
  EXPECT_THROW(apply_ablation(a, AblationParam::BidPenalty, 1.0), InvalidParameter);
}
