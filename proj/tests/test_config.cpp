#include <gtest/gtest.h>

#include <fstream>
#include <string>

#include "bidrl/config.hpp"

using namespace bidrl;

namespace {

std::string config_error(const ConfigRequest& req) {
  try {
    resolve_config(req);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, DefaultProfileIsFullScale) {
  const RunConfig rc = resolve_config({});
  EXPECT_EQ(rc.profile, "paper");
  EXPECT_EQ(rc.method().name, "AllPay");
  EXPECT_EQ(rc.env.grid_size, 30);
  EXPECT_EQ(rc.env.num_targets, 8);
  EXPECT_EQ(rc.env.expiry_steps, 200);
  EXPECT_EQ(rc.env.max_episode_steps, 2000);
  EXPECT_DOUBLE_EQ(rc.env.target_reward, 50.0);
  EXPECT_DOUBLE_EQ(rc.env.expiry_penalty, 50.0);
  EXPECT_EQ(rc.auction.tau, 5);
  EXPECT_EQ(rc.auction.beta, 6);
  EXPECT_DOUBLE_EQ(rc.auction.rho, 0.1);
  EXPECT_EQ(rc.network.bid_levels, 7);
  EXPECT_EQ(rc.network.action_count, catfeeder::kActionCount);
  EXPECT_TRUE(rc.network.use_attention_pooling);
  const TrainConfig b = TrainConfig::bidding_defaults();
  EXPECT_EQ(rc.train.iterations, b.iterations);
  EXPECT_EQ(rc.train.num_envs, b.num_envs);
  EXPECT_EQ(rc.train.num_minibatches, b.num_minibatches);
  EXPECT_DOUBLE_EQ(rc.train.learning_rate, b.learning_rate);
  EXPECT_EQ(rc.train.seeds, kDefaultSeeds);
}

TEST(Config, SingleModesUseBaselineDefaults) {
  for (const char* mode : {"single-sparse", "single-ns", "single-es"}) {
    ConfigRequest req;
    req.mode = mode;
    const RunConfig rc = resolve_config(req);
    EXPECT_TRUE(is_single(rc.train.mode)) << mode;
    EXPECT_EQ(rc.network.bid_levels, 1) << mode;
    EXPECT_FALSE(rc.network.use_attention_pooling) << mode;
  }
  ConfigRequest sparse;
  sparse.mode = "single-sparse";
  EXPECT_DOUBLE_EQ(resolve_config(sparse).env.distance_reward_scale, 0.0);
}

TEST(Config, DeskProfile) {
  ConfigRequest req;
  req.profile = "desk";
  const RunConfig rc = resolve_config(req);
  EXPECT_EQ(rc.env.grid_size, 10);
  EXPECT_EQ(rc.env.num_targets, 3);
  EXPECT_EQ(rc.env.expiry_steps, 60);
  EXPECT_EQ(rc.train.iterations, 150);
  EXPECT_EQ(rc.train.num_envs, 64);
  EXPECT_EQ(rc.train.steps_per_rollout, 128);
  EXPECT_EQ(rc.train.num_minibatches, 32);
  EXPECT_EQ(rc.train.seeds.size(), 3u);
  EXPECT_DOUBLE_EQ(rc.train.learning_rate, TrainConfig::bidding_defaults().learning_rate * 8.0);
  req.mode = "single-es";
  EXPECT_EQ(resolve_config(req).train.num_minibatches, 64);
}

TEST(Config, UnknownKeysRejectedWithPath) {
  ConfigRequest req;
  req.file = Json{{"train", Json{{"iterations", 3}, {"bogus", 1}}}};
  EXPECT_NE(config_error(req).find("train.bogus"), std::string::npos);

  req.file = Json{{"env", Json{{"grid", 10}}}};
  EXPECT_NE(config_error(req).find("env.grid"), std::string::npos);

  req.file = Json{{"extra", 1}};
  EXPECT_NE(config_error(req).find("config.extra"), std::string::npos);

  req.file = Json{{"env", Json{{"grid_size", "ten"}}}};
  EXPECT_NE(config_error(req).find("env.grid_size"), std::string::npos);
}

TEST(Config, OverrideChangesExactlyOneKey) {
  const RunConfig base = resolve_config({});
  ConfigRequest req;
  req.overrides = {"auction.bid_upper_bound=3"};
  const RunConfig rc = resolve_config(req);
  EXPECT_EQ(rc.auction.beta, 3);
  EXPECT_EQ(rc.network.bid_levels, 4);

  Json a = to_json(base);
  Json b = to_json(rc);
  a["auction"].erase("bid_upper_bound");
  b["auction"].erase("bid_upper_bound");
  EXPECT_EQ(a, b);
}

TEST(Config, OverrideErrors) {
  ConfigRequest req;
  req.overrides = {"train.bogus=1"};
  EXPECT_NE(config_error(req).find("train.bogus"), std::string::npos);
  req.overrides = {"train=1"};
  EXPECT_FALSE(config_error(req).empty());
  req.overrides = {"no-equals-sign"};
  EXPECT_FALSE(config_error(req).empty());
  req.overrides = {"auction.bid_penalty=1.5"};
  EXPECT_NE(config_error(req).find("rho"), std::string::npos);
  req.overrides = {"profile=desk"};
  EXPECT_FALSE(config_error(req).empty());
}

TEST(Config, OverrideParsesStringsAndArrays) {
  ConfigRequest req;
  req.overrides = {"run_name=probe", "network.actor_hidden=[8,8]", "auction.penalty_model=WinnerPays"};
  const RunConfig rc = resolve_config(req);
  EXPECT_EQ(rc.run_name, "probe");
  EXPECT_EQ(rc.network.actor_hidden, (std::vector<int>{8, 8}));
  EXPECT_EQ(rc.method().name, "WinnerPays");
}

TEST(Config, LockRoundTrip) {
  for (const char* profile : {"paper", "desk"}) {
    for (const Method& m : all_methods()) {
      const RunConfig rc = profile_defaults(profile, m);
      const std::string text = config_lock_text(rc);
      ConfigRequest req;
      req.file = Json::parse(text);
      const RunConfig back = resolve_config(req);
      EXPECT_EQ(config_lock_text(back), text) << profile << " " << m.name;
      EXPECT_EQ(back.method().name, m.name);
    }
  }
}

TEST(Config, BidLevelsMustMatchAuction) {
  RunConfig rc;
  Json doc = to_json(resolve_config({}));
  doc["network"]["bid_levels"] = 5;
  EXPECT_THROW(from_json(doc, rc), ConfigError);
  doc["network"]["bid_levels"] = 7;
  EXPECT_NO_THROW(from_json(doc, rc));
}

TEST(Config, UnknownProfileAndMode) {
  ConfigRequest req;
  req.profile = "laptop";
  EXPECT_NE(config_error(req).find("laptop"), std::string::npos);
  EXPECT_THROW(method_from_string("both-pay"), ConfigError);
  EXPECT_EQ(method_from_string("winner-pays").name, "WinnerPays");
  EXPECT_EQ(method_from_string("SingleNS").mode, TrainMode::SingleNearestShaping);
}

TEST(Config, FileLayersUnderMode) {
  ConfigRequest req;
  req.profile = "desk";
  req.file = Json{{"train", Json{{"iterations", 7}}}};
  req.mode = "winner-pays";
  const RunConfig rc = resolve_config(req);
  EXPECT_EQ(rc.train.iterations, 7);
  EXPECT_EQ(rc.auction.penalty_model, PenaltyModel::WinnerPays);
  EXPECT_EQ(rc.env.grid_size, 10);
}

TEST(Config, ShippedConfigsMatchProfiles) {
  for (const char* profile : {"desk", "paper"}) {
    std::ifstream f(std::string(BIDRL_SOURCE_DIR) + "/configs/" + profile + ".json");
    ASSERT_TRUE(f) << profile;
    ConfigRequest req;
    req.file = Json::parse(f);
    RunConfig expected = profile_defaults(profile, method_from_string("all-pay"));
    expected.output_dir = "runs";
    EXPECT_EQ(config_lock_text(resolve_config(req)), config_lock_text(expected)) << profile;
  }
}
