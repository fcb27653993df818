#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "bidrl/checkpoint.hpp"
#include "bidrl/eval.hpp"
#include "test_util.hpp"

using namespace bidrl;

namespace {

Checkpoint sample(bool pooling = true) {
  NetworkConfig c;
  c.actor_hidden = {8, 8};
  c.critic_hidden = {8};
  c.target_embedding_dim = 4;
  c.target_encoder_hidden = {8};
  c.use_attention_pooling = pooling;
  ActorCritic<float> net(c, {6, 4, pooling ? 0 : 2});
  Rng rng = make_stream(1);
  net.initialize(rng);
  net.params()(0) = 1.0f / 3.0f;
  return Checkpoint::from_model(net, Json{{"mode", "bidding"}, {"seed", 1825}});
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  testutil::TempDir dir("ckpt");
  const Checkpoint c = sample();
  save_checkpoint(c, dir.path / "ckpt");
  const Checkpoint d = load_checkpoint(dir.path / "ckpt");
  EXPECT_EQ(d.network, c.network);
  EXPECT_EQ(d.layout, c.layout);
  EXPECT_EQ(d.metadata, c.metadata);
  ASSERT_EQ(d.params.size(), c.params.size());
  EXPECT_EQ(std::memcmp(d.params.data(), c.params.data(), c.params.size() * sizeof(float)), 0);
  EXPECT_EQ(serialize(d), serialize(c));
  const ActorCritic<float> net = d.model();
  EXPECT_EQ(net.params()(0), 1.0f / 3.0f);
}

TEST(Checkpoint, RejectsCorruption) {
  const std::string bytes = serialize(sample());
  std::string flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x10;
  EXPECT_THROW(deserialize(flipped), CheckpointError);
  EXPECT_THROW(deserialize(bytes.substr(0, bytes.size() - 3)), CheckpointError);
  EXPECT_THROW(deserialize(bytes + "x"), CheckpointError);
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(deserialize(magic), CheckpointError);
  std::string version = bytes;
  version[8] = 9;
  EXPECT_THROW(deserialize(version), CheckpointError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt"), CheckpointError);
}

TEST(Checkpoint, LayoutChecks) {
  const Checkpoint pooled = sample(true);
  EXPECT_NO_THROW(check_compatible(pooled, {6, 4, 7}, pooled.network.bid_levels));
  EXPECT_THROW(check_compatible(pooled, {2, 4, 3}, pooled.network.bid_levels), LayoutMismatch);
  EXPECT_THROW(check_compatible(pooled, {6, 4, 2}, 3), LayoutMismatch);
  const Checkpoint fixed = sample(false);
  EXPECT_NO_THROW(check_compatible(fixed, {6, 4, 2}, fixed.network.bid_levels));
  EXPECT_THROW(check_compatible(fixed, {6, 4, 3}, fixed.network.bid_levels), LayoutMismatch);
  Checkpoint short_params = pooled;
  short_params.params.pop_back();
  EXPECT_THROW(short_params.model(), LayoutMismatch);
}
