#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "bidrl/auction.hpp"
#include "bidrl/catfeeder.hpp"
#include "bidrl/errors.hpp"
#include "bidrl/network.hpp"
#include "bidrl/observation.hpp"

namespace bidrl {

using Json = nlohmann::ordered_json;

// Reads known keys out of one JSON object and rejects anything else. Every
// diagnostic carries the full key path.
class StrictReader {
 public:
  StrictReader(const Json& object, std::string path) : obj_(object), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  void read(const char* key, int& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "expected an integer");
      out = v->get<int>();
    }
  }
  void read(const char* key, long long& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "expected an integer");
      out = v->get<long long>();
    }
  }
  void read(const char* key, double& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }
  void read(const char* key, bool& out) {
    if (const Json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }
  void read(const char* key, std::string& out) {
    if (const Json* v = find(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }
  void read(const char* key, std::vector<int>& out) {
    if (const Json* v = find(key)) {
      if (!v->is_array()) fail(key, "expected an array of integers");
      out.clear();
      for (const Json& e : *v) {
        if (!e.is_number_integer()) fail(key, "expected an array of integers");
        out.push_back(e.get<int>());
      }
    }
  }
  void read(const char* key, std::vector<std::uint64_t>& out) {
    if (const Json* v = find(key)) {
      if (!v->is_array()) fail(key, "expected an array of non-negative integers");
      out.clear();
      for (const Json& e : *v) {
        if (!e.is_number_unsigned()) fail(key, "expected an array of non-negative integers");
        out.push_back(e.get<std::uint64_t>());
      }
    }
  }
  const Json* child(const char* key) { return find(key); }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!known_.count(it.key())) throw ConfigError("unknown key '" + path_ + "." + it.key() + "'");
    }
  }

  [[noreturn]] void fail(const char* key, const std::string& what) const {
    throw ConfigError(path_ + "." + key + ": " + what);
  }

 private:
  const Json* find(const char* key) {
    known_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  const Json& obj_;
  std::string path_;
  std::set<std::string> known_;
};

inline Json to_json(const catfeeder::Config& c) {
  return Json{{"grid_size", c.grid_size},
              {"num_targets", c.num_targets},
              {"target_reward", c.target_reward},
              {"expiry_steps", c.expiry_steps},
              {"expiry_penalty", c.expiry_penalty},
              {"max_episode_steps", c.max_episode_steps},
              {"moving_targets", c.moving_targets},
              {"direction_change_prob", c.direction_change_prob},
              {"target_move_interval", c.target_move_interval},
              {"distance_reward_scale", c.distance_reward_scale},
              {"respawn", c.respawn},
              {"local_obs", c.local_obs}};
}

inline void from_json(const Json& j, catfeeder::Config& c, const std::string& path = "env") {
  StrictReader r(j, path);
  r.read("grid_size", c.grid_size);
  r.read("num_targets", c.num_targets);
  r.read("target_reward", c.target_reward);
  r.read("expiry_steps", c.expiry_steps);
  r.read("expiry_penalty", c.expiry_penalty);
  r.read("max_episode_steps", c.max_episode_steps);
  r.read("moving_targets", c.moving_targets);
  r.read("direction_change_prob", c.direction_change_prob);
  r.read("target_move_interval", c.target_move_interval);
  r.read("distance_reward_scale", c.distance_reward_scale);
  r.read("respawn", c.respawn);
  r.read("local_obs", c.local_obs);
  r.finish();
}

inline Json to_json(const AuctionParams& a) {
  return Json{{"action_window", a.tau},
              {"bid_upper_bound", a.beta},
              {"bid_penalty", a.rho},
              {"penalty_model", std::string(to_string(a.penalty_model))}};
}

inline void from_json(const Json& j, AuctionParams& a, const std::string& path = "auction") {
  StrictReader r(j, path);
  r.read("action_window", a.tau);
  r.read("bid_upper_bound", a.beta);
  r.read("bid_penalty", a.rho);
  std::string model(to_string(a.penalty_model));
  r.read("penalty_model", model);
  try {
    a.penalty_model = penalty_model_from_string(model);
  } catch (const ConfigError& e) {
    r.fail("penalty_model", e.what());
  }
  r.finish();
}

inline Json to_json(const NetworkConfig& n) {
  return Json{{"actor_hidden", n.actor_hidden},
              {"critic_hidden", n.critic_hidden},
              {"target_embedding_dim", n.target_embedding_dim},
              {"target_encoder_hidden", n.target_encoder_hidden},
              {"use_attention_pooling", n.use_attention_pooling},
              {"bid_levels", n.bid_levels},
              {"action_count", n.action_count}};
}

inline void from_json(const Json& j, NetworkConfig& n, const std::string& path = "network") {
  StrictReader r(j, path);
  r.read("actor_hidden", n.actor_hidden);
  r.read("critic_hidden", n.critic_hidden);
  r.read("target_embedding_dim", n.target_embedding_dim);
  r.read("target_encoder_hidden", n.target_encoder_hidden);
  r.read("use_attention_pooling", n.use_attention_pooling);
  r.read("bid_levels", n.bid_levels);
  r.read("action_count", n.action_count);
  r.finish();
}

inline Json to_json(const ObservationLayout& l) {
  return Json{{"self_dim", l.self_dim}, {"block_dim", l.block_dim}, {"fixed_blocks", l.fixed_blocks}};
}

inline void from_json(const Json& j, ObservationLayout& l, const std::string& path = "layout") {
  StrictReader r(j, path);
  r.read("self_dim", l.self_dim);
  r.read("block_dim", l.block_dim);
  r.read("fixed_blocks", l.fixed_blocks);
  r.finish();
}

}  // namespace bidrl
