#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bidrl/auction.hpp"
#include "bidrl/catfeeder.hpp"
#include "bidrl/errors.hpp"
#include "bidrl/eval.hpp"
#include "bidrl/json_io.hpp"
#include "bidrl/network.hpp"
#include "bidrl/trainer.hpp"

namespace bidrl {

inline Json to_json(const TrainConfig& t) {
  return Json{{"iterations", t.iterations},
              {"num_envs", t.num_envs},
              {"steps_per_rollout", t.steps_per_rollout},
              {"num_minibatches", t.num_minibatches},
              {"ppo_epochs", t.ppo_epochs},
              {"learning_rate", t.learning_rate},
              {"anneal_lr", t.anneal_lr},
              {"gamma", t.gamma},
              {"gae_lambda", t.gae_lambda},
              {"clip_coef", t.clip_coef},
              {"entropy_coef", t.entropy_coef},
              {"value_coef", t.value_coef},
              {"max_grad_norm", t.max_grad_norm},
              {"target_kl", t.target_kl},
              {"seeds", t.seeds},
              {"mode", std::string(to_string(t.mode))},
              {"eval_interval", t.eval_interval},
              {"eval_episodes", t.eval_episodes},
              {"checkpoint_interval", t.checkpoint_interval},
              {"workers", t.workers}};
}

inline void from_json(const Json& j, TrainConfig& t, const std::string& path = "train") {
  StrictReader r(j, path);
  r.read("iterations", t.iterations);
  r.read("num_envs", t.num_envs);
  r.read("steps_per_rollout", t.steps_per_rollout);
  r.read("num_minibatches", t.num_minibatches);
  r.read("ppo_epochs", t.ppo_epochs);
  r.read("learning_rate", t.learning_rate);
  r.read("anneal_lr", t.anneal_lr);
  r.read("gamma", t.gamma);
  r.read("gae_lambda", t.gae_lambda);
  r.read("clip_coef", t.clip_coef);
  r.read("entropy_coef", t.entropy_coef);
  r.read("value_coef", t.value_coef);
  r.read("max_grad_norm", t.max_grad_norm);
  r.read("target_kl", t.target_kl);
  r.read("seeds", t.seeds);
  std::string mode(to_string(t.mode));
  r.read("mode", mode);
  try {
    t.mode = train_mode_from_string(mode);
  } catch (const ConfigError& e) {
    r.fail("mode", e.what());
  }
  r.read("eval_interval", t.eval_interval);
  r.read("eval_episodes", t.eval_episodes);
  r.read("checkpoint_interval", t.checkpoint_interval);
  r.read("workers", t.workers);
  r.finish();
}

struct EvalConfig {
  int episodes = 16;
  std::vector<std::uint64_t> seeds = kDefaultSeeds;
};

// A trainable method: the multi-agent bidding game under one penalty model,
// or one of the single-policy baselines.
struct Method {
  std::string name;  // AllPay, WinnerPays, SingleSparse, SingleNS, SingleES
  TrainMode mode = TrainMode::MultiAgentBidding;
  PenaltyModel penalty = PenaltyModel::AllPay;
};

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{
      {"AllPay", TrainMode::MultiAgentBidding, PenaltyModel::AllPay},
      {"WinnerPays", TrainMode::MultiAgentBidding, PenaltyModel::WinnerPays},
      {"SingleSparse", TrainMode::SingleSparse, PenaltyModel::AllPay},
      {"SingleNS", TrainMode::SingleNearestShaping, PenaltyModel::AllPay},
      {"SingleES", TrainMode::SingleExpiryShaping, PenaltyModel::AllPay},
  };
  return methods;
}

// Accepts the CLI spelling (all-pay, winner-pays, single-sparse, single-ns,
// single-es) or the table name (AllPay, ...).
inline Method method_from_string(std::string_view name) {
  static const std::vector<std::pair<std::string_view, std::string_view>> aliases{
      {"all-pay", "AllPay"},          {"winner-pays", "WinnerPays"}, {"single-sparse", "SingleSparse"},
      {"single-ns", "SingleNS"},      {"single-es", "SingleES"},
  };
  for (const auto& [cli, table] : aliases) {
    if (name == cli) name = table;
  }
  for (const Method& m : all_methods()) {
    if (m.name == name) return m;
  }
  throw ConfigError("unknown mode '" + std::string(name) +
                    "' (expected all-pay, winner-pays, single-sparse, single-ns or single-es)");
}

inline Method method_of(TrainMode mode, PenaltyModel penalty) {
  for (const Method& m : all_methods()) {
    if (m.mode == mode && (is_single(mode) || m.penalty == penalty)) return m;
  }
  return all_methods().front();
}

struct RunConfig {
  std::string profile = "paper";
  std::string run_name = "run";
  std::string output_dir = "runs";
  catfeeder::Config env;
  AuctionParams auction;
  NetworkConfig network;
  TrainConfig train;
  EvalConfig eval;

  Method method() const { return method_of(train.mode, auction.penalty_model); }

  TrainSetup setup() const {
    TrainSetup s{env, auction, network, train};
    s.resolve();
    return s;
  }

  EvalSetup eval_setup() const {
    EvalSetup e;
    e.env = env;
    e.auction = auction;
    e.mode = train.mode;
    e.episodes = eval.episodes;
    e.seeds = eval.seeds;
    e.workers = train.workers;
    return e;
  }
};

inline const std::vector<std::string>& profile_names() {
  static const std::vector<std::string> names{"paper", "desk"};
  return names;
}

// Built-in defaults. `paper` is the full-scale reference configuration;
// `desk` is a single-CPU scale (10x10 grid, 3 targets) with a narrower
// network and a learning rate / minibatch count rescaled to the smaller
// rollout buffer.
inline RunConfig profile_defaults(std::string_view profile, const Method& method) {
  RunConfig rc;
  rc.profile = std::string(profile);
  rc.run_name = method.name;
  rc.auction.penalty_model = method.penalty;
  const bool single = is_single(method.mode);
  rc.train = single ? TrainConfig::single_defaults(method.mode) : TrainConfig::bidding_defaults();
  if (single) {
    rc.network.use_attention_pooling = false;
    rc.env.distance_reward_scale = method.mode == TrainMode::SingleSparse ? 0.0 : 0.6;
  }
  if (profile == "paper") return rc;
  if (profile != "desk") {
    throw ConfigError("unknown profile '" + std::string(profile) + "' (expected paper or desk)");
  }
  rc.env.grid_size = 10;
  rc.env.num_targets = 3;
  rc.env.expiry_steps = 60;
  rc.auction.tau = 5;
  rc.auction.beta = 6;
  rc.auction.rho = 0.1;
  rc.network.actor_hidden = {64, 64};
  rc.network.critic_hidden = {64, 64};
  rc.network.target_embedding_dim = 32;
  rc.network.target_encoder_hidden = {32, 32};
  rc.train.iterations = 150;
  rc.train.num_envs = 64;
  rc.train.steps_per_rollout = 128;
  rc.train.num_minibatches = single ? 64 : 32;
  rc.train.learning_rate *= 8.0;
  rc.train.seeds = {kDefaultSeeds[0], kDefaultSeeds[1], kDefaultSeeds[2]};
  return rc;
}

inline Json to_json(const RunConfig& rc) {
  Json network = to_json(rc.network);
  network.erase("bid_levels");  // derived from the auction / mode
  network.erase("action_count");
  return Json{{"profile", rc.profile},
              {"run_name", rc.run_name},
              {"output_dir", rc.output_dir},
              {"env", to_json(rc.env)},
              {"auction", to_json(rc.auction)},
              {"network", network},
              {"train", to_json(rc.train)},
              {"eval", Json{{"episodes", rc.eval.episodes}, {"seeds", rc.eval.seeds}}}};
}

inline void from_json(const Json& j, RunConfig& rc) {
  StrictReader r(j, "config");
  r.read("profile", rc.profile);
  r.read("run_name", rc.run_name);
  r.read("output_dir", rc.output_dir);
  if (const Json* s = r.child("env")) from_json(*s, rc.env, "env");
  if (const Json* s = r.child("auction")) from_json(*s, rc.auction, "auction");
  if (const Json* s = r.child("network")) {
    from_json(*s, rc.network, "network");
    if (s->contains("action_count") && rc.network.action_count != catfeeder::kActionCount) {
      throw ConfigError("network.action_count: the environment has " + std::to_string(catfeeder::kActionCount) +
                        " actions");
    }
  }
  if (const Json* s = r.child("train")) from_json(*s, rc.train, "train");
  if (const Json* s = r.child("eval")) {
    StrictReader e(*s, "eval");
    e.read("episodes", rc.eval.episodes);
    e.read("seeds", rc.eval.seeds);
    e.finish();
  }
  r.finish();
  if (const Json* s = j.contains("network") ? &j.at("network") : nullptr; s && s->contains("bid_levels")) {
    const int expected = is_single(rc.train.mode) ? 1 : rc.auction.bid_levels();
    if (rc.network.bid_levels != expected) {
      throw ConfigError("network.bid_levels: must be " + std::to_string(expected) +
                        " (auction.bid_upper_bound + 1, or 1 for single-policy modes)");
    }
  }
  rc.network.action_count = catfeeder::kActionCount;
  rc.network.bid_levels = is_single(rc.train.mode) ? 1 : rc.auction.bid_levels();
}

inline void validate(const RunConfig& rc) {
  try {
    rc.env.validate();
    rc.auction.validate();
    rc.network.validate();
    rc.train.validate();
    if (rc.eval.episodes < 1) throw InvalidParameter("eval.episodes must be >= 1");
    if (rc.eval.seeds.empty()) throw InvalidParameter("eval.seeds must not be empty");
    if (rc.run_name.empty()) throw InvalidParameter("run_name must not be empty");
  } catch (const InvalidParameter& e) {
    throw ConfigError(e.what());
  }
}

// Applies one `section.key=value` override to a config document. The key
// must already exist; the value is parsed as JSON, falling back to a plain
// string.
inline void apply_override(Json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key.path=value");
  }
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw ConfigError("unknown key '" + path + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("'" + path + "' is a section, not a key");
  Json value = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;
  *node = std::move(value);
}

struct ConfigRequest {
  std::optional<std::string> profile;
  std::optional<std::string> mode;  // CLI spelling, e.g. all-pay
  std::optional<Json> file;         // parsed config file
  std::vector<std::string> overrides;
};

// Resolution order: profile defaults for the method -> config file ->
// --mode -> --set overrides. Every layer is checked against the key set.
inline RunConfig resolve_config(const ConfigRequest& req) {
  if (req.file && !req.file->is_object()) throw ConfigError("config: expected an object");
  for (const std::string& o : req.overrides) {
    if (o.rfind("profile=", 0) == 0) throw ConfigError("use --profile to select a profile");
  }
  std::string profile = "paper";
  if (req.profile) {
    profile = *req.profile;
  } else if (req.file && req.file->contains("profile") && req.file->at("profile").is_string()) {
    profile = req.file->at("profile").get<std::string>();
  }

  Method method = method_of(TrainMode::MultiAgentBidding, PenaltyModel::AllPay);
  if (req.mode) {
    method = method_from_string(*req.mode);
  } else if (req.file) {
    // The method decides which defaults apply, so peek at it first.
    RunConfig probe;
    from_json(*req.file, probe);
    method = method_of(probe.train.mode, probe.auction.penalty_model);
  }

  RunConfig base = profile_defaults(profile, method);
  Json doc = to_json(base);
  if (req.file) {
    RunConfig probe;
    from_json(*req.file, probe);  // strict key check with key paths
    Json patch = *req.file;
    if (patch.contains("network")) {
      patch["network"].erase("bid_levels");
      patch["network"].erase("action_count");
    }
    doc.merge_patch(patch);
  }
  if (req.mode) {
    doc["train"]["mode"] = std::string(to_string(method.mode));
    if (!is_single(method.mode)) doc["auction"]["penalty_model"] = std::string(to_string(method.penalty));
  }
  for (const std::string& o : req.overrides) apply_override(doc, o);

  RunConfig rc = base;
  from_json(doc, rc);
  rc.profile = profile;
  validate(rc);
  return rc;
}

inline std::string config_lock_text(const RunConfig& rc) { return to_json(rc).dump(2) + "\n"; }

}  // namespace bidrl
