#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "bidrl/auction.hpp"
#include "bidrl/catfeeder.hpp"
#include "bidrl/checkpoint.hpp"
#include "bidrl/errors.hpp"
#include "bidrl/eval.hpp"
#include "bidrl/json_io.hpp"
#include "bidrl/network.hpp"
#include "bidrl/ppo.hpp"
#include "bidrl/rollout.hpp"
#include "bidrl/tasks.hpp"

namespace bidrl {

struct TrainConfig {
  int iterations = 400;
  int num_envs = 4096;
  int steps_per_rollout = 256;
  int num_minibatches = 256;
  int ppo_epochs = 4;
  double learning_rate = 2.5e-4;
  bool anneal_lr = true;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_coef = 0.05;
  double entropy_coef = 0.03;
  double value_coef = 1.0;
  double max_grad_norm = 0.5;
  double target_kl = 0.0;  // <= 0: no early stopping
  std::vector<std::uint64_t> seeds = kDefaultSeeds;
  TrainMode mode = TrainMode::MultiAgentBidding;
  int eval_interval = 10;
  int eval_episodes = 16;
  int checkpoint_interval = 0;  // 0: final checkpoint only
  int workers = 1;

  // Multi-agent bidding defaults (Cat Feeder, full scale).
  static TrainConfig bidding_defaults() { return TrainConfig{}; }

  // Single-policy scalarized baseline defaults (Cat Feeder, full scale).
  static TrainConfig single_defaults(TrainMode mode) {
    TrainConfig c;
    c.num_minibatches = 512;
    c.ppo_epochs = 8;
    c.learning_rate = 1.74e-4;
    c.gamma = 0.963;
    c.gae_lambda = 0.970;
    c.clip_coef = 0.327;
    c.entropy_coef = 1.03e-4;
    c.value_coef = 1.076;
    c.max_grad_norm = 0.840;
    c.mode = mode;
    return c;
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw InvalidParameter("train." + m); };
    if (iterations < 0) fail("iterations must be >= 0");
    if (num_envs < 1) fail("num_envs must be >= 1");
    if (steps_per_rollout < 1) fail("steps_per_rollout must be >= 1");
    if (num_minibatches < 1) fail("num_minibatches must be >= 1");
    if (ppo_epochs < 1) fail("ppo_epochs must be >= 1");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must lie in (0, 1)");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) fail("gae_lambda must lie in [0, 1]");
    if (!(clip_coef > 0.0)) fail("clip_coef must be > 0");
    if (seeds.empty()) fail("seeds must not be empty");
    if (eval_interval < 1) fail("eval_interval must be >= 1");
    if (eval_episodes < 1) fail("eval_episodes must be >= 1");
    if (checkpoint_interval < 0) fail("checkpoint_interval must be >= 0");
    if (workers < 1) fail("workers must be >= 1");
  }
};

// Everything that determines a training run.
struct TrainSetup {
  catfeeder::Config env;
  AuctionParams auction;
  NetworkConfig network;
  TrainConfig train;

  // Fills fields that follow from others (bid head width).
  void resolve() {
    network.bid_levels = is_single(train.mode) ? 1 : auction.bid_levels();
  }
};

struct CurveRecord {
  int iteration = 0;
  long long env_steps = 0;
  double mean_score = 0.0;
  double std_score = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_frac = 0.0;
  double approx_kl = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<CurveRecord> curve;
  long long env_steps = 0;
  int iterations_done = 0;
  bool interrupted = false;
};

struct TrainHooks {
  std::function<void(const CurveRecord&)> on_eval;
  std::function<void(int iteration, const UpdateStats&)> on_iteration;
  std::function<void(const Checkpoint&, int iteration)> on_checkpoint;
  std::function<bool()> should_stop;
};

// Learning rate for iteration i (0-based) of n under linear annealing.
inline double annealed_lr(double lr0, int iteration, int iterations, bool anneal) {
  if (!anneal || iterations <= 0) return lr0;
  return lr0 * (1.0 - static_cast<double>(iteration) / static_cast<double>(iterations));
}

inline Json checkpoint_metadata(const TrainSetup& setup, std::uint64_t seed, int iteration, long long env_steps) {
  return Json{{"mode", std::string(to_string(setup.train.mode))},
              {"seed", seed},
              {"iteration", iteration},
              {"env_steps", env_steps},
              {"env", to_json(setup.env)},
              {"auction", to_json(setup.auction)}};
}

namespace detail {

template <class Task>
TrainResult train_loop(Task& task, const TrainSetup& setup, std::uint64_t seed, const TrainHooks& hooks) {
  const TrainConfig& tc = setup.train;
  ActorCritic<float> net(setup.network, task.layout());
  Rng init_rng = make_stream(seed, 0xC0FFEE);
  net.initialize(init_rng);
  Adam<float> opt(net.parameter_count());
  Rng shuffle_rng = make_stream(seed, 0x5EED);

  EvalSetup eval;
  eval.env = setup.env;
  eval.auction = setup.auction;
  eval.mode = tc.mode;
  eval.episodes = tc.eval_episodes;
  eval.seeds = {seed};
  eval.workers = tc.workers;

  UpdateConfig ucfg;
  ucfg.coef = {tc.clip_coef, tc.entropy_coef, tc.value_coef};
  ucfg.epochs = tc.ppo_epochs;
  ucfg.num_minibatches = tc.num_minibatches;
  ucfg.max_grad_norm = tc.max_grad_norm;
  ucfg.target_kl = tc.target_kl;

  TrainResult result;
  UpdateStats last;
  auto record = [&](int iteration) {
    const EvalReport report = evaluate(net, eval);
    CurveRecord r{iteration,       result.env_steps, report.mean,     report.stddev, last.policy_loss,
                  last.value_loss, last.entropy,     last.clip_frac,  last.approx_kl};
    result.curve.push_back(r);
    if (hooks.on_eval) hooks.on_eval(r);
  };

  if (tc.iterations > 0) record(0);
  RolloutBuffer buf;
  for (int it = 0; it < tc.iterations; ++it) {
    if (hooks.should_stop && hooks.should_stop()) {
      result.interrupted = true;
      break;
    }
    collect_rollouts(task, net, tc.steps_per_rollout, buf);
    result.env_steps += static_cast<long long>(tc.steps_per_rollout) * tc.num_envs;
    compute_gae(buf, tc.gamma, tc.gae_lambda);
    const double lr = annealed_lr(tc.learning_rate, it, tc.iterations, tc.anneal_lr);
    last = ppo_update(net, opt, buf, ucfg, lr, shuffle_rng);
    result.iterations_done = it + 1;
    if (hooks.on_iteration) hooks.on_iteration(it + 1, last);
    if ((it + 1) % tc.eval_interval == 0 || it + 1 == tc.iterations) record(it + 1);
    if (tc.checkpoint_interval > 0 && (it + 1) % tc.checkpoint_interval == 0 && hooks.on_checkpoint) {
      hooks.on_checkpoint(Checkpoint::from_model(net, checkpoint_metadata(setup, seed, it + 1, result.env_steps)),
                          it + 1);
    }
  }
  result.checkpoint =
      Checkpoint::from_model(net, checkpoint_metadata(setup, seed, result.iterations_done, result.env_steps));
  return result;
}

}  // namespace detail

// Concurrent multi-agent PPO on the Markov bidding game: one shared
// network, per-agent rollouts pooled into a single buffer.
inline TrainResult train(TrainSetup setup, std::uint64_t seed, const TrainHooks& hooks = {}) {
  if (is_single(setup.train.mode)) throw InvalidParameter("train() expects the bidding mode");
  setup.resolve();
  setup.env.validate();
  setup.auction.validate();
  setup.train.validate();
  BiddingTask task(setup.env, setup.auction, setup.train.num_envs, seed, !setup.network.use_attention_pooling,
                   setup.train.workers);
  return detail::train_loop(task, setup, seed, hooks);
}

// One policy on the raw environment with summed rewards (and optional
// nearest / most-urgent target shaping); no auction, single-level bid head.
inline TrainResult train_single_baseline(TrainSetup setup, std::uint64_t seed, const TrainHooks& hooks = {}) {
  if (!is_single(setup.train.mode)) throw InvalidParameter("train_single_baseline() expects a single-policy mode");
  setup.resolve();
  setup.env.validate();
  setup.train.validate();
  ScalarizedTask task(setup.env, setup.train.mode, setup.train.num_envs, seed, setup.train.workers);
  return detail::train_loop(task, setup, seed, hooks);
}

inline TrainResult train_any(const TrainSetup& setup, std::uint64_t seed, const TrainHooks& hooks = {}) {
  return is_single(setup.train.mode) ? train_single_baseline(setup, seed, hooks) : train(setup, seed, hooks);
}

}  // namespace bidrl
