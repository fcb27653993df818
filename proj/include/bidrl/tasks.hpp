#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "bidrl/auction.hpp"
#include "bidrl/bidding_game.hpp"
#include "bidrl/catfeeder.hpp"
#include "bidrl/errors.hpp"
#include "bidrl/observation.hpp"
#include "bidrl/rng.hpp"

namespace bidrl {

enum class TrainMode { MultiAgentBidding, SingleSparse, SingleNearestShaping, SingleExpiryShaping };

inline std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::MultiAgentBidding: return "bidding";
    case TrainMode::SingleSparse: return "single-sparse";
    case TrainMode::SingleNearestShaping: return "single-ns";
    case TrainMode::SingleExpiryShaping: return "single-es";
  }
  return "bidding";
}

inline TrainMode train_mode_from_string(std::string_view name) {
  if (name == "bidding") return TrainMode::MultiAgentBidding;
  if (name == "single-sparse") return TrainMode::SingleSparse;
  if (name == "single-ns") return TrainMode::SingleNearestShaping;
  if (name == "single-es") return TrainMode::SingleExpiryShaping;
  throw ConfigError("unknown training mode '" + std::string(name) +
                    "' (expected bidding, single-sparse, single-ns or single-es)");
}

inline bool is_single(TrainMode mode) { return mode != TrainMode::MultiAgentBidding; }

// Splits [0, n) into contiguous chunks run on `workers` threads. Work items
// must be independent; results do not depend on the worker count.
inline void parallel_for(int n, int workers, const std::function<void(int)>& body) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  workers = std::min(workers, n);
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int lo = n * w / workers;
    const int hi = n * (w + 1) / workers;
    pool.emplace_back([lo, hi, &body] {
      for (int i = lo; i < hi; ++i) body(i);
    });
  }
}

// What happened in one environment during one vectorized step.
struct EnvStepRecord {
  bool auction_held = false;
  bool forced_auction = false;
  int executed_agent = 0;
  int controller = 0;  // controller after the step
  std::vector<int> bids;
  int completed = 0;
  int failed = 0;
  bool done = false;
  int episode_length = 0;  // valid when done
  int episode_score = 0;   // valid when done
};

struct VecStepResult {
  std::vector<double> rewards;    // num_envs * agents
  std::vector<double> penalties;  // num_envs * agents
  std::vector<EnvStepRecord> records;
};

namespace catfeeder {

// Live target closest to the robot (ties to the lowest slot), or -1.
inline int nearest_target(const State& s) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(s.targets.size()); ++i) {
    if (!s.targets[i].alive) continue;
    if (best < 0 || manhattan(s.robot, s.targets[i].cell) < manhattan(s.robot, s.targets[best].cell)) best = i;
  }
  return best;
}

// Live target with the least remaining life (ties: nearer, then lower slot), or -1.
inline int most_urgent_target(const State& s) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(s.targets.size()); ++i) {
    const Target& t = s.targets[i];
    if (!t.alive) continue;
    if (best < 0) {
      best = i;
      continue;
    }
    const Target& b = s.targets[best];
    if (t.remaining_life < b.remaining_life ||
        (t.remaining_life == b.remaining_life && manhattan(s.robot, t.cell) < manhattan(s.robot, b.cell))) {
      best = i;
    }
  }
  return best;
}

}  // namespace catfeeder

// Vectorized Markov bidding game over Cat Feeder: one player per target slot.
class BiddingTask {
 public:
  using Game = BiddingGame<catfeeder::CatFeeder>;

  BiddingTask(const catfeeder::Config& env, const AuctionParams& auction, int num_envs, std::uint64_t seed,
              bool fixed_slots, int workers = 1, std::uint64_t stream_offset = 0)
      : game_(catfeeder::CatFeeder(env), auction), fixed_slots_(fixed_slots), workers_(workers) {
    if (num_envs < 1) throw InvalidParameter("num_envs must be >= 1");
    rngs_.reserve(num_envs);
    for (int e = 0; e < num_envs; ++e) rngs_.push_back(make_stream(seed, stream_offset + e));
    states_.resize(num_envs);
    scores_.assign(num_envs, 0);
    lengths_.assign(num_envs, 0);
    reset_all();
  }

  const Game& game() const { return game_; }
  int num_envs() const { return static_cast<int>(states_.size()); }
  int agents() const { return game_.env().config().num_targets; }
  int bid_levels() const { return game_.params().bid_levels(); }
  ObservationLayout layout() const { return {catfeeder::kSelfDim, catfeeder::kBlockDim, agents() - 1}; }
  Rng& rng(int env) { return rngs_[env]; }
  const Game::State& state(int env) const { return states_[env]; }

  void reset_all() {
    for (int e = 0; e < num_envs(); ++e) {
      states_[e] = game_.reset(rngs_[e]);
      scores_[e] = 0;
      lengths_[e] = 0;
    }
  }

  bool live(int env, int agent) const { return game_.alive(states_[env], agent); }

  // Appends the observation of every live (env, agent) pair; rows[k] holds
  // env * agents() + agent for batch column k.
  void observe(ObservationBatch& batch, std::vector<int>& rows) const {
    batch.clear(catfeeder::kSelfDim, catfeeder::kBlockDim);
    rows.clear();
    const int m = agents();
    for (int e = 0; e < num_envs(); ++e) {
      for (int a = 0; a < m; ++a) {
        if (!live(e, a)) continue;
        batch.push(game_.env().observe(states_[e].base, a, fixed_slots_));
        rows.push_back(e * m + a);
      }
    }
  }

  // choices holds one (action, bid) per (env, agent); finished episodes are
  // reset in place.
  void step(std::span<const AgentChoice> choices, VecStepResult& out) {
    const int m = agents();
    out.rewards.assign(static_cast<std::size_t>(num_envs()) * m, 0.0);
    out.penalties.assign(out.rewards.size(), 0.0);
    out.records.assign(num_envs(), {});
    parallel_for(num_envs(), workers_, [&](int e) {
      Game::Outcome o = game_.step(states_[e], choices.subspan(static_cast<std::size_t>(e) * m, m), rngs_[e]);
      EnvStepRecord& rec = out.records[e];
      rec.auction_held = o.auction_held;
      rec.forced_auction = o.forced_auction;
      rec.executed_agent = o.executed_agent;
      rec.bids = std::move(o.bids);
      for (int a = 0; a < m; ++a) {
        out.rewards[e * m + a] = o.rewards[a];
        out.penalties[e * m + a] = o.penalties[a];
        rec.completed += (o.events[a] & kCompleted) ? 1 : 0;
        rec.failed += (o.events[a] & kFailed) ? 1 : 0;
      }
      states_[e] = std::move(o.next_state);
      rec.controller = states_[e].controller;
      scores_[e] += rec.completed - rec.failed;
      lengths_[e] += 1;
      if (o.terminal) {
        rec.done = true;
        rec.episode_length = lengths_[e];
        rec.episode_score = scores_[e];
        states_[e] = game_.reset(rngs_[e]);
        scores_[e] = 0;
        lengths_[e] = 0;
      }
    });
  }

 private:
  Game game_;
  bool fixed_slots_;
  int workers_;
  std::vector<Rng> rngs_;
  std::vector<Game::State> states_;
  std::vector<int> scores_;
  std::vector<int> lengths_;
};

// Vectorized single-policy Cat Feeder with the per-step reward summed over
// objectives, plus optional shaping toward the nearest or the most urgent
// target. The shaping scale is taken from env.distance_reward_scale; the
// per-objective shaping of the environment itself is switched off.
class ScalarizedTask {
 public:
  ScalarizedTask(catfeeder::Config env, TrainMode mode, int num_envs, std::uint64_t seed, int workers = 1,
                 std::uint64_t stream_offset = 0)
      : shaping_scale_(mode == TrainMode::SingleSparse ? 0.0 : env.distance_reward_scale),
        mode_(mode),
        env_(without_shaping(env)),
        workers_(workers) {
    if (!is_single(mode)) throw InvalidParameter("scalarized task needs a single-policy mode");
    if (num_envs < 1) throw InvalidParameter("num_envs must be >= 1");
    rngs_.reserve(num_envs);
    for (int e = 0; e < num_envs; ++e) rngs_.push_back(make_stream(seed, stream_offset + e));
    states_.resize(num_envs);
    scores_.assign(num_envs, 0);
    lengths_.assign(num_envs, 0);
    reset_all();
  }

  const catfeeder::CatFeeder& env() const { return env_; }
  int num_envs() const { return static_cast<int>(states_.size()); }
  int agents() const { return 1; }
  int bid_levels() const { return 1; }
  ObservationLayout layout() const {
    return {catfeeder::kRobotDim, catfeeder::kBlockDim, env_.config().num_targets};
  }
  Rng& rng(int env) { return rngs_[env]; }
  const catfeeder::State& state(int env) const { return states_[env]; }

  void reset_all() {
    for (int e = 0; e < num_envs(); ++e) {
      states_[e] = env_.reset(rngs_[e]);
      scores_[e] = 0;
      lengths_[e] = 0;
    }
  }

  bool live(int, int) const { return true; }

  void observe(ObservationBatch& batch, std::vector<int>& rows) const {
    batch.clear(catfeeder::kRobotDim, catfeeder::kBlockDim);
    rows.clear();
    for (int e = 0; e < num_envs(); ++e) {
      batch.push(env_.observe_global(states_[e]));
      rows.push_back(e);
    }
  }

  // Shaping term for one transition given the tracked target before the
  // step (-1 for none).
  double shaping(const catfeeder::State& before, const catfeeder::State& after, const Transition& tr,
                 int tracked) const {
    if (shaping_scale_ == 0.0 || tracked < 0) return 0.0;
    if (tr.events[tracked] & kFailed) return 0.0;
    const int prev = catfeeder::manhattan(before.robot, before.targets[tracked].cell);
    const int next = (tr.events[tracked] & kCompleted) ? 0
                                                        : catfeeder::manhattan(after.robot, after.targets[tracked].cell);
    return catfeeder::shaping_reward(prev, next, shaping_scale_);
  }

  int tracked_target(const catfeeder::State& s) const {
    switch (mode_) {
      case TrainMode::SingleNearestShaping: return catfeeder::nearest_target(s);
      case TrainMode::SingleExpiryShaping: return catfeeder::most_urgent_target(s);
      default: return -1;
    }
  }

  void step(std::span<const AgentChoice> choices, VecStepResult& out) {
    out.rewards.assign(num_envs(), 0.0);
    out.penalties.assign(num_envs(), 0.0);
    out.records.assign(num_envs(), {});
    parallel_for(num_envs(), workers_, [&](int e) {
      const int tracked = tracked_target(states_[e]);
      catfeeder::State before = shaping_scale_ > 0.0 ? states_[e] : catfeeder::State{};
      Transition tr = env_.step(states_[e], choices[e].action, rngs_[e]);
      EnvStepRecord& rec = out.records[e];
      double reward = 0.0;
      for (std::size_t i = 0; i < tr.rewards.size(); ++i) {
        reward += tr.rewards[i];
        rec.completed += (tr.events[i] & kCompleted) ? 1 : 0;
        rec.failed += (tr.events[i] & kFailed) ? 1 : 0;
      }
      if (shaping_scale_ > 0.0) reward += shaping(before, states_[e], tr, tracked);
      out.rewards[e] = reward;
      scores_[e] += rec.completed - rec.failed;
      lengths_[e] += 1;
      if (tr.terminal) {
        rec.done = true;
        rec.episode_length = lengths_[e];
        rec.episode_score = scores_[e];
        states_[e] = env_.reset(rngs_[e]);
        scores_[e] = 0;
        lengths_[e] = 0;
      }
    });
  }

 private:
  static catfeeder::CatFeeder without_shaping(catfeeder::Config c) {
    c.distance_reward_scale = 0.0;
    return catfeeder::CatFeeder(c);
  }

  double shaping_scale_;
  TrainMode mode_;
  catfeeder::CatFeeder env_;
  int workers_;
  std::vector<Rng> rngs_;
  std::vector<catfeeder::State> states_;
  std::vector<int> scores_;
  std::vector<int> lengths_;
};

}  // namespace bidrl
