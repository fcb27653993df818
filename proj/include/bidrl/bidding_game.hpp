#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bidrl/auction.hpp"
#include "bidrl/errors.hpp"
#include "bidrl/momdp.hpp"
#include "bidrl/rng.hpp"

namespace bidrl {

struct AgentChoice {
  int action = 0;
  int bid = 0;
};

// One (action, bid) pair per agent slot. Pairs submitted for dead slots are
// ignored.
using JointExtendedAction = std::vector<AgentChoice>;

template <class BaseState>
struct BidGameState {
  BaseState base;
  int controller = 0;  // zero-based agent slot
  int countdown = 0;   // steps left before the next auction, in [0, tau-1]
  bool reauction_forced = false;
};

template <class BaseState>
struct StepOutcome {
  BidGameState<BaseState> next_state;
  RewardVector rewards;       // base reward minus bid penalty, per slot
  RewardVector base_rewards;  // R_i(s, a_k', s')
  RewardVector penalties;     // rho * b_i where charged, else 0
  std::vector<std::uint8_t> events;
  bool auction_held = false;
  bool forced_auction = false;
  std::vector<int> winner_set;  // slots holding the maximal bid
  std::vector<int> bids;        // submitted bids per slot at auction steps
  int executed_agent = -1;
  bool terminal = false;
};

// Markov bidding game over a multi-objective environment: every slot is a
// player; an auction every `tau` steps hands control to the highest bidder.
template <MultiObjectiveEnv Env>
class BiddingGame {
 public:
  using BaseState = typename Env::State;
  using State = BidGameState<BaseState>;
  using Outcome = StepOutcome<BaseState>;

  BiddingGame(Env env, AuctionParams params) : env_(std::move(env)), params_(params) {
    params_.validate();
  }

  const Env& env() const { return env_; }
  const AuctionParams& params() const { return params_; }

  State reset(Rng& rng) const {
    State state{env_.reset(rng), 0, 0, false};
    if (env_.num_objectives(state.base) < 1) throw EmptyGame("environment reset with no objectives");
    return state;
  }

  int num_agents(const State& state) const { return env_.num_objectives(state.base); }

  bool alive(const State& state, int agent) const { return env_.objective_alive(state.base, agent); }

  int live_count(const State& state) const {
    int n = 0;
    for (int i = 0; i < num_agents(state); ++i) n += alive(state, i) ? 1 : 0;
    return n;
  }

  Observation observe(const State& state, int agent) const { return env_.observe(state.base, agent); }

  Outcome step(const State& state, std::span<const AgentChoice> joint, Rng& rng) const {
    const int m = num_agents(state);
    if (static_cast<int>(joint.size()) != m) {
      throw LengthMismatch("joint action has " + std::to_string(joint.size()) +
                           " entries for " + std::to_string(m) + " agent slots");
    }
    std::vector<int> live;
    for (int i = 0; i < m; ++i) {
      if (!alive(state, i)) continue;
      live.push_back(i);
      if (joint[i].action < 0 || joint[i].action >= env_.action_count()) {
        throw InvalidAction("agent " + std::to_string(i) + " action " +
                            std::to_string(joint[i].action) + " outside [0, " +
                            std::to_string(env_.action_count()) + ")");
      }
      check_bid(joint[i].bid, params_.beta, i);
    }
    if (live.empty()) throw EmptyGame("step with no live agents");

    Outcome out;
    out.next_state = state;
    out.penalties.assign(m, 0.0);
    State& next = out.next_state;

    if (state.countdown > 0) {
      out.executed_agent = state.controller;
      next.countdown = state.countdown - 1;
    } else {
      out.auction_held = true;
      out.forced_auction = state.reauction_forced;
      std::vector<int> live_bids;
      live_bids.reserve(live.size());
      for (int i : live) live_bids.push_back(joint[i].bid);
      for (int pos : highest_bidders(live_bids)) out.winner_set.push_back(live[pos]);
      const int winner = out.winner_set.size() == 1
                             ? out.winner_set.front()
                             : out.winner_set[uniform_int(rng, 0, static_cast<int>(out.winner_set.size()) - 1)];
      out.executed_agent = winner;
      next.controller = winner;
      next.countdown = params_.tau - 1;
      next.reauction_forced = false;
      out.bids.assign(m, 0);
      for (int i : live) {
        out.bids[i] = joint[i].bid;
        if (i == winner || params_.penalty_model == PenaltyModel::AllPay) {
          out.penalties[i] = params_.rho * joint[i].bid;
        }
      }
    }

    Transition tr = env_.step(next.base, joint[out.executed_agent].action, rng);
    if (static_cast<int>(tr.rewards.size()) != m) {
      throw LengthMismatch("environment returned " + std::to_string(tr.rewards.size()) +
                           " rewards for " + std::to_string(m) + " objectives");
    }
    out.base_rewards = std::move(tr.rewards);
    out.events = std::move(tr.events);
    out.terminal = tr.terminal;
    out.rewards.resize(m);
    for (int i = 0; i < m; ++i) out.rewards[i] = out.base_rewards[i] - out.penalties[i];

    // A controller whose objective vanished cannot keep the window.
    if (!out.terminal && next.countdown > 0 && !alive(next, next.controller)) force_reauction(next);
    return out;
  }

  // Removes the listed agents, then appends one fresh slot per descriptor.
  template <class Descriptor>
    requires AdaptiveObjectiveEnv<Env>
  State apply_objective_change(const State& state, std::span<const Descriptor> added,
                               std::span<const int> removed, Rng& rng) const {
    State next = state;
    std::vector<int> gone(removed.begin(), removed.end());
    std::sort(gone.begin(), gone.end());
    gone.erase(std::unique(gone.begin(), gone.end()), gone.end());
    for (int i : gone) {
      if (i < 0 || i >= num_agents(state) || !alive(state, i)) {
        throw DeadAgent("cannot remove agent " + std::to_string(i) + ": not live");
      }
    }
    if (live_count(state) - static_cast<int>(gone.size()) + static_cast<int>(added.size()) < 1) {
      throw EmptyGame("objective change would leave no live agents");
    }
    for (int i : gone) env_.remove_objective(next.base, i);
    for (const Descriptor& d : added) env_.add_objective(next.base, d, rng);
    if (std::binary_search(gone.begin(), gone.end(), state.controller)) force_reauction(next);
    return next;
  }

 private:
  static void force_reauction(State& state) {
    state.countdown = 0;
    state.reauction_forced = true;
  }

  Env env_;
  AuctionParams params_;
};

template <MultiObjectiveEnv Env>
BiddingGame<Env> wrap(Env env, AuctionParams params) {
  return BiddingGame<Env>(std::move(env), params);
}

}  // namespace bidrl
