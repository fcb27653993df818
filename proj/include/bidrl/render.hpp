#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bidrl/bidding_game.hpp"
#include "bidrl/catfeeder.hpp"
#include "bidrl/checkpoint.hpp"
#include "bidrl/distributions.hpp"
#include "bidrl/eval.hpp"
#include "bidrl/json_io.hpp"
#include "bidrl/network.hpp"
#include "bidrl/tasks.hpp"

namespace bidrl {

// One step of a watched rollout. `controller` is the slot whose action was
// executed (-1 for single-policy runs).
struct TraceStep {
  int step = 0;
  int controller = -1;
  bool auction = false;
  bool forced = false;
  std::vector<int> bids;       // this step's bids when an auction was held
  std::vector<int> last_bids;  // bids of the most recent auction
  int action = catfeeder::kStay;
  catfeeder::State state;      // after the step
  int fed = 0;
  int expired = 0;
  int score = 0;               // cumulative fed - expired
};

inline Json to_json(const TraceStep& t) {
  Json targets = Json::array();
  for (const catfeeder::Target& tg : t.state.targets) {
    targets.push_back(Json{{"x", tg.cell.x}, {"y", tg.cell.y}, {"life", tg.remaining_life}, {"alive", tg.alive}});
  }
  return Json{{"step", t.step},
              {"controller", t.controller},
              {"auction", t.auction},
              {"forced", t.forced},
              {"bids", t.bids},
              {"action", t.action},
              {"robot", Json::array({t.state.robot.x, t.state.robot.y})},
              {"targets", targets},
              {"fed", t.fed},
              {"expired", t.expired},
              {"score", t.score}};
}

inline std::string target_label(int slot) {
  const char* digits = "0123456789abcdefghijklmnopqrstuvwxyz";
  return slot < 36 ? std::string(1, digits[slot]) : "?";
}

// Grid rows (one per y) of 3-character cells: " . " empty, " R " robot,
// " 3 " target 3, "<3>" target of the controlling policy; then a status line
// and, on auction steps, the full bid vector.
inline std::string render_frame(const TraceStep& t, int grid_size) {
  std::vector<std::string> cells(static_cast<std::size_t>(grid_size) * grid_size, " . ");
  for (std::size_t i = 0; i < t.state.targets.size(); ++i) {
    const catfeeder::Target& tg = t.state.targets[i];
    if (!tg.alive) continue;
    const std::string label = target_label(static_cast<int>(i));
    cells[tg.cell.y * grid_size + tg.cell.x] =
        static_cast<int>(i) == t.controller ? "<" + label + ">" : " " + label + " ";
  }
  cells[t.state.robot.y * grid_size + t.state.robot.x] = " R ";
  auto bid_list = [](const std::vector<int>& bids) {
    std::string s = "[";
    for (std::size_t i = 0; i < bids.size(); ++i) s += (i ? ", " : "") + std::to_string(bids[i]);
    return s + "]";
  };
  std::string out;
  for (int y = 0; y < grid_size; ++y) {
    for (int x = 0; x < grid_size; ++x) out += cells[y * grid_size + x];
    out += '\n';
  }
  out += "step " + std::to_string(t.step) + " | controller " +
         (t.controller < 0 ? std::string("-") : std::to_string(t.controller)) + " | bids " +
         bid_list(t.last_bids) + " | score " + std::to_string(t.score) + '\n';
  if (t.auction) {
    out += "auction" + std::string(t.forced ? " (forced)" : "") + ": bids " + bid_list(t.bids) + " -> winner " +
           std::to_string(t.controller) + '\n';
  }
  return out;
}

// Plays one greedy episode (the first evaluation episode of `seed`).
inline std::vector<TraceStep> rollout_episode(const Checkpoint& ckpt, const catfeeder::Config& env,
                                              const AuctionParams& auction, TrainMode mode, std::uint64_t seed) {
  env.validate();
  auction.validate();
  check_compatible(ckpt, layout_for(env, mode), is_single(mode) ? 1 : auction.bid_levels());
  const ActorCritic<float> net = ckpt.model();
  Rng rng = make_stream(seed, kEvalStreamOffset);
  std::vector<TraceStep> trace;
  ObservationBatch batch;
  int score = 0;

  auto greedy = [&](int column) {
    const auto pass = net.forward(batch, ActorCritic<float>::kActor);
    const std::span<const float> act(pass.action_logits.col(column).data(), pass.action_logits.rows());
    const std::span<const float> bid(pass.bid_logits.col(column).data(), pass.bid_logits.rows());
    return AgentChoice{argmax(act), argmax(bid)};
  };

  if (is_single(mode)) {
    const catfeeder::CatFeeder game(env);
    catfeeder::State s = game.reset(rng);
    for (int t = 1;; ++t) {
      batch.clear(catfeeder::kRobotDim, catfeeder::kBlockDim);
      batch.push(game.observe_global(s));
      const AgentChoice c = greedy(0);
      const Transition tr = game.step(s, c.action, rng);
      TraceStep step;
      step.step = t;
      step.action = c.action;
      for (std::uint8_t e : tr.events) {
        step.fed += (e & kCompleted) ? 1 : 0;
        step.expired += (e & kFailed) ? 1 : 0;
      }
      score += step.fed - step.expired;
      step.score = score;
      step.state = s;
      trace.push_back(std::move(step));
      if (tr.terminal) break;
    }
    return trace;
  }

  const BiddingGame<catfeeder::CatFeeder> game(catfeeder::CatFeeder(env), auction);
  const bool fixed_slots = !ckpt.network.use_attention_pooling;
  auto s = game.reset(rng);
  std::vector<int> last_bids;
  for (int t = 1;; ++t) {
    const int m = game.num_agents(s);
    std::vector<AgentChoice> joint(m);
    batch.clear(catfeeder::kSelfDim, catfeeder::kBlockDim);
    std::vector<int> rows;
    for (int a = 0; a < m; ++a) {
      if (!game.alive(s, a)) continue;
      batch.push(game.env().observe(s.base, a, fixed_slots));
      rows.push_back(a);
    }
    {
      const auto pass = net.forward(batch, ActorCritic<float>::kActor);
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::span<const float> act(pass.action_logits.col(k).data(), pass.action_logits.rows());
        const std::span<const float> bid(pass.bid_logits.col(k).data(), pass.bid_logits.rows());
        joint[rows[k]] = {argmax(act), argmax(bid)};
      }
    }
    auto o = game.step(s, joint, rng);
    TraceStep step;
    step.step = t;
    step.controller = o.executed_agent;
    step.auction = o.auction_held;
    step.forced = o.forced_auction;
    step.action = joint[o.executed_agent].action;
    if (o.auction_held) {
      step.bids = o.bids;
      last_bids = o.bids;
    }
    step.last_bids = last_bids;
    for (std::uint8_t e : o.events) {
      step.fed += (e & kCompleted) ? 1 : 0;
      step.expired += (e & kFailed) ? 1 : 0;
    }
    score += step.fed - step.expired;
    step.score = score;
    s = std::move(o.next_state);
    step.state = s.base;
    trace.push_back(std::move(step));
    if (o.terminal) break;
  }
  return trace;
}

}  // namespace bidrl
