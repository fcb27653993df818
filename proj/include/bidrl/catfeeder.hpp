#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "bidrl/errors.hpp"
#include "bidrl/momdp.hpp"
#include "bidrl/observation.hpp"
#include "bidrl/rng.hpp"

namespace bidrl::catfeeder {

enum Action : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4 };
inline constexpr int kActionCount = 5;
inline constexpr int kRobotDim = 2;
inline constexpr int kBlockDim = 4;  // dx, dy, remaining life, alive
inline constexpr int kSelfDim = kRobotDim + kBlockDim;

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

inline int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

struct Config {
  int grid_size = 30;
  int num_targets = 8;
  double target_reward = 50.0;
  int expiry_steps = 200;
  double expiry_penalty = 50.0;
  int max_episode_steps = 2000;
  bool moving_targets = true;
  double direction_change_prob = 0.1;
  int target_move_interval = 5;
  double distance_reward_scale = 0.6;
  bool respawn = true;
  // Policies see only their own target (no competitor blocks).
  bool local_obs = false;

  void validate() const {
    auto fail = [](const std::string& msg) { throw InvalidParameter("env." + msg); };
    if (grid_size < 1) fail("grid_size must be >= 1");
    if (num_targets < 1) fail("num_targets must be >= 1");
    if (expiry_steps < 1) fail("expiry_steps must be >= 1");
    if (max_episode_steps < 1) fail("max_episode_steps must be >= 1");
    if (expiry_steps > max_episode_steps) fail("expiry_steps must not exceed max_episode_steps");
    if (!(direction_change_prob >= 0.0 && direction_change_prob <= 1.0)) {
      fail("direction_change_prob must lie in [0, 1]");
    }
    if (target_move_interval < 1) fail("target_move_interval must be >= 1");
    if (distance_reward_scale < 0.0) fail("distance_reward_scale must be >= 0");
  }
};

struct Target {
  Cell cell;
  int heading = 0;  // one of kUp..kRight
  int remaining_life = 0;
  bool alive = false;
};

struct State {
  Cell robot;
  std::vector<Target> targets;
  int step_index = 0;
};

// Placement request for an objective added at runtime; a missing cell means
// "anywhere free".
struct ObjectiveDescriptor {
  std::optional<Cell> cell;
};

struct MoveStats {
  int moved = 0;
  int resampled = 0;
};

// Potential-difference shaping toward one target: positive when the robot
// got closer.
inline double shaping_reward(int prev_dist, int next_dist, double scale) {
  return scale * static_cast<double>(prev_dist - next_dist);
}

class CatFeeder {
 public:
  using State = catfeeder::State;
  using ObjectiveDescriptor = catfeeder::ObjectiveDescriptor;

  explicit CatFeeder(Config config = {}, double discount = 0.99) : config_(config), discount_(discount) {
    config_.validate();
  }

  const Config& config() const { return config_; }
  int action_count() const { return kActionCount; }
  double discount() const { return discount_; }

  State reset(Rng& rng) const {
    const long cells = static_cast<long>(config_.grid_size) * config_.grid_size;
    if (config_.num_targets + 1 > cells) {
      throw CapacityError("grid of " + std::to_string(cells) + " cells cannot host a robot and " +
                          std::to_string(config_.num_targets) + " targets");
    }
    State s;
    s.robot = random_cell(rng);
    s.targets.reserve(config_.num_targets);
    for (int i = 0; i < config_.num_targets; ++i) {
      Target t;
      t.cell = free_cell(s, rng);
      t.heading = uniform_int(rng, 0, 3);
      t.remaining_life = config_.expiry_steps;
      t.alive = true;
      s.targets.push_back(t);
    }
    return s;
  }

  int num_objectives(const State& s) const { return static_cast<int>(s.targets.size()); }

  bool objective_alive(const State& s, int i) const {
    return i >= 0 && i < num_objectives(s) && s.targets[i].alive;
  }

  int live_targets(const State& s) const {
    int n = 0;
    for (const Target& t : s.targets) n += t.alive ? 1 : 0;
    return n;
  }

  bool is_terminal(const State& s) const {
    return s.step_index >= config_.max_episode_steps || live_targets(s) == 0;
  }

  // Robot moves, co-located targets are fed, lives tick down, then targets
  // move on their schedule. Consumed targets respawn when enabled.
  Transition step(State& s, int action, Rng& rng) const {
    if (action < 0 || action >= kActionCount) {
      throw InvalidAction("action " + std::to_string(action) + " outside [0, 5)");
    }
    const int m = num_objectives(s);
    Transition tr;
    tr.rewards.assign(m, 0.0);
    tr.events.assign(m, kNoEvent);

    std::vector<int> prev_dist(m, 0);
    for (int i = 0; i < m; ++i) {
      if (s.targets[i].alive) prev_dist[i] = manhattan(s.robot, s.targets[i].cell);
    }
    std::vector<std::uint8_t> was_alive(m);
    for (int i = 0; i < m; ++i) was_alive[i] = s.targets[i].alive ? 1 : 0;

    s.robot = moved(s.robot, action);

    for (int i = 0; i < m; ++i) {
      Target& t = s.targets[i];
      if (t.alive && t.cell == s.robot) {
        tr.rewards[i] += config_.target_reward;
        tr.events[i] |= kCompleted;
        t.alive = false;
      }
    }
    for (int i = 0; i < m; ++i) {
      Target& t = s.targets[i];
      if (!t.alive) continue;
      t.remaining_life -= 1;
      if (t.remaining_life <= 0) {
        t.remaining_life = 0;
        tr.rewards[i] -= config_.expiry_penalty;
        tr.events[i] |= kFailed;
        t.alive = false;
      }
    }
    // Respawn after all consumption so a fresh target never lands on a cell
    // that is being vacated this step.
    for (int i = 0; i < m; ++i) {
      if (tr.events[i] != kNoEvent && config_.respawn) respawn(s, i, rng);
    }

    s.step_index += 1;
    if (config_.moving_targets && s.step_index % config_.target_move_interval == 0) {
      move_targets(s, rng);
    }

    if (config_.distance_reward_scale > 0.0) {
      for (int i = 0; i < m; ++i) {
        if (!was_alive[i] || (tr.events[i] & kFailed)) continue;
        const int next_dist = (tr.events[i] & kCompleted) ? 0 : manhattan(s.robot, s.targets[i].cell);
        tr.rewards[i] += shaping_reward(prev_dist[i], next_dist, config_.distance_reward_scale);
      }
    }
    tr.terminal = is_terminal(s);
    return tr;
  }

  // Each live target first resamples its heading with direction_change_prob,
  // then advances one cell (clipped at walls).
  MoveStats move_targets(State& s, Rng& rng) const {
    MoveStats stats;
    for (Target& t : s.targets) {
      if (!t.alive) continue;
      if (bernoulli(rng, config_.direction_change_prob)) {
        t.heading = uniform_int(rng, 0, 3);
        ++stats.resampled;
      }
      t.cell = moved(t.cell, t.heading);
      ++stats.moved;
    }
    return stats;
  }

  // Robot position, own-target block, then one block per other live target
  // in slot order. With `fixed_slots`, every other slot gets a block and
  // dead slots are zero-filled.
  Observation observe(const State& s, int agent, bool fixed_slots = false) const {
    if (!objective_alive(s, agent)) {
      throw DeadAgent("observation requested for dead agent " + std::to_string(agent));
    }
    Observation obs;
    obs.block_dim = kBlockDim;
    obs.self.reserve(kSelfDim);
    push_robot(obs.self, s.robot);
    push_block(obs.self, s, s.targets[agent]);
    if (config_.local_obs) {
      if (fixed_slots) obs.blocks.assign(static_cast<std::size_t>(num_objectives(s) - 1) * kBlockDim, 0.0f);
      return obs;
    }
    for (int j = 0; j < num_objectives(s); ++j) {
      if (j == agent) continue;
      if (s.targets[j].alive) {
        push_block(obs.blocks, s, s.targets[j]);
      } else if (fixed_slots) {
        obs.blocks.insert(obs.blocks.end(), kBlockDim, 0.0f);
      }
    }
    return obs;
  }

  // Single-policy view: robot position plus one block per slot.
  Observation observe_global(const State& s) const {
    Observation obs;
    obs.block_dim = kBlockDim;
    push_robot(obs.self, s.robot);
    for (const Target& t : s.targets) {
      if (t.alive) {
        push_block(obs.blocks, s, t);
      } else {
        obs.blocks.insert(obs.blocks.end(), kBlockDim, 0.0f);
      }
    }
    return obs;
  }

  int add_objective(State& s, const ObjectiveDescriptor& desc, Rng& rng) const {
    Target t;
    if (desc.cell) {
      if (!in_grid(*desc.cell)) throw InvalidParameter("added target outside the grid");
      t.cell = *desc.cell;
    } else {
      if (occupied_count(s) + 1 > static_cast<long>(config_.grid_size) * config_.grid_size) {
        throw CapacityError("no free cell for an added target");
      }
      t.cell = free_cell(s, rng);
    }
    t.heading = uniform_int(rng, 0, 3);
    t.remaining_life = config_.expiry_steps;
    t.alive = true;
    s.targets.push_back(t);
    return num_objectives(s) - 1;
  }

  void remove_objective(State& s, int i) const {
    if (!objective_alive(s, i)) throw DeadAgent("cannot remove dead objective " + std::to_string(i));
    s.targets[i].alive = false;
    s.targets[i].remaining_life = 0;
  }

  bool in_grid(Cell c) const {
    return c.x >= 0 && c.y >= 0 && c.x < config_.grid_size && c.y < config_.grid_size;
  }

  Cell moved(Cell c, int direction) const {
    switch (direction) {
      case kUp: c.y -= 1; break;
      case kDown: c.y += 1; break;
      case kLeft: c.x -= 1; break;
      case kRight: c.x += 1; break;
      default: break;
    }
    c.x = std::clamp(c.x, 0, config_.grid_size - 1);
    c.y = std::clamp(c.y, 0, config_.grid_size - 1);
    return c;
  }

 private:
  Cell random_cell(Rng& rng) const {
    const int x = uniform_int(rng, 0, config_.grid_size - 1);
    const int y = uniform_int(rng, 0, config_.grid_size - 1);
    return {x, y};
  }

  bool is_free(const State& s, Cell c) const {
    if (c == s.robot) return false;
    for (const Target& t : s.targets) {
      if (t.alive && t.cell == c) return false;
    }
    return true;
  }

  long occupied_count(const State& s) const { return 1 + live_targets(s); }

  Cell free_cell(const State& s, Rng& rng) const {
    for (;;) {
      const Cell c = random_cell(rng);
      if (is_free(s, c)) return c;
    }
  }

  void respawn(State& s, int i, Rng& rng) const {
    Target& t = s.targets[i];
    t.cell = free_cell(s, rng);
    t.heading = uniform_int(rng, 0, 3);
    t.remaining_life = config_.expiry_steps;
    t.alive = true;
  }

  void push_robot(std::vector<float>& out, Cell robot) const {
    const double denom = config_.grid_size > 1 ? config_.grid_size - 1 : 1;
    out.push_back(static_cast<float>(robot.x / denom));
    out.push_back(static_cast<float>(robot.y / denom));
  }

  void push_block(std::vector<float>& out, const State& s, const Target& t) const {
    const double g = config_.grid_size;
    out.push_back(static_cast<float>((t.cell.x - s.robot.x) / g));
    out.push_back(static_cast<float>((t.cell.y - s.robot.y) / g));
    out.push_back(static_cast<float>(static_cast<double>(t.remaining_life) / config_.expiry_steps));
    out.push_back(t.alive ? 1.0f : 0.0f);
  }

  Config config_;
  double discount_;
};

}  // namespace bidrl::catfeeder
