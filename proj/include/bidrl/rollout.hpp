#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bidrl/bidding_game.hpp"
#include "bidrl/distributions.hpp"
#include "bidrl/errors.hpp"
#include "bidrl/network.hpp"
#include "bidrl/observation.hpp"
#include "bidrl/tasks.hpp"

namespace bidrl {

// Per-agent transitions pooled over environments. Entry (t, env, agent) has
// index (t * envs + env) * agents + agent.
struct RolloutBuffer {
  int steps = 0;
  int envs = 0;
  int agents = 0;
  int self_dim = 0;
  int block_dim = 0;

  std::vector<float> self;          // entries * self_dim
  std::vector<float> blocks;        // ragged, block_dim per block
  std::vector<int> block_offsets;   // entries + 1
  std::vector<int> action;
  std::vector<int> bid;
  std::vector<float> log_prob;
  std::vector<float> value;
  std::vector<double> reward;       // includes bid penalties and shaping
  std::vector<double> penalty;      // bid penalty part of `reward`
  std::vector<std::uint8_t> done;   // episode ended with this transition
  std::vector<std::uint8_t> valid;  // agent was live and acted
  std::vector<float> bootstrap_value;          // envs * agents, V(s_T)
  std::vector<std::uint8_t> bootstrap_valid;   // envs * agents

  // Per (t, env): auction bookkeeping for penalty reconciliation.
  std::vector<std::uint8_t> auction_held;
  std::vector<int> executed_agent;

  std::vector<float> advantages;
  std::vector<float> returns;

  int entries() const { return steps * envs * agents; }
  int index(int t, int env, int agent) const { return (t * envs + env) * agents + agent; }

  void reset(int num_steps, int num_envs, int num_agents, int self_width, int block_width) {
    steps = num_steps;
    envs = num_envs;
    agents = num_agents;
    self_dim = self_width;
    block_dim = block_width;
    const std::size_t n = static_cast<std::size_t>(entries());
    self.assign(n * self_dim, 0.0f);
    blocks.clear();
    block_offsets.assign(n + 1, 0);
    action.assign(n, 0);
    bid.assign(n, 0);
    log_prob.assign(n, 0.0f);
    value.assign(n, 0.0f);
    reward.assign(n, 0.0);
    penalty.assign(n, 0.0);
    done.assign(n, 0);
    valid.assign(n, 0);
    bootstrap_value.assign(static_cast<std::size_t>(envs) * agents, 0.0f);
    bootstrap_valid.assign(static_cast<std::size_t>(envs) * agents, 0);
    auction_held.assign(static_cast<std::size_t>(steps) * envs, 0);
    executed_agent.assign(static_cast<std::size_t>(steps) * envs, 0);
    advantages.assign(n, 0.0f);
    returns.assign(n, 0.0f);
  }

  int valid_count() const {
    int n = 0;
    for (std::uint8_t v : valid) n += v;
    return n;
  }

  // Gathers the observations of the listed entries into a network batch.
  void gather(std::span<const int> idx, ObservationBatch& batch) const {
    batch.clear(self_dim, block_dim);
    for (int i : idx) {
      const int lo = block_offsets[i];
      const int hi = block_offsets[i + 1];
      batch.push(self.data() + static_cast<std::size_t>(i) * self_dim,
                 blocks.data() + static_cast<std::size_t>(lo) * block_dim, hi - lo);
    }
  }
};

// GAE over one stream of length T:
//   delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
//   A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
// with V_T = bootstrap.
inline std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                               std::span<const std::uint8_t> dones, double bootstrap, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw LengthMismatch("gae inputs differ in length");
  std::vector<double> adv(n, 0.0);
  double next_adv = 0.0;
  double next_value = bootstrap;
  for (std::size_t k = n; k-- > 0;) {
    const double live = dones[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * next_value * live - values[k];
    next_adv = delta + gamma * lambda * live * next_adv;
    adv[k] = next_adv;
    next_value = values[k];
  }
  return adv;
}

// Fills buffer.advantages/returns, independently per (env, agent) stream.
// Invalid entries get zero advantage; a live entry followed by an invalid
// one (agent gone without the episode ending) bootstraps with zero.
inline void compute_gae(RolloutBuffer& buf, double gamma, double lambda) {
  for (int e = 0; e < buf.envs; ++e) {
    for (int a = 0; a < buf.agents; ++a) {
      double next_adv = 0.0;
      double next_value = buf.bootstrap_value[e * buf.agents + a];
      bool next_valid = buf.bootstrap_valid[e * buf.agents + a] != 0;
      for (int t = buf.steps; t-- > 0;) {
        const int i = buf.index(t, e, a);
        if (!buf.valid[i]) {
          buf.advantages[i] = 0.0f;
          buf.returns[i] = 0.0f;
          next_adv = 0.0;
          next_value = 0.0;
          next_valid = false;
          continue;
        }
        const double live = (buf.done[i] || !next_valid) ? 0.0 : 1.0;
        const double delta = buf.reward[i] + gamma * next_value * live - buf.value[i];
        next_adv = delta + gamma * lambda * live * next_adv;
        buf.advantages[i] = static_cast<float>(next_adv);
        buf.returns[i] = static_cast<float>(next_adv + buf.value[i]);
        next_value = buf.value[i];
        next_valid = true;
      }
    }
  }
}

// Steps every environment of `task` for `steps` steps, sampling each live
// agent's (action, bid) from the shared policy on its own observation.
template <class Task>
void collect_rollouts(Task& task, const ActorCritic<float>& net, int steps, RolloutBuffer& buf) {
  const int n_env = task.num_envs();
  const int m = task.agents();
  const ObservationLayout layout = task.layout();
  buf.reset(steps, n_env, m, layout.self_dim, layout.block_dim);

  ObservationBatch batch;
  std::vector<int> rows;
  std::vector<AgentChoice> choices(static_cast<std::size_t>(n_env) * m);
  VecStepResult result;

  for (int t = 0; t < steps; ++t) {
    task.observe(batch, rows);
    const auto pass = net.forward(batch, ActorCritic<float>::kBoth);
    std::fill(choices.begin(), choices.end(), AgentChoice{});
    for (int k = 0; k < static_cast<int>(rows.size()); ++k) {
      const int env = rows[k] / m;
      const int agent = rows[k] % m;
      const std::span<const float> act(pass.action_logits.col(k).data(), pass.action_logits.rows());
      const std::span<const float> bidl(pass.bid_logits.col(k).data(), pass.bid_logits.rows());
      const PolicySample s = sample_policy(act, bidl, task.rng(env));
      choices[rows[k]] = {s.action, s.bid};

      const int i = buf.index(t, env, agent);
      buf.valid[i] = 1;
      buf.action[i] = s.action;
      buf.bid[i] = s.bid;
      buf.log_prob[i] = static_cast<float>(s.log_prob);
      buf.value[i] = pass.value(k);
      std::copy_n(batch.self.data() + static_cast<std::size_t>(k) * layout.self_dim, layout.self_dim,
                  buf.self.data() + static_cast<std::size_t>(i) * layout.self_dim);
    }
    // Blocks are appended in entry order so offsets stay monotone.
    {
      std::size_t k = 0;
      for (int env = 0; env < n_env; ++env) {
        for (int agent = 0; agent < m; ++agent) {
          const int i = buf.index(t, env, agent);
          int count = 0;
          if (k < rows.size() && rows[k] == env * m + agent) {
            const int lo = batch.offsets[k];
            const int hi = batch.offsets[k + 1];
            buf.blocks.insert(buf.blocks.end(), batch.blocks.begin() + static_cast<std::ptrdiff_t>(lo) * layout.block_dim,
                              batch.blocks.begin() + static_cast<std::ptrdiff_t>(hi) * layout.block_dim);
            count = hi - lo;
            ++k;
          }
          buf.block_offsets[i + 1] = buf.block_offsets[i] + count;
        }
      }
    }

    task.step(choices, result);
    for (int env = 0; env < n_env; ++env) {
      const EnvStepRecord& rec = result.records[env];
      buf.auction_held[static_cast<std::size_t>(t) * n_env + env] = rec.auction_held ? 1 : 0;
      buf.executed_agent[static_cast<std::size_t>(t) * n_env + env] = rec.executed_agent;
      for (int agent = 0; agent < m; ++agent) {
        const int i = buf.index(t, env, agent);
        buf.reward[i] = result.rewards[env * m + agent];
        buf.penalty[i] = result.penalties[env * m + agent];
        buf.done[i] = rec.done ? 1 : 0;
      }
    }
  }

  task.observe(batch, rows);
  const auto tail = net.forward(batch, ActorCritic<float>::kCritic);
  for (int k = 0; k < static_cast<int>(rows.size()); ++k) {
    buf.bootstrap_value[rows[k]] = tail.value(k);
    buf.bootstrap_valid[rows[k]] = 1;
  }
}

}  // namespace bidrl
