#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bidrl/errors.hpp"
#include "bidrl/observation.hpp"
#include "bidrl/rng.hpp"

namespace bidrl {

using RewardVector = std::vector<double>;
using ValueVector = std::vector<double>;

// Per-objective event flags reported next to the rewards. The evaluation
// score is (#completed - #failed), counted from these flags.
enum EventFlag : std::uint8_t {
  kNoEvent = 0,
  kCompleted = 1 << 0,
  kFailed = 1 << 1,
};

struct Transition {
  RewardVector rewards;              // one entry per objective slot
  std::vector<std::uint8_t> events;  // EventFlag bits, one per objective slot
  bool terminal = false;
};

// A multi-objective MDP with a discrete action set. Objectives live in
// slots; a slot whose objective is gone reports objective_alive() == false
// and receives zero reward.
template <class E>
concept MultiObjectiveEnv =
    requires(const E& env, typename E::State& state, const typename E::State& cstate, Rng& rng,
             int index) {
      typename E::State;
      { env.reset(rng) } -> std::same_as<typename E::State>;
      { env.step(state, index, rng) } -> std::same_as<Transition>;
      { env.num_objectives(cstate) } -> std::convertible_to<int>;
      { env.objective_alive(cstate, index) } -> std::convertible_to<bool>;
      { env.action_count() } -> std::convertible_to<int>;
      { env.discount() } -> std::convertible_to<double>;
      { env.is_terminal(cstate) } -> std::convertible_to<bool>;
      { env.observe(cstate, index) } -> std::same_as<Observation>;
    };

// Environments whose objective set can change at runtime.
template <class E>
concept AdaptiveObjectiveEnv =
    MultiObjectiveEnv<E> &&
    requires(const E& env, typename E::State& state, const typename E::ObjectiveDescriptor& desc,
             Rng& rng, int index) {
      { env.add_objective(state, desc, rng) } -> std::convertible_to<int>;
      { env.remove_objective(state, index) };
    };

// Component i is sum_t gamma^t * rewards[t][i]. An empty sequence yields a
// zero vector of length `num_objectives` (0 when not given).
inline ValueVector discounted_return(std::span<const RewardVector> rewards, double gamma,
                                     std::optional<std::size_t> num_objectives = std::nullopt) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidParameter("discount must lie in (0, 1), got " + std::to_string(gamma));
  }
  std::size_t m = num_objectives.value_or(rewards.empty() ? 0 : rewards.front().size());
  ValueVector out(m, 0.0);
  double weight = 1.0;
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    if (rewards[t].size() != m) {
      throw LengthMismatch("reward vector " + std::to_string(t) + " has length " +
                           std::to_string(rewards[t].size()) + ", expected " + std::to_string(m));
    }
    for (std::size_t i = 0; i < m; ++i) out[i] += weight * rewards[t][i];
    weight *= gamma;
  }
  return out;
}

}  // namespace bidrl
