#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bidrl/checkpoint.hpp"
#include "bidrl/distributions.hpp"
#include "bidrl/json_io.hpp"
#include "bidrl/network.hpp"
#include "bidrl/tasks.hpp"

namespace bidrl {

inline const std::vector<std::uint64_t> kDefaultSeeds{1825, 410, 4507, 4013, 3658};

// Evaluation episodes draw from streams disjoint from training rollouts.
inline constexpr std::uint64_t kEvalStreamOffset = 1'000'000;

struct AuctionLogRecord {
  std::uint64_t seed = 0;
  int episode = 0;
  int step = 0;
  std::vector<int> bids;
  int winner = 0;
  bool forced = false;
};

struct EvalReport {
  std::vector<std::uint64_t> seeds;
  int episodes = 0;                 // per seed
  std::vector<int> scores;          // seed-major, episodes per seed
  std::vector<double> seed_means;
  double mean = 0.0;
  double stddev = 0.0;
  Json env;
  std::vector<long long> control_histogram;            // timesteps per agent slot
  std::vector<std::vector<long long>> bid_histogram;   // [agent][bid level]
  long long auctions = 0;
  long long forced_auctions = 0;
  long long timesteps = 0;
  std::vector<AuctionLogRecord> auction_log;
};

inline double mean_of(std::span<const double> xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Population standard deviation.
inline double std_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  const double m = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

// Plays one episode in every environment of `task` with greedy (argmax)
// actions and bids, accumulating into `report`.
template <class Task>
void run_greedy_episodes(Task& task, const ActorCritic<float>& net, std::uint64_t seed, EvalReport& report,
                         bool log_auctions) {
  const int n_env = task.num_envs();
  const int m = task.agents();
  if (static_cast<int>(report.control_histogram.size()) < m) {
    report.control_histogram.resize(m, 0);
    report.bid_histogram.resize(m, std::vector<long long>(task.bid_levels(), 0));
  }
  std::vector<std::uint8_t> finished(n_env, 0);
  std::vector<int> step_of(n_env, 0);
  std::vector<int> score(n_env, 0);
  int remaining = n_env;
  ObservationBatch batch;
  std::vector<int> rows;
  std::vector<AgentChoice> choices(static_cast<std::size_t>(n_env) * m);
  std::vector<std::uint8_t> live(static_cast<std::size_t>(n_env) * m);
  VecStepResult result;
  while (remaining > 0) {
    task.observe(batch, rows);
    const auto pass = net.forward(batch, ActorCritic<float>::kActor);
    std::fill(choices.begin(), choices.end(), AgentChoice{});
    std::fill(live.begin(), live.end(), 0);
    for (int k = 0; k < static_cast<int>(rows.size()); ++k) {
      const std::span<const float> act(pass.action_logits.col(k).data(), pass.action_logits.rows());
      const std::span<const float> bid(pass.bid_logits.col(k).data(), pass.bid_logits.rows());
      choices[rows[k]] = {argmax(act), argmax(bid)};
      live[rows[k]] = 1;
    }
    task.step(choices, result);
    for (int e = 0; e < n_env; ++e) {
      if (finished[e]) continue;
      const EnvStepRecord& rec = result.records[e];
      report.control_histogram[rec.executed_agent] += 1;
      report.timesteps += 1;
      score[e] += rec.completed - rec.failed;
      if (rec.auction_held) {
        report.auctions += 1;
        report.forced_auctions += rec.forced_auction ? 1 : 0;
        for (int a = 0; a < m; ++a) {
          if (live[e * m + a]) report.bid_histogram[a][rec.bids[a]] += 1;
        }
        if (log_auctions) {
          report.auction_log.push_back({seed, e, step_of[e], rec.bids, rec.executed_agent, rec.forced_auction});
        }
      }
      step_of[e] += 1;
      if (rec.done) {
        finished[e] = 1;
        --remaining;
      }
    }
  }
  report.scores.insert(report.scores.end(), score.begin(), score.end());
  double total = 0.0;
  for (int s : score) total += s;
  report.seed_means.push_back(total / n_env);
}

inline void finalize(EvalReport& report) {
  std::vector<double> xs(report.scores.begin(), report.scores.end());
  report.mean = mean_of(xs);
  report.stddev = std_of(xs);
}

struct EvalSetup {
  catfeeder::Config env;
  AuctionParams auction;
  TrainMode mode = TrainMode::MultiAgentBidding;
  int episodes = 16;
  std::vector<std::uint64_t> seeds = kDefaultSeeds;
  int workers = 1;
  bool log_auctions = false;
};

inline EvalReport evaluate(const ActorCritic<float>& net, const EvalSetup& setup) {
  setup.env.validate();
  setup.auction.validate();
  if (setup.episodes < 1) throw InvalidParameter("eval.episodes must be >= 1");
  EvalReport report;
  report.seeds = setup.seeds;
  report.episodes = setup.episodes;
  report.env = to_json(setup.env);
  for (std::uint64_t seed : setup.seeds) {
    if (is_single(setup.mode)) {
      ScalarizedTask task(setup.env, setup.mode, setup.episodes, seed, setup.workers, kEvalStreamOffset);
      run_greedy_episodes(task, net, seed, report, setup.log_auctions);
    } else {
      BiddingTask task(setup.env, setup.auction, setup.episodes, seed, !net.config().use_attention_pooling,
                       setup.workers, kEvalStreamOffset);
      run_greedy_episodes(task, net, seed, report, setup.log_auctions);
    }
  }
  finalize(report);
  return report;
}

inline ObservationLayout layout_for(const catfeeder::Config& env, TrainMode mode) {
  if (is_single(mode)) return {catfeeder::kRobotDim, catfeeder::kBlockDim, env.num_targets};
  return {catfeeder::kSelfDim, catfeeder::kBlockDim, env.num_targets - 1};
}

// Evaluates a checkpoint after checking it fits the environment and auction.
inline EvalReport evaluate(const Checkpoint& ckpt, const EvalSetup& setup) {
  setup.env.validate();
  const long cells = static_cast<long>(setup.env.grid_size) * setup.env.grid_size;
  if (setup.env.num_targets + 1 > cells) {
    throw CapacityError(std::to_string(setup.env.num_targets) + " targets do not fit a " +
                        std::to_string(setup.env.grid_size) + "x" + std::to_string(setup.env.grid_size) + " grid");
  }
  check_compatible(ckpt, layout_for(setup.env, setup.mode), is_single(setup.mode) ? 1 : setup.auction.bid_levels());
  return evaluate(ckpt.model(), setup);
}

struct SweepPoint {
  double value = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<EvalReport> reports;  // one per seed
  double mean() const {
    std::vector<double> xs;
    for (const EvalReport& r : reports) xs.push_back(r.mean);
    return mean_of(xs);
  }
  double stddev() const {
    std::vector<double> xs;
    for (const EvalReport& r : reports) xs.push_back(r.mean);
    return std_of(xs);
  }
};

struct SweepResult {
  std::string param;
  std::vector<SweepPoint> points;
};

// Evaluates one checkpoint at several target counts with no retraining.
inline SweepResult scaling_experiment(const Checkpoint& ckpt, const EvalSetup& base, std::span<const int> counts) {
  if (!ckpt.network.use_attention_pooling) {
    for (int c : counts) {
      if (c - 1 != ckpt.layout.fixed_blocks) {
        throw LayoutMismatch("checkpoint without attention pooling cannot evaluate " + std::to_string(c) +
                             " targets (trained with " + std::to_string(ckpt.layout.fixed_blocks + 1) + ")");
      }
    }
  }
  SweepResult out;
  out.param = "targets";
  for (int c : counts) {
    EvalSetup setup = base;
    setup.env.num_targets = c;
    SweepPoint point;
    point.value = c;
    for (std::uint64_t seed : base.seeds) {
      setup.seeds = {seed};
      point.seeds.push_back(seed);
      point.reports.push_back(evaluate(ckpt, setup));
    }
    out.points.push_back(std::move(point));
  }
  return out;
}

}  // namespace bidrl
