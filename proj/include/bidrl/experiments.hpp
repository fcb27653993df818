#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bidrl/checkpoint.hpp"
#include "bidrl/config.hpp"
#include "bidrl/csv.hpp"
#include "bidrl/errors.hpp"
#include "bidrl/eval.hpp"
#include "bidrl/json_io.hpp"
#include "bidrl/trainer.hpp"

namespace bidrl {

inline std::string curve_csv(const std::vector<CurveRecord>& curve) {
  csv::Writer w({"iteration", "env_steps", "mean_score", "std_score", "policy_loss", "value_loss", "entropy",
                 "clip_frac", "approx_kl"});
  for (const CurveRecord& r : curve) {
    w.row({csv::num(r.iteration), csv::num(r.env_steps), csv::num(r.mean_score), csv::num(r.std_score),
           csv::num(r.policy_loss), csv::num(r.value_loss), csv::num(r.entropy), csv::num(r.clip_frac),
           csv::num(r.approx_kl)});
  }
  return w.str();
}

inline std::string scores_csv(const EvalReport& report) {
  csv::Writer w({"seed", "episode", "score"});
  for (std::size_t k = 0; k < report.scores.size(); ++k) {
    const std::size_t s = k / static_cast<std::size_t>(report.episodes);
    w.row({csv::num(static_cast<unsigned long long>(report.seeds[s])),
           csv::num(static_cast<int>(k % report.episodes)), csv::num(report.scores[k])});
  }
  return w.str();
}

inline std::string summary_csv(const EvalReport& report) {
  csv::Writer w({"seeds", "episodes", "mean", "std", "timesteps", "auctions", "forced_auctions"});
  w.row({csv::join(report.seeds), csv::num(report.episodes), csv::num(report.mean), csv::num(report.stddev),
         csv::num(report.timesteps), csv::num(report.auctions), csv::num(report.forced_auctions)});
  return w.str();
}

inline std::string control_csv(const EvalReport& report) {
  csv::Writer w({"agent", "timesteps"});
  for (std::size_t a = 0; a < report.control_histogram.size(); ++a) {
    w.row({csv::num(static_cast<int>(a)), csv::num(report.control_histogram[a])});
  }
  return w.str();
}

inline std::string bids_csv(const EvalReport& report) {
  csv::Writer w({"agent", "bid", "count"});
  for (std::size_t a = 0; a < report.bid_histogram.size(); ++a) {
    for (std::size_t b = 0; b < report.bid_histogram[a].size(); ++b) {
      w.row({csv::num(static_cast<int>(a)), csv::num(static_cast<int>(b)), csv::num(report.bid_histogram[a][b])});
    }
  }
  return w.str();
}

// One JSON object per auction: seed, episode, step, bids, winner, forced.
inline std::string auctions_jsonl(const EvalReport& report) {
  std::string out;
  for (const AuctionLogRecord& r : report.auction_log) {
    out += Json{{"seed", r.seed},     {"episode", r.episode}, {"step", r.step},
                {"bids", r.bids},     {"winner", r.winner},   {"forced", r.forced}}
               .dump();
    out += '\n';
  }
  return out;
}

inline std::string sweep_csv(const SweepResult& sweep) {
  csv::Writer w({"param", "value", "seed", "mean", "std", "episodes"});
  for (const SweepPoint& p : sweep.points) {
    for (std::size_t k = 0; k < p.reports.size(); ++k) {
      const EvalReport& r = p.reports[k];
      w.row({sweep.param, csv::num(p.value), csv::num(static_cast<unsigned long long>(p.seeds[k])),
             csv::num(r.mean), csv::num(r.stddev), csv::num(r.episodes)});
    }
  }
  return w.str();
}

enum class AblationParam { BidUpperBound, BidPenalty, ActionWindow };

inline std::string_view to_string(AblationParam p) {
  switch (p) {
    case AblationParam::BidUpperBound: return "bid_upper_bound";
    case AblationParam::BidPenalty: return "bid_penalty";
    case AblationParam::ActionWindow: return "action_window";
  }
  return "bid_upper_bound";
}

inline AblationParam ablation_param_from_string(std::string_view name) {
  for (AblationParam p : {AblationParam::BidUpperBound, AblationParam::BidPenalty, AblationParam::ActionWindow}) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("unknown sweep parameter '" + std::string(name) +
                    "' (valid: bid_upper_bound, bid_penalty, action_window, targets)");
}

inline void apply_ablation(AuctionParams& auction, AblationParam param, double value) {
  auto integral = [&](const char* what) {
    if (value != std::floor(value)) {
      throw InvalidParameter(std::string(what) + " grid values must be integers, got " + csv::num(value));
    }
    return static_cast<int>(value);
  };
  switch (param) {
    case AblationParam::BidUpperBound: auction.beta = integral("bid_upper_bound"); break;
    case AblationParam::BidPenalty: auction.rho = value; break;
    case AblationParam::ActionWindow: auction.tau = integral("action_window"); break;
  }
  auction.validate();
}

struct AblationRun {
  double value = 0.0;
  std::uint64_t seed = 0;
  const TrainResult* result = nullptr;
  const EvalReport* report = nullptr;
};

// Retrains from scratch at every (grid value, seed) with everything else
// fixed, then evaluates the final checkpoint with that seed.
inline SweepResult ablation_sweep(const TrainSetup& base, AblationParam param, const std::vector<double>& grid,
                                  const std::vector<std::uint64_t>& seeds, int eval_episodes,
                                  const std::function<void(const AblationRun&)>& on_run = {},
                                  const TrainHooks& hooks = {}) {
  if (is_single(base.train.mode)) throw InvalidParameter("ablations apply to the bidding mode");
  SweepResult out;
  out.param = std::string(to_string(param));
  for (double value : grid) {
    TrainSetup setup = base;
    apply_ablation(setup.auction, param, value);
    SweepPoint point;
    point.value = value;
    for (std::uint64_t seed : seeds) {
      const TrainResult result = train(setup, seed, hooks);
      EvalSetup eval;
      eval.env = setup.env;
      eval.auction = setup.auction;
      eval.mode = setup.train.mode;
      eval.episodes = eval_episodes;
      eval.seeds = {seed};
      eval.workers = setup.train.workers;
      EvalReport report = evaluate(result.checkpoint, eval);
      if (on_run) on_run({value, seed, &result, &report});
      point.seeds.push_back(seed);
      point.reports.push_back(std::move(report));
    }
    out.points.push_back(std::move(point));
  }
  return out;
}

inline TrainMode checkpoint_mode(const Checkpoint& ckpt) {
  return train_mode_from_string(ckpt.metadata.value("mode", std::string("bidding")));
}

inline AuctionParams checkpoint_auction(const Checkpoint& ckpt) {
  AuctionParams a;
  if (ckpt.metadata.contains("auction")) from_json(ckpt.metadata.at("auction"), a, "metadata.auction");
  return a;
}

inline catfeeder::Config checkpoint_env(const Checkpoint& ckpt) {
  catfeeder::Config c;
  if (ckpt.metadata.contains("env")) from_json(ckpt.metadata.at("env"), c, "metadata.env");
  return c;
}

inline Method checkpoint_method(const Checkpoint& ckpt) {
  return method_of(checkpoint_mode(ckpt), checkpoint_auction(ckpt).penalty_model);
}

struct MethodRuns {
  std::string method;
  std::vector<Checkpoint> checkpoints;  // one per seed
};

struct CompareRow {
  std::string method;
  double mean = 0.0;
  double stddev = 0.0;  // across per-seed means
  std::vector<std::uint64_t> seeds;
  std::vector<double> seed_means;
  long long env_steps = 0;
};

// Evaluates every method's checkpoints on the shared `env` (each with its
// training seed) after checking that all of them saw the same number of
// environment steps.
inline std::vector<CompareRow> compare_baselines(const std::vector<MethodRuns>& runs, const catfeeder::Config& env,
                                                 int episodes, int workers = 1,
                                                 const std::vector<std::string>& required = {}) {
  std::vector<std::string> missing;
  std::vector<std::string> want = required;
  if (want.empty()) {
    for (const Method& m : all_methods()) want.push_back(m.name);
  }
  for (const std::string& name : want) {
    const auto it = std::find_if(runs.begin(), runs.end(), [&](const MethodRuns& r) { return r.method == name; });
    if (it == runs.end() || it->checkpoints.empty()) missing.push_back(name);
  }
  if (!missing.empty()) {
    std::string list;
    for (const std::string& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw CheckpointError("missing checkpoints for: " + list);
  }

  std::optional<long long> budget;
  for (const MethodRuns& r : runs) {
    for (const Checkpoint& c : r.checkpoints) {
      const long long steps = c.metadata.value("env_steps", -1LL);
      if (!budget) budget = steps;
      if (steps != *budget) {
        throw InvalidParameter("unequal env-step budgets: " + r.method + " has " + std::to_string(steps) +
                               ", expected " + std::to_string(*budget));
      }
    }
  }

  std::vector<CompareRow> rows;
  for (const MethodRuns& r : runs) {
    CompareRow row;
    row.method = r.method;
    row.env_steps = budget.value_or(0);
    for (const Checkpoint& c : r.checkpoints) {
      EvalSetup eval;
      eval.env = env;
      eval.auction = checkpoint_auction(c);
      eval.mode = checkpoint_mode(c);
      eval.episodes = episodes;
      eval.workers = workers;
      const std::uint64_t seed = c.metadata.value("seed", std::uint64_t{0});
      eval.seeds = {seed};
      row.seeds.push_back(seed);
      row.seed_means.push_back(evaluate(c, eval).mean);
    }
    row.mean = mean_of(row.seed_means);
    row.stddev = std_of(row.seed_means);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string compare_csv(const std::vector<CompareRow>& rows) {
  csv::Writer w({"method", "mean", "std", "seeds", "env_steps"});
  for (const CompareRow& r : rows) {
    w.row({r.method, csv::num(r.mean), csv::num(r.stddev), csv::join(r.seeds), csv::num(r.env_steps)});
  }
  return w.str();
}

}  // namespace bidrl
