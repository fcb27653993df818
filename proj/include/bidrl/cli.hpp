#pragma once

#include <CLI11.hpp>

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bidrl/checkpoint.hpp"
#include "bidrl/config.hpp"
#include "bidrl/csv.hpp"
#include "bidrl/errors.hpp"
#include "bidrl/eval.hpp"
#include "bidrl/experiments.hpp"
#include "bidrl/json_io.hpp"
#include "bidrl/render.hpp"
#include "bidrl/trainer.hpp"

namespace bidrl::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr const char* kOutputRootEnv = "BIDRL_OUTPUT_ROOT";

// Set from a signal handler; training polls it between iterations.
inline std::atomic<bool>& stop_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("short write to " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline Json read_config_file(const fs::path& path) {
  const std::string text = read_text(path);
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
  return j;
}

inline std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || item.front() == '-') {
      throw ConfigError("--seeds: '" + item + "' is not a non-negative integer");
    }
    seeds.push_back(v);
  }
  if (seeds.empty()) throw ConfigError("--seeds: empty list");
  return seeds;
}

inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("--grid: '" + item + "' is not a number");
    grid.push_back(v);
  }
  if (grid.empty()) throw ConfigError("--grid: empty list");
  return grid;
}

inline fs::path output_root(const std::string& flag, const std::string& configured) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return configured;
}

// Options shared by the commands that build a RunConfig.
struct ConfigOptions {
  std::string profile;
  std::string mode;
  std::string config_path;
  std::vector<std::string> overrides;
  std::string seeds;
  std::string out;
  std::string name;
  int workers = 0;

  void attach(CLI::App* cmd, bool with_mode = true) {
    cmd->add_option("--profile", profile, "Built-in defaults: paper or desk");
    if (with_mode) cmd->add_option("--mode", mode, "all-pay, winner-pays, single-sparse, single-ns or single-es");
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--set", overrides, "Override one key, e.g. auction.bid_penalty=0.5")->take_all();
    cmd->add_option("--seeds", seeds, "Comma-separated seed list");
    cmd->add_option("--out", out, "Output root (default: $BIDRL_OUTPUT_ROOT or output_dir)");
    cmd->add_option("--name", name, "Run name");
    cmd->add_option("--workers", workers, "Environment worker threads");
  }

  RunConfig resolve(std::optional<std::string> forced_mode = std::nullopt) const {
    ConfigRequest req;
    if (!profile.empty()) req.profile = profile;
    if (forced_mode) {
      req.mode = *forced_mode;
    } else if (!mode.empty()) {
      req.mode = mode;
    }
    if (!config_path.empty()) req.file = read_config_file(config_path);
    req.overrides = overrides;
    RunConfig rc = resolve_config(req);
    if (!seeds.empty()) rc.train.seeds = rc.eval.seeds = parse_seeds(seeds);
    if (!name.empty()) rc.run_name = name;
    if (workers > 0) rc.train.workers = workers;
    rc.output_dir = output_root(out, rc.output_dir).string();
    validate(rc);
    return rc;
  }
};

inline void print_curve_record(std::ostream& out, const std::string& tag, const CurveRecord& r) {
  out << tag << " iter " << r.iteration << " env_steps " << r.env_steps << " score " << csv::num(r.mean_score)
      << " +- " << csv::num(r.std_score) << '\n'
      << std::flush;
}

struct SeedRun {
  fs::path dir;
  TrainResult result;
};

// Trains one seed into `dir`: config.lock first, then periodic checkpoints,
// curve.csv and ckpt_final (ckpt_interrupted on a stop request).
inline SeedRun train_seed(const RunConfig& rc, std::uint64_t seed, const fs::path& dir, std::ostream& out) {
  RunConfig lock = rc;
  lock.train.seeds = {seed};
  fs::create_directories(dir);
  write_text(dir / "config.lock", config_lock_text(lock));
  TrainHooks hooks;
  const std::string tag = rc.method().name + " seed " + std::to_string(seed);
  hooks.on_eval = [&](const CurveRecord& r) { print_curve_record(out, tag, r); };
  hooks.on_checkpoint = [&](const Checkpoint& c, int it) {
    save_checkpoint(c, dir / ("ckpt_" + std::to_string(it)));
  };
  hooks.should_stop = [] { return stop_flag().load(); };
  SeedRun run{dir, train_any(lock.setup(), seed, hooks)};
  write_text(dir / "curve.csv", curve_csv(run.result.curve));
  if (run.result.interrupted) {
    Checkpoint c = run.result.checkpoint;
    c.metadata["interrupted"] = true;
    save_checkpoint(c, dir / "ckpt_interrupted");
  } else {
    save_checkpoint(run.result.checkpoint, dir / "ckpt_final");
  }
  return run;
}

inline fs::path seed_dir(const fs::path& run_dir, std::uint64_t seed, std::size_t seed_count) {
  return seed_count == 1 ? run_dir : run_dir / ("seed-" + std::to_string(seed));
}

inline int cmd_train(const ConfigOptions& opt, std::ostream& out) {
  const RunConfig rc = opt.resolve();
  const fs::path run_dir = fs::path(rc.output_dir) / rc.run_name;
  fs::create_directories(run_dir);
  if (rc.train.seeds.size() > 1) write_text(run_dir / "config.lock", config_lock_text(rc));
  for (std::uint64_t seed : rc.train.seeds) {
    const SeedRun run = train_seed(rc, seed, seed_dir(run_dir, seed, rc.train.seeds.size()), out);
    if (run.result.interrupted) {
      out << "interrupted at iteration " << run.result.iterations_done << "; checkpoint written to "
          << (run.dir / "ckpt_interrupted").string() << '\n';
      return kExitRuntime;
    }
    out << "wrote " << run.dir.string() << '\n';
  }
  return kExitOk;
}

inline void write_report(const fs::path& dir, const EvalReport& report) {
  write_text(dir / "scores.csv", scores_csv(report));
  write_text(dir / "summary.csv", summary_csv(report));
  write_text(dir / "control.csv", control_csv(report));
  write_text(dir / "bids.csv", bids_csv(report));
  write_text(dir / "auctions.jsonl", auctions_jsonl(report));
}

struct EvalOptions {
  std::string checkpoint;
  std::vector<std::string> overrides;  // env.* / auction.* / eval.*
  std::string seeds;
  int episodes = 0;
  int targets = 0;
  std::string out;
  int workers = 1;
};

// Environment, auction and eval settings for a checkpoint: the values it was
// trained with, then --set overrides.
inline EvalSetup eval_setup_for(const Checkpoint& ckpt, const std::vector<std::string>& overrides) {
  Json doc{{"env", to_json(checkpoint_env(ckpt))},
           {"auction", to_json(checkpoint_auction(ckpt))},
           {"eval", Json{{"episodes", 16}, {"seeds", kDefaultSeeds}}}};
  for (const std::string& o : overrides) apply_override(doc, o);
  EvalSetup setup;
  from_json(doc.at("env"), setup.env, "env");
  from_json(doc.at("auction"), setup.auction, "auction");
  StrictReader e(doc.at("eval"), "eval");
  e.read("episodes", setup.episodes);
  e.read("seeds", setup.seeds);
  e.finish();
  setup.mode = checkpoint_mode(ckpt);
  try {
    setup.env.validate();
    setup.auction.validate();
    if (setup.episodes < 1) throw InvalidParameter("eval.episodes must be >= 1");
    if (setup.seeds.empty()) throw InvalidParameter("eval.seeds must not be empty");
  } catch (const InvalidParameter& err) {
    throw ConfigError(err.what());
  }
  return setup;
}

inline int cmd_eval(const EvalOptions& opt, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(opt.checkpoint);
  EvalSetup setup = eval_setup_for(ckpt, opt.overrides);
  if (!opt.seeds.empty()) setup.seeds = parse_seeds(opt.seeds);
  if (opt.episodes > 0) setup.episodes = opt.episodes;
  setup.workers = std::max(1, opt.workers);
  setup.log_auctions = true;
  const fs::path dir = opt.out.empty() ? fs::path(opt.checkpoint).parent_path() / "eval" : fs::path(opt.out);
  if (opt.targets > 0) {
    const std::vector<int> counts{opt.targets};
    const SweepResult sweep = scaling_experiment(ckpt, setup, counts);
    write_text(dir / "scaling.csv", sweep_csv(sweep));
    const SweepPoint& p = sweep.points.front();
    out << "targets " << opt.targets << " mean " << csv::num(p.mean()) << " std " << csv::num(p.stddev()) << '\n';
    return kExitOk;
  }
  const EvalReport report = evaluate(ckpt, setup);
  write_report(dir, report);
  out << "mean " << csv::num(report.mean) << " std " << csv::num(report.stddev) << " over "
      << report.scores.size() << " episodes; report in " << dir.string() << '\n';
  return kExitOk;
}

struct RolloutOptions {
  std::string checkpoint;
  std::vector<std::string> overrides;
  std::uint64_t seed = kDefaultSeeds[0];
  std::string out;
  bool print = false;
};

inline int cmd_rollout(const RolloutOptions& opt, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(opt.checkpoint);
  const EvalSetup setup = eval_setup_for(ckpt, opt.overrides);
  const std::vector<TraceStep> trace = rollout_episode(ckpt, setup.env, setup.auction, setup.mode, opt.seed);
  std::string jsonl;
  std::string frames;
  for (const TraceStep& t : trace) {
    jsonl += to_json(t).dump() + '\n';
    frames += render_frame(t, setup.env.grid_size) + '\n';
  }
  const fs::path dir =
      opt.out.empty() ? fs::path(opt.checkpoint).parent_path() / ("rollout-" + std::to_string(opt.seed)) : fs::path(opt.out);
  write_text(dir / "trace.jsonl", jsonl);
  write_text(dir / "frames.txt", frames);
  if (opt.print) out << frames;
  out << trace.size() << " steps, score " << (trace.empty() ? 0 : trace.back().score) << "; frames in "
      << (dir / "frames.txt").string() << '\n';
  return kExitOk;
}

struct SweepOptions {
  ConfigOptions config;
  std::string param;
  std::string grid;
  std::string checkpoint;  // for --param targets
  int episodes = 0;
};

inline int cmd_sweep(const SweepOptions& opt, std::ostream& out) {
  const std::vector<double> grid = parse_grid(opt.grid);
  if (opt.param == "targets") {
    if (opt.checkpoint.empty()) throw ConfigError("--param targets needs --checkpoint");
    std::vector<int> counts;
    for (double v : grid) {
      if (v != std::floor(v) || v < 1) throw ConfigError("--grid: target counts must be positive integers");
      counts.push_back(static_cast<int>(v));
    }
    const Checkpoint ckpt = load_checkpoint(opt.checkpoint);
    EvalSetup setup = eval_setup_for(ckpt, opt.config.overrides);
    if (!opt.config.seeds.empty()) setup.seeds = parse_seeds(opt.config.seeds);
    if (opt.episodes > 0) setup.episodes = opt.episodes;
    setup.workers = std::max(1, opt.config.workers);
    const SweepResult sweep = scaling_experiment(ckpt, setup, counts);
    const fs::path dir = opt.config.out.empty() ? fs::path(opt.checkpoint).parent_path() / "scaling"
                                                : fs::path(opt.config.out);
    write_text(dir / "sweep.csv", sweep_csv(sweep));
    for (const SweepPoint& p : sweep.points) {
      out << "targets " << csv::num(p.value) << " mean " << csv::num(p.mean()) << " std " << csv::num(p.stddev())
          << '\n';
    }
    return kExitOk;
  }

  const AblationParam param = ablation_param_from_string(opt.param);
  RunConfig rc = opt.config.resolve();
  if (is_single(rc.train.mode)) throw ConfigError("ablation sweeps need a bidding mode (all-pay or winner-pays)");
  if (opt.config.name.empty()) rc.run_name = "sweep-" + opt.param;
  const fs::path dir = fs::path(rc.output_dir) / rc.run_name;
  write_text(dir / "config.lock", config_lock_text(rc));
  for (double v : grid) {
    AuctionParams probe = rc.auction;
    try {
      apply_ablation(probe, param, v);
    } catch (const InvalidParameter& e) {
      throw ConfigError(std::string("--grid: ") + e.what());
    }
  }
  TrainHooks hooks;
  hooks.should_stop = [] { return stop_flag().load(); };
  bool interrupted = false;
  const int episodes = opt.episodes > 0 ? opt.episodes : rc.eval.episodes;
  const SweepResult sweep = ablation_sweep(
      rc.setup(), param, grid, rc.train.seeds, episodes,
      [&](const AblationRun& run) {
        const fs::path d = dir / (opt.param + "-" + csv::num(run.value)) / ("seed-" + std::to_string(run.seed));
        write_text(d / "curve.csv", curve_csv(run.result->curve));
        save_checkpoint(run.result->checkpoint, d / (run.result->interrupted ? "ckpt_interrupted" : "ckpt_final"));
        interrupted = interrupted || run.result->interrupted;
        out << opt.param << "=" << csv::num(run.value) << " seed " << run.seed << " mean "
            << csv::num(run.report->mean) << '\n'
            << std::flush;
      },
      hooks);
  write_text(dir / "sweep.csv", sweep_csv(sweep));
  out << "wrote " << (dir / "sweep.csv").string() << '\n';
  return interrupted ? kExitRuntime : kExitOk;
}

struct CompareOptions {
  ConfigOptions config;
  bool train = false;
  int episodes = 0;
};

// Expects <root>/<name>/<Method>/seed-<s>/ckpt_final for every method and
// seed; with --train, missing runs are trained first.
inline int cmd_compare(const CompareOptions& opt, std::ostream& out) {
  const RunConfig base = opt.config.resolve("all-pay");
  const fs::path dir = fs::path(base.output_dir) / (opt.config.name.empty() ? "compare" : opt.config.name);
  std::vector<MethodRuns> runs;
  for (const Method& m : all_methods()) {
    ConfigOptions per = opt.config;
    per.name = m.name;
    per.out = dir.string();
    RunConfig rc = per.resolve(m.name);
    MethodRuns mr{m.name, {}};
    for (std::uint64_t seed : rc.train.seeds) {
      const fs::path sdir = dir / m.name / ("seed-" + std::to_string(seed));
      if (!fs::exists(sdir / "ckpt_final")) {
        if (!opt.train) continue;
        const SeedRun run = train_seed(rc, seed, sdir, out);
        if (run.result.interrupted) return kExitRuntime;
      }
      mr.checkpoints.push_back(load_checkpoint(sdir / "ckpt_final"));
    }
    runs.push_back(std::move(mr));
  }
  const int episodes = opt.episodes > 0 ? opt.episodes : base.eval.episodes;
  const std::vector<CompareRow> rows = compare_baselines(runs, base.env, episodes, base.train.workers);
  const std::string table = compare_csv(rows);
  write_text(dir / "compare.csv", table);
  out << table;
  return kExitOk;
}

// Parses argv and dispatches; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Auction-based multi-policy reinforcement learning on Cat Feeder"};
  app.require_subcommand(1);

  ConfigOptions train_opt;
  auto* train_cmd = app.add_subcommand("train", "Train one method; writes curve.csv, ckpt_final, config.lock");
  train_opt.attach(train_cmd);

  EvalOptions eval_opt;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint with greedy actions and bids");
  eval_cmd->add_option("--checkpoint", eval_opt.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--set", eval_opt.overrides, "Override env.*, auction.* or eval.* keys")->take_all();
  eval_cmd->add_option("--seeds", eval_opt.seeds, "Comma-separated seed list");
  eval_cmd->add_option("--episodes", eval_opt.episodes, "Episodes per seed");
  eval_cmd->add_option("--targets", eval_opt.targets, "Evaluate with this many targets (scaling)");
  eval_cmd->add_option("--out", eval_opt.out, "Report directory");
  eval_cmd->add_option("--workers", eval_opt.workers, "Environment worker threads");

  RolloutOptions roll_opt;
  auto* roll_cmd = app.add_subcommand("rollout", "Play and render one greedy episode");
  roll_cmd->add_option("--checkpoint", roll_opt.checkpoint, "Checkpoint file")->required();
  roll_cmd->add_option("--seed", roll_opt.seed, "Episode seed");
  roll_cmd->add_option("--set", roll_opt.overrides, "Override env.* or auction.* keys")->take_all();
  roll_cmd->add_option("--out", roll_opt.out, "Output directory");
  roll_cmd->add_flag("--print", roll_opt.print, "Also print the frames");

  SweepOptions sweep_opt;
  auto* sweep_cmd = app.add_subcommand("sweep", "Ablation sweep (retrains) or target-count scaling (no retraining)");
  sweep_opt.config.attach(sweep_cmd);
  sweep_cmd->add_option("--param", sweep_opt.param, "bid_upper_bound, bid_penalty, action_window or targets")
      ->required();
  sweep_cmd->add_option("--grid", sweep_opt.grid, "Comma-separated values")->required();
  sweep_cmd->add_option("--checkpoint", sweep_opt.checkpoint, "Checkpoint for --param targets");
  sweep_cmd->add_option("--episodes", sweep_opt.episodes, "Evaluation episodes per seed");

  CompareOptions cmp_opt;
  auto* cmp_cmd = app.add_subcommand("compare", "Compare bidding methods against single-policy baselines");
  cmp_opt.config.attach(cmp_cmd, false);
  cmp_cmd->add_flag("--train", cmp_opt.train, "Train methods that have no checkpoint yet");
  cmp_cmd->add_option("--episodes", cmp_opt.episodes, "Evaluation episodes per seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(train_opt, out);
    if (*eval_cmd) return cmd_eval(eval_opt, out);
    if (*roll_cmd) return cmd_rollout(roll_opt, out);
    if (*sweep_cmd) return cmd_sweep(sweep_opt, out);
    if (*cmp_cmd) return cmd_compare(cmp_opt, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace bidrl::cli
