// formnav: scenario generation, training, evaluation, and plot-data export
// for the formation-navigation stack.
//
// exit codes: 1 usage, 2 geometry/config, 3 training divergence,
// 4 checkpoint mismatch, 5 file io.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "formnav/baselines.hpp"
#include "formnav/evaluation.hpp"
#include "formnav/metrics.hpp"
#include "formnav/ppo.hpp"
#include "formnav/serialization.hpp"
#include "formnav/trajectory.hpp"
#include "formnav/world.hpp"

namespace {

using namespace formnav;

// flag combinations CLI11 cannot express (exit code 1, like parse errors)
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// generator flags shared by every command that can build a corridor inline
struct ScenarioArgs {
  std::string path;  // --scenario wins over the generator flags
  CorridorParams params;
  std::string formation = "circle";
};

void add_scenario_flags(CLI::App& cmd, ScenarioArgs& args) {
  cmd.add_option("--scenario", args.path, "scenario json file (overrides generator flags)");
  cmd.add_option("--formation", args.formation, "formation kind")
      ->check(CLI::IsMember({"circle", "wedge", "line"}));
  cmd.add_option("--n", args.params.n_robots, "team size");
  cmd.add_option("--scale", args.params.scale, "formation scale (m)");
  cmd.add_option("--wide", args.params.wide, "entry corridor width (m)");
  cmd.add_option("--narrow", args.params.narrow, "narrow section width (m)");
  cmd.add_option("--length", args.params.length, "corridor length (m)");
  cmd.add_option("--taper", args.params.taper, "taper section length (m)");
  cmd.add_option("--radius", args.params.robot_radius, "robot radius (m)");
  cmd.add_option("--max-steps", args.params.max_steps, "episode step limit");
}

Scenario make_scenario(const ScenarioArgs& args) {
  if (!args.path.empty()) return load_scenario(args.path);
  CorridorParams p = args.params;
  p.kind = formation_kind_from_string(args.formation);
  return build_corridor(p);
}

std::string scenario_label(const ScenarioArgs& args, const Scenario& sc) {
  if (!args.path.empty()) return args.path;
  return std::string("corridor-") + to_string(sc.formation) + "-n" +
         std::to_string(sc.n_robots);
}

FormationSpec formation_of(const Scenario& sc) {
  return FormationSpec::make(sc.formation, sc.n_robots, sc.formation_scale, sc.robot_radius);
}

std::vector<std::uint64_t> make_seeds(const std::vector<std::uint64_t>& listed,
                                      int num_seeds, std::uint64_t base) {
  if (!listed.empty()) return listed;
  std::vector<std::uint64_t> seeds(static_cast<size_t>(num_seeds));
  for (size_t k = 0; k < seeds.size(); ++k) seeds[k] = base + k;
  return seeds;
}

void print_table(const std::string& method, const EvalSummary& s) {
  std::printf("%-8s %8s %8s %8s %8s %8s\n", "method", "SR", "d<0.5", "d<0.3", "d<0.1",
              "d<0.03");
  std::printf("%-8s %8.3f", method.c_str(), s.sr_mean);
  for (double delta : kCfiDeltas) {
    const auto it = s.cfi_mean.find(delta);
    std::printf(" %8.3f", it == s.cfi_mean.end() ? 0.0 : 100.0 * it->second);
  }
  std::printf("\n");
}

MetricsReport make_report(const std::string& scenario, const std::string& method,
                          std::span<const std::uint64_t> seeds, const EvalSummary& s) {
  MetricsReport r;
  r.scenario = scenario;
  r.method = method;
  r.seeds.assign(seeds.begin(), seeds.end());
  r.sr_mean = s.sr_mean;
  r.sr_per_seed = s.sr_per_seed;
  for (const auto& [delta, value] : s.cfi_mean) r.cfi[format_double(delta)] = value;
  r.oscillation_mean = s.oscillation_mean;
  return r;
}

void write_episode_csvs(const std::string& out_dir, std::span<const std::uint64_t> seeds,
                        const EvalSummary& s) {
  for (size_t k = 0; k < seeds.size(); ++k) {
    const std::string path =
        out_dir + "/traj_seed" + std::to_string(seeds[k]) + ".csv";
    write_text_file(path, trajectory_csv_string(s.episodes[k].traj));
  }
}

// ---- scenario ---------------------------------------------------------------

int cmd_scenario(const ScenarioArgs& args, const std::string& out) {
  Scenario sc = make_scenario(args);
  save_scenario(out, sc);
  std::printf("wrote %s: %d robots, %s formation, %zu walls, widths %.3g/%.3g, "
              "narrow span [%.3g, %.3g]\n",
              out.c_str(), sc.n_robots, to_string(sc.formation), sc.walls.size(),
              sc.width_wide, sc.width_narrow, sc.narrow_span[0], sc.narrow_span[1]);
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  ScenarioArgs scenario;
  std::string method = "afor";
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  PpoConfig ppo;
  RewardConfig reward;
  EnvConfig env;
};

int cmd_train(const TrainArgs& args) {
  Scenario sc = make_scenario(args.scenario);
  RewardConfig reward = args.method == "bl" ? bl_config(args.reward) : args.reward;

  RunConfig config;
  config.method = args.method;
  if (auto p = corridor_params_from(sc)) config.corridor = *p;
  config.scenario_path = args.scenario.path;
  config.reward = reward;
  config.env = args.env;
  config.ppo = args.ppo;
  config.seeds = {args.seed};
  config.out_dir = args.out_dir;

  std::filesystem::create_directories(args.out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result = train({&sc, 1}, args.ppo, reward, args.env, args.seed);
  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  save_checkpoint(args.out_dir + "/final.ckpt.json", result.policy, config,
                  result.env_steps);
  save_checkpoint(args.out_dir + "/best.ckpt.json", result.best, config,
                  result.env_steps);
  save_train_log(args.out_dir + "/train.jsonl", result.log);

  std::fprintf(stderr, "trained %lld env steps in %.1fs (%zu iterations)\n",
               static_cast<long long>(result.env_steps), wall_s, result.log.size());
  if (result.diverged) {
    std::fprintf(stderr, "training diverged; last finite checkpoint kept\n");
    throw DivergenceError("training diverged");
  }
  if (!result.log.empty()) {
    const TrainLogRecord& last = result.log.back();
    std::printf("final: mean_return %.3f, eval sr %.1f, cfi(0.5) %.3f\n",
                last.mean_return, last.sr_eval, last.cfi_eval);
  } else {
    std::printf("wrote initialized checkpoint (no training steps)\n");
  }
  return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  ScenarioArgs scenario;
  std::string checkpoint;
  std::string method;  // defaults to the checkpoint's method; "lf" skips it
  std::string out_dir = ".";
  std::vector<std::uint64_t> seeds;
  int num_seeds = 10;
  std::uint64_t seed_base = 0;
  bool table = false;
  bool no_csv = false;
};

int cmd_eval(const EvalArgs& args, const CLI::App& cmd) {
  std::optional<LoadedCheckpoint> ckpt;
  std::string method = args.method;
  if (method != "lf") {
    if (args.checkpoint.empty())
      throw UsageError("eval needs --checkpoint unless --method lf");
    ckpt = load_checkpoint(args.checkpoint);
    if (method.empty()) method = ckpt->config.method;
  }

  // scenario precedence: explicit flags, then the checkpoint's snapshot
  Scenario sc;
  const bool scenario_flags =
      !args.scenario.path.empty() || cmd.count("--formation") || cmd.count("--n") ||
      cmd.count("--wide") || cmd.count("--narrow") || cmd.count("--length") ||
      cmd.count("--taper") || cmd.count("--scale") || cmd.count("--radius") ||
      cmd.count("--max-steps");
  if (scenario_flags || !ckpt) {
    sc = make_scenario(args.scenario);
  } else if (!ckpt->config.scenario_path.empty()) {
    sc = load_scenario(ckpt->config.scenario_path);
  } else {
    sc = build_corridor(ckpt->config.corridor);
  }

  const RewardConfig reward = ckpt ? ckpt->config.reward : RewardConfig{};
  const EnvConfig env_cfg = ckpt ? ckpt->config.env : EnvConfig{};
  const Controller controller =
      method == "lf" ? lf_controller() : policy_controller(ckpt->policy);

  const std::vector<std::uint64_t> seeds =
      make_seeds(args.seeds, args.num_seeds, args.seed_base);
  EvalSummary summary = evaluate(sc, formation_of(sc), controller, reward, env_cfg, seeds);

  std::filesystem::create_directories(args.out_dir);
  const std::string label = !args.scenario.path.empty() || !ckpt
                                ? scenario_label(args.scenario, sc)
                                : (ckpt->config.scenario_path.empty()
                                       ? scenario_label(args.scenario, sc)
                                       : ckpt->config.scenario_path);
  save_metrics(args.out_dir + "/metrics.json", make_report(label, method, seeds, summary));
  if (!args.no_csv) write_episode_csvs(args.out_dir, seeds, summary);

  if (args.table) {
    print_table(method, summary);
  } else {
    std::printf("sr %.1f%%, cfi(0.5) %.3f, oscillation %.4f over %zu seeds\n",
                summary.sr_mean,
                summary.cfi_mean.count(0.5) ? summary.cfi_mean.at(0.5) : 0.0,
                summary.oscillation_mean, seeds.size());
  }
  return 0;
}

// ---- generalize --------------------------------------------------------------

struct GeneralizeArgs {
  std::string checkpoint;
  std::vector<int> sizes{3, 5, 7, 9};
  std::vector<std::uint64_t> seeds;
  int num_seeds = 10;
  std::uint64_t seed_base = 0;
  double scale = 1.0;
  double wide = 6.0;
  double narrow = 2.0;
  double length = 20.0;
  double taper = 4.0;
  std::string out = "generalize.json";
};

int cmd_generalize(const GeneralizeArgs& args) {
  LoadedCheckpoint ckpt = load_checkpoint(args.checkpoint);
  const std::string hash_before = checkpoint_param_hash(ckpt.policy);
  const std::vector<std::uint64_t> seeds =
      make_seeds(args.seeds, args.num_seeds, args.seed_base);

  nlohmann::ordered_json out;
  out["checkpoint"] = args.checkpoint;
  out["checkpoint_hash"] = hash_before;
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (int n : args.sizes) {
    CorridorParams p = ckpt.config.corridor;
    p.kind = FormationKind::kWedge;
    p.n_robots = n;
    p.scale = args.scale;
    p.narrow = args.narrow;
    p.length = args.length;
    p.taper = args.taper;
    // the entry section must admit the formation; the narrow test width stays fixed
    const double half_span = std::floor(n / 2) * args.scale + p.robot_radius;
    p.wide = std::max(args.wide, 2.0 * half_span + 1.0);

    Scenario sc = build_corridor(p);
    EvalSummary s = evaluate(sc, formation_of(sc), policy_controller(ckpt.policy),
                             ckpt.config.reward, ckpt.config.env, seeds);
    if (checkpoint_param_hash(ckpt.policy) != hash_before)
      throw CheckpointError("parameters changed during evaluation");

    nlohmann::ordered_json e;
    e["n"] = n;
    e["sr_mean"] = s.sr_mean;
    nlohmann::ordered_json cfi;
    for (double delta : kCfiDeltas)
      if (s.cfi_mean.count(delta)) cfi[format_double(delta)] = s.cfi_mean.at(delta);
    e["cfi"] = std::move(cfi);
    e["oscillation_mean"] = s.oscillation_mean;
    entries.push_back(std::move(e));
    std::printf("n=%d: sr %.1f%%, cfi(0.5) %.3f\n", n, s.sr_mean,
                s.cfi_mean.count(0.5) ? s.cfi_mean.at(0.5) : 0.0);
  }
  out["seeds"] = seeds;
  out["sizes"] = std::move(entries);
  write_text_file(args.out, out.dump(2) + "\n");
  std::printf("wrote %s\n", args.out.c_str());
  return 0;
}

// ---- plot-data ---------------------------------------------------------------

struct PlotArgs {
  std::string trajectory;
  std::string scenario;
  std::string out = "plot.json";
};

int cmd_plot_data(const PlotArgs& args) {
  Trajectory traj;
  try {
    traj = parse_trajectory_csv(read_text_file(args.trajectory));
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError(std::string("bad trajectory csv: ") + e.what());
  }
  Scenario sc = load_scenario(args.scenario);
  if (traj.steps.size() < 3) throw IoError("trajectory too short to plot");

  // formation snapshots at narrow-span entry / midpoint / exit, by the
  // centroid's station along the axis; clamped to keep timestamps increasing
  const double mid = 0.5 * (sc.narrow_span[0] + sc.narrow_span[1]);
  const auto station_at = [&](size_t s) {
    Vec2 c{};
    for (const auto& r : traj.steps[s].robots) c += r.p;
    return dot(c / static_cast<double>(traj.n_robots), sc.axis);
  };
  const auto first_reaching = [&](double target, size_t from) {
    for (size_t s = from; s < traj.steps.size(); ++s)
      if (station_at(s) >= target) return s;
    return traj.steps.size() - 1;
  };
  size_t i_entry = first_reaching(sc.narrow_span[0], 0);
  size_t i_mid = std::max(first_reaching(mid, i_entry), i_entry + 1);
  size_t i_exit = std::max(first_reaching(sc.narrow_span[1], i_mid), i_mid + 1);
  i_entry = std::min(i_entry, traj.steps.size() - 3);
  i_mid = std::min(std::max(i_mid, i_entry + 1), traj.steps.size() - 2);
  i_exit = std::min(std::max(i_exit, i_mid + 1), traj.steps.size() - 1);

  nlohmann::ordered_json j;
  j["dt"] = traj.dt;
  nlohmann::ordered_json robots = nlohmann::ordered_json::array();
  for (int i = 0; i < traj.n_robots; ++i) {
    nlohmann::ordered_json line = nlohmann::ordered_json::array();
    for (const auto& step : traj.steps)
      line.push_back({step.robots[i].p.x, step.robots[i].p.y});
    robots.push_back(std::move(line));
  }
  j["robots"] = std::move(robots);
  nlohmann::ordered_json walls = nlohmann::ordered_json::array();
  for (const Segment2& w : sc.walls) walls.push_back({w.a.x, w.a.y, w.b.x, w.b.y});
  j["walls"] = std::move(walls);
  j["narrow_span"] = {sc.narrow_span[0], sc.narrow_span[1]};
  j["snapshots"] = {{"entry", traj.steps[i_entry].t},
                    {"mid", traj.steps[i_mid].t},
                    {"exit", traj.steps[i_exit].t}};
  write_text_file(args.out, j.dump(2) + "\n");
  std::printf("wrote %s: %d robot polylines, %zu walls, snapshots at %s/%s/%s s\n",
              args.out.c_str(), traj.n_robots, sc.walls.size(),
              format_double(traj.steps[i_entry].t).c_str(),
              format_double(traj.steps[i_mid].t).c_str(),
              format_double(traj.steps[i_exit].t).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"formation navigation trainer and evaluator"};
  app.require_subcommand(1);

  // scenario
  ScenarioArgs scen_args;
  std::string scen_out = "scenario.json";
  CLI::App* scen = app.add_subcommand("scenario", "generate a corridor scenario file");
  add_scenario_flags(*scen, scen_args);
  scen->add_option("--out", scen_out, "output path");

  // train
  TrainArgs train_args;
  CLI::App* tr = app.add_subcommand("train", "train a policy with ppo");
  add_scenario_flags(*tr, train_args.scenario);
  tr->add_option("--method", train_args.method, "afor (adaptive) or bl (no adaptation)")
      ->check(CLI::IsMember({"afor", "bl"}));
  tr->add_option("--steps", train_args.ppo.total_steps, "environment step budget");
  tr->add_option("--seed", train_args.seed, "training seed");
  tr->add_option("--out-dir", train_args.out_dir, "output directory");
  tr->add_option("--envs", train_args.ppo.num_envs, "parallel rollout workers");
  tr->add_option("--horizon", train_args.ppo.horizon, "steps per worker per update");
  tr->add_option("--lr", train_args.ppo.learning_rate, "adam learning rate");
  tr->add_option("--epochs", train_args.ppo.epochs, "update epochs");
  tr->add_option("--minibatch", train_args.ppo.minibatch_size, "robot samples per batch");
  tr->add_option("--gamma", train_args.ppo.gamma, "discount");
  tr->add_option("--lam", train_args.ppo.gae_lambda, "gae lambda");
  tr->add_option("--clip", train_args.ppo.clip, "ppo clip range");
  tr->add_option("--entropy-coef", train_args.ppo.entropy_coef, "entropy bonus weight");
  tr->add_option("--value-coef", train_args.ppo.value_coef, "value loss weight");
  tr->add_option("--eval-every", train_args.ppo.eval_every, "iterations between evals");
  tr->add_option("--eval-episodes", train_args.ppo.eval_episodes, "episodes per eval");
  tr->add_option("--early-stop-sr", train_args.ppo.early_stop_sr,
                 "stop once eval success rate reaches this percent");
  tr->add_option("--target-kl", train_args.ppo.target_kl,
                 "skip remaining minibatches once approx kl exceeds this");
  tr->add_flag("--lr-decay", train_args.ppo.lr_decay,
               "decay the learning rate linearly to zero");
  tr->add_flag("--no-curriculum", [&](std::int64_t) { train_args.ppo.curriculum = false; },
               "disable narrow-width resampling");
  tr->add_option("--alpha", train_args.reward.alpha, "adaptation distance/velocity blend");
  tr->add_option("--w-adapt", train_args.reward.w_adapt, "adaptation reward weight");

  // eval
  EvalArgs eval_args;
  CLI::App* ev = app.add_subcommand("eval", "run deterministic rollouts and metrics");
  add_scenario_flags(*ev, eval_args.scenario);
  ev->add_option("--checkpoint", eval_args.checkpoint, "checkpoint json");
  ev->add_option("--method", eval_args.method, "afor, bl, or lf")
      ->check(CLI::IsMember({"afor", "bl", "lf"}));
  ev->add_option("--out-dir", eval_args.out_dir, "output directory");
  ev->add_option("--seeds", eval_args.seeds, "explicit seed list")->delimiter(',');
  ev->add_option("--num-seeds", eval_args.num_seeds, "number of consecutive seeds");
  ev->add_option("--seed-base", eval_args.seed_base, "first seed");
  ev->add_flag("--table", eval_args.table, "print a table (cfi scaled to percent)");
  ev->add_flag("--no-csv", eval_args.no_csv, "skip per-seed trajectory csvs");

  // generalize
  GeneralizeArgs gen_args;
  CLI::App* gen = app.add_subcommand("generalize",
                                     "evaluate one checkpoint across wedge team sizes");
  gen->add_option("--checkpoint", gen_args.checkpoint, "checkpoint json")->required();
  gen->add_option("--sizes", gen_args.sizes, "team sizes")->delimiter(',');
  gen->add_option("--seeds", gen_args.seeds, "explicit seed list")->delimiter(',');
  gen->add_option("--num-seeds", gen_args.num_seeds, "number of consecutive seeds");
  gen->add_option("--seed-base", gen_args.seed_base, "first seed");
  gen->add_option("--scale", gen_args.scale, "formation scale (m)");
  gen->add_option("--wide", gen_args.wide, "minimum entry width (m)");
  gen->add_option("--narrow", gen_args.narrow, "narrow section width (m)");
  gen->add_option("--length", gen_args.length, "corridor length (m)");
  gen->add_option("--taper", gen_args.taper, "taper section length (m)");
  gen->add_option("--out", gen_args.out, "output json path");

  // plot-data
  PlotArgs plot_args;
  CLI::App* pl = app.add_subcommand("plot-data", "export plot-ready trajectory json");
  pl->add_option("--trajectory", plot_args.trajectory, "trajectory csv")->required();
  pl->add_option("--scenario", plot_args.scenario, "scenario json")->required();
  pl->add_option("--out", plot_args.out, "output json path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // fold cli11's error variety into one usage code
  }

  try {
    if (scen->parsed()) return cmd_scenario(scen_args, scen_out);
    if (tr->parsed()) return cmd_train(train_args);
    if (ev->parsed()) return cmd_eval(eval_args, *ev);
    if (gen->parsed()) return cmd_generalize(gen_args);
    if (pl->parsed()) return cmd_plot_data(plot_args);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return 4;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 5;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "training error: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
