#include "formnav/serialization.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "formnav/metrics.hpp"
#include "formnav/trajectory.hpp"
#include "json.hpp"

namespace formnav {
namespace {

using json = nlohmann::ordered_json;

json vec2_json(Vec2 v) { return json::array({v.x, v.y}); }

Vec2 vec2_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw std::invalid_argument(std::string(what) + " must be a [x, y] pair");
  Vec2 v{j[0].get<double>(), j[1].get<double>()};
  if (!is_finite(v)) throw std::invalid_argument(std::string(what) + " must be finite");
  return v;
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field: ") + key);
  return *it;
}

double num_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) throw std::invalid_argument(std::string(key) + " must be a number");
  return v.get<double>();
}

int int_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_integer()) throw std::invalid_argument(std::string(key) + " must be an integer");
  return v.get<int>();
}

json corridor_json(const CorridorParams& p) {
  json j;
  j["n_robots"] = p.n_robots;
  j["formation"] = to_string(p.kind);
  j["scale"] = p.scale;
  j["wide"] = p.wide;
  j["narrow"] = p.narrow;
  j["length"] = p.length;
  j["taper"] = p.taper;
  j["robot_radius"] = p.robot_radius;
  j["max_steps"] = p.max_steps;
  return j;
}

CorridorParams corridor_from(const json& j) {
  CorridorParams p;
  p.n_robots = int_field(j, "n_robots");
  p.kind = formation_kind_from_string(field(j, "formation").get<std::string>());
  p.scale = num_field(j, "scale");
  p.wide = num_field(j, "wide");
  p.narrow = num_field(j, "narrow");
  p.length = num_field(j, "length");
  p.taper = num_field(j, "taper");
  p.robot_radius = num_field(j, "robot_radius");
  p.max_steps = int_field(j, "max_steps");
  return p;
}

json reward_json(const RewardConfig& r) {
  json j;
  j["alpha"] = r.alpha;
  j["w_adapt"] = r.w_adapt;
  j["w_progress"] = r.w_progress;
  j["w_obstacle"] = r.w_obstacle;
  j["r_goal_bonus"] = r.r_goal_bonus;
  j["r_collision"] = r.r_collision;
  j["goal_tol"] = r.goal_tol;
  j["obstacle_margin"] = r.obstacle_margin;
  return j;
}

RewardConfig reward_from(const json& j) {
  RewardConfig r;
  r.alpha = num_field(j, "alpha");
  r.w_adapt = num_field(j, "w_adapt");
  r.w_progress = num_field(j, "w_progress");
  r.w_obstacle = num_field(j, "w_obstacle");
  r.r_goal_bonus = num_field(j, "r_goal_bonus");
  r.r_collision = num_field(j, "r_collision");
  r.goal_tol = num_field(j, "goal_tol");
  r.obstacle_margin = num_field(j, "obstacle_margin");
  return r;
}

json env_json(const EnvConfig& e) {
  json j;
  j["dt"] = e.dt;
  j["v_max"] = e.v_max;
  j["start_jitter"] = e.start_jitter;
  j["absolute_goal_obs"] = e.absolute_goal_obs;
  j["graph_radius_scale"] = e.graph_radius_scale;
  return j;
}

EnvConfig env_from(const json& j) {
  EnvConfig e;
  e.dt = num_field(j, "dt");
  e.v_max = num_field(j, "v_max");
  e.start_jitter = num_field(j, "start_jitter");
  e.absolute_goal_obs = field(j, "absolute_goal_obs").get<bool>();
  e.graph_radius_scale = num_field(j, "graph_radius_scale");
  return e;
}

json ppo_json(const PpoConfig& p) {
  json j;
  j["gamma"] = p.gamma;
  j["gae_lambda"] = p.gae_lambda;
  j["clip"] = p.clip;
  j["epochs"] = p.epochs;
  j["minibatch_size"] = p.minibatch_size;
  j["value_coef"] = p.value_coef;
  j["entropy_coef"] = p.entropy_coef;
  j["learning_rate"] = p.learning_rate;
  j["total_steps"] = p.total_steps;
  j["num_envs"] = p.num_envs;
  j["horizon"] = p.horizon;
  j["eval_every"] = p.eval_every;
  j["eval_episodes"] = p.eval_episodes;
  j["curriculum"] = p.curriculum;
  j["early_stop_sr"] = p.early_stop_sr;
  j["target_kl"] = p.target_kl;
  j["lr_decay"] = p.lr_decay;
  return j;
}

PpoConfig ppo_from(const json& j) {
  PpoConfig p;
  p.gamma = num_field(j, "gamma");
  p.gae_lambda = num_field(j, "gae_lambda");
  p.clip = num_field(j, "clip");
  p.epochs = int_field(j, "epochs");
  p.minibatch_size = int_field(j, "minibatch_size");
  p.value_coef = num_field(j, "value_coef");
  p.entropy_coef = num_field(j, "entropy_coef");
  p.learning_rate = num_field(j, "learning_rate");
  p.total_steps = field(j, "total_steps").get<std::int64_t>();
  p.num_envs = int_field(j, "num_envs");
  p.horizon = int_field(j, "horizon");
  p.eval_every = int_field(j, "eval_every");
  p.eval_episodes = int_field(j, "eval_episodes");
  p.curriculum = field(j, "curriculum").get<bool>();
  p.early_stop_sr = num_field(j, "early_stop_sr");
  p.target_kl = num_field(j, "target_kl");
  p.lr_decay = field(j, "lr_decay").get<bool>();
  return p;
}

json run_config_json(const RunConfig& c) {
  json j;
  j["method"] = c.method;
  j["corridor"] = corridor_json(c.corridor);
  j["scenario_path"] = c.scenario_path;
  j["reward"] = reward_json(c.reward);
  j["env"] = env_json(c.env);
  j["ppo"] = ppo_json(c.ppo);
  j["seeds"] = c.seeds;
  j["out_dir"] = c.out_dir;
  return j;
}

RunConfig run_config_from(const json& j) {
  RunConfig c;
  c.method = field(j, "method").get<std::string>();
  c.corridor = corridor_from(field(j, "corridor"));
  c.scenario_path = field(j, "scenario_path").get<std::string>();
  c.reward = reward_from(field(j, "reward"));
  c.env = env_from(field(j, "env"));
  c.ppo = ppo_from(field(j, "ppo"));
  c.seeds = field(j, "seeds").get<std::vector<std::uint64_t>>();
  c.out_dir = field(j, "out_dir").get<std::string>();
  return c;
}

json params_json(const Policy& policy) {
  json arr = json::array();
  for (const nn::Param& p : policy.params().all()) {
    json e;
    e["name"] = p.name;
    e["shape"] = p.value.shape;
    e["values"] = p.value.data;
    arr.push_back(std::move(e));
  }
  return arr;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

// ---- scenario files -------------------------------------------------------

std::string scenario_to_json(const Scenario& sc) {
  json j;
  j["version"] = 1;
  json walls = json::array();
  for (const Segment2& w : sc.walls)
    walls.push_back(json::array({w.a.x, w.a.y, w.b.x, w.b.y}));
  j["walls"] = std::move(walls);
  j["axis"] = vec2_json(sc.axis);
  json starts = json::array(), goals = json::array();
  for (Vec2 p : sc.starts) starts.push_back(vec2_json(p));
  for (Vec2 p : sc.goals) goals.push_back(vec2_json(p));
  j["starts"] = std::move(starts);
  j["goals"] = std::move(goals);
  j["robot_radius"] = sc.robot_radius;
  j["max_steps"] = sc.max_steps;
  j["formation"] = {{"kind", to_string(sc.formation)}, {"scale", sc.formation_scale}};
  j["widths"] = {{"wide", sc.width_wide}, {"narrow", sc.width_narrow}};
  j["narrow_span"] = json::array({sc.narrow_span[0], sc.narrow_span[1]});
  return j.dump(2) + "\n";
}

Scenario scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("scenario is not valid json: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("scenario must be a json object");
  if (int_field(j, "version") != 1)
    throw std::invalid_argument("unsupported scenario version");

  Scenario sc;
  const json& walls = field(j, "walls");
  if (!walls.is_array() || walls.empty())
    throw std::invalid_argument("walls must be a non-empty array");
  for (const json& w : walls) {
    if (!w.is_array() || w.size() != 4)
      throw std::invalid_argument("each wall must be [ax, ay, bx, by]");
    Segment2 seg{{w[0].get<double>(), w[1].get<double>()},
                 {w[2].get<double>(), w[3].get<double>()}};
    if (!is_finite(seg.a) || !is_finite(seg.b) || seg.a == seg.b)
      throw std::invalid_argument("walls must be finite, non-degenerate segments");
    sc.walls.push_back(seg);
  }
  sc.axis = vec2_from(field(j, "axis"), "axis");
  if (std::abs(norm(sc.axis) - 1.0) > 1e-6)
    throw std::invalid_argument("axis must be a unit vector");

  for (const json& p : field(j, "starts")) sc.starts.push_back(vec2_from(p, "start"));
  for (const json& p : field(j, "goals")) sc.goals.push_back(vec2_from(p, "goal"));
  if (sc.starts.size() < 2 || sc.starts.size() != sc.goals.size())
    throw std::invalid_argument("starts and goals must list the same n >= 2 robots");
  sc.n_robots = static_cast<int>(sc.starts.size());

  sc.robot_radius = num_field(j, "robot_radius");
  if (!(sc.robot_radius > 0.0)) throw std::invalid_argument("robot_radius must be positive");
  sc.max_steps = int_field(j, "max_steps");
  if (sc.max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");

  const json& formation = field(j, "formation");
  sc.formation = formation_kind_from_string(field(formation, "kind").get<std::string>());
  sc.formation_scale = num_field(formation, "scale");
  if (!(sc.formation_scale > 0.0)) throw std::invalid_argument("formation scale must be positive");

  const json& widths = field(j, "widths");
  sc.width_wide = num_field(widths, "wide");
  sc.width_narrow = num_field(widths, "narrow");
  if (!(sc.width_narrow > 0.0) || sc.width_wide < sc.width_narrow)
    throw std::invalid_argument("widths must satisfy wide >= narrow > 0");

  const json& span = field(j, "narrow_span");
  if (!span.is_array() || span.size() != 2)
    throw std::invalid_argument("narrow_span must be [s0, s1]");
  sc.narrow_span = {span[0].get<double>(), span[1].get<double>()};
  if (!(sc.narrow_span[0] <= sc.narrow_span[1]))
    throw std::invalid_argument("narrow_span must be ordered");

  // centroids are derived, not stored
  Vec2 sc_sum{}, gc_sum{};
  for (Vec2 p : sc.starts) sc_sum += p;
  for (Vec2 p : sc.goals) gc_sum += p;
  sc.start_centroid = sc_sum / static_cast<double>(sc.n_robots);
  sc.goal_centroid = gc_sum / static_cast<double>(sc.n_robots);
  return sc;
}

void save_scenario(const std::string& path, const Scenario& sc) {
  write_text_file(path, scenario_to_json(sc));
}

Scenario load_scenario(const std::string& path) {
  return scenario_from_json(read_text_file(path));
}

// ---- checkpoints -----------------------------------------------------------

std::string checkpoint_to_json(const Policy& policy, const RunConfig& config,
                               std::int64_t step_count) {
  json j;
  j["version"] = 1;
  j["step_count"] = step_count;
  j["config"] = run_config_json(config);
  j["params"] = params_json(policy);
  return j.dump(2) + "\n";
}

LoadedCheckpoint checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
    if (!j.is_object() || field(j, "version").get<int>() != 1)
      throw std::invalid_argument("unsupported checkpoint version");

    RunConfig config = run_config_from(field(j, "config"));
    std::int64_t steps = field(j, "step_count").get<std::int64_t>();
    if (steps < 0) throw std::invalid_argument("step_count must be non-negative");

    Policy policy(PolicyConfig{}, 0);
    const json& params = field(j, "params");
    std::vector<nn::Param>& store = policy.params().all();
    if (!params.is_array() || params.size() != store.size())
      throw std::invalid_argument("parameter list does not match the policy");
    for (size_t i = 0; i < store.size(); ++i) {
      const json& e = params[i];
      const std::string name = field(e, "name").get<std::string>();
      const auto shape = field(e, "shape").get<std::vector<int>>();
      auto values = field(e, "values").get<std::vector<double>>();
      if (name != store[i].name || shape != store[i].value.shape ||
          values.size() != store[i].value.data.size())
        throw std::invalid_argument("parameter " + name + " does not match the policy");
      store[i].value.data = std::move(values);
    }
    return LoadedCheckpoint{std::move(policy), std::move(config), steps};
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Policy& policy,
                     const RunConfig& config, std::int64_t step_count) {
  write_text_file(path, checkpoint_to_json(policy, config, step_count));
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw CheckpointError(e.what());
  }
  return checkpoint_from_json(text);
}

std::string checkpoint_param_hash(const Policy& policy) {
  const std::uint64_t h = fnv1a64(params_json(policy).dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

// ---- metrics + training logs ----------------------------------------------

std::string metrics_to_json(const MetricsReport& r) {
  json j;
  j["scenario"] = r.scenario;
  j["method"] = r.method;
  j["seeds"] = r.seeds;
  j["sr_mean"] = r.sr_mean;
  j["sr_per_seed"] = r.sr_per_seed;
  json cfi;
  for (double delta : kCfiDeltas) {  // table column order
    auto it = r.cfi.find(format_double(delta));
    if (it != r.cfi.end()) cfi[it->first] = it->second;
  }
  for (const auto& [label, value] : r.cfi)
    if (!cfi.contains(label)) cfi[label] = value;
  j["cfi"] = std::move(cfi);
  j["oscillation_mean"] = r.oscillation_mean;
  return j.dump(2) + "\n";
}

void save_metrics(const std::string& path, const MetricsReport& report) {
  write_text_file(path, metrics_to_json(report));
}

std::string train_log_line(const TrainLogRecord& rec) {
  json j;
  j["iter"] = rec.iter;
  j["env_steps"] = rec.env_steps;
  j["mean_return"] = rec.mean_return;
  j["sr_eval"] = rec.sr_eval;
  j["cfi_eval"] = rec.cfi_eval;
  j["loss"] = rec.loss;
  j["clip_frac"] = rec.clip_frac;
  j["kl"] = rec.kl;
  j["entropy"] = rec.entropy;
  return j.dump();
}

void save_train_log(const std::string& path, std::span<const TrainLogRecord> log) {
  std::string out;
  for (const TrainLogRecord& rec : log) {
    out += train_log_line(rec);
    out += '\n';
  }
  write_text_file(path, out);
}

// ---- files -----------------------------------------------------------------

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path);
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace formnav
