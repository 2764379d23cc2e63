#include "formnav/env.hpp"

#include <cmath>
#include <stdexcept>

#include "formnav/rng.hpp"

namespace formnav {

Env::Env(Scenario scenario, FormationSpec formation, RewardConfig reward, EnvConfig config)
    : scenario_(std::move(scenario)),
      formation_(std::move(formation)),
      reward_(reward),
      config_(config) {
  if (static_cast<int>(scenario_.starts.size()) != formation_.n)
    throw std::invalid_argument("env: scenario and formation disagree on team size");
  if (!(reward_.goal_tol > 0.0)) throw std::invalid_argument("env: goal_tol must be positive");
  if (!(reward_.obstacle_margin > scenario_.robot_radius))
    throw std::invalid_argument("env: obstacle_margin must exceed robot_radius");
}

void Env::refresh_distances() {
  for (RobotState& r : robots_) r.d = nearest_obstacle_distance(r.p, scenario_);
}

nn::Tensor Env::reset(std::uint64_t seed) {
  const int n = formation_.n;
  Rng rng(seed);
  const double j = config_.start_jitter;
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<Vec2> placed(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      const Vec2 jit = j > 0.0 ? Vec2{rng.uniform(-j, j), rng.uniform(-j, j)} : Vec2{};
      placed[static_cast<size_t>(i)] = scenario_.starts[static_cast<size_t>(i)] + jit;
    }
    if (check_collisions(placed, scenario_).any) continue;

    robots_.assign(static_cast<size_t>(n), RobotState{});
    for (int i = 0; i < n; ++i) {
      robots_[static_cast<size_t>(i)].p = placed[static_cast<size_t>(i)];
      robots_[static_cast<size_t>(i)].g = scenario_.goals[static_cast<size_t>(i)];
    }
    refresh_distances();
    arrived_.assign(static_cast<size_t>(n), 0);
    step_count_ = 0;
    episode_done_ = false;
    any_collision_ = false;
    return observations();
  }
  throw std::runtime_error("env reset: no collision-free start placement in 100 tries");
}

Env::StepResult Env::step(std::span<const Vec2> actions) {
  const int n = formation_.n;
  if (static_cast<int>(actions.size()) != n)
    throw std::invalid_argument("env step: wrong action count");
  if (episode_done_) throw std::logic_error("env step: episode already finished");
  for (Vec2 a : actions)
    if (!is_finite(a)) throw std::invalid_argument("env step: non-finite action");

  const std::vector<RobotState> prev = robots_;
  std::vector<std::uint8_t> active(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& r = robots_[static_cast<size_t>(i)];
    const bool frozen = arrived_[static_cast<size_t>(i)] != 0;
    active[static_cast<size_t>(i)] = frozen ? 0 : 1;
    const Vec2 v = frozen ? Vec2{} : clamp_norm(actions[static_cast<size_t>(i)], config_.v_max);
    r.p += v * config_.dt;
    r.q = v;
  }
  refresh_distances();

  const CollisionReport coll = [&] {
    std::vector<Vec2> pos(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) pos[static_cast<size_t>(i)] = robots_[static_cast<size_t>(i)].p;
    return check_collisions(pos, active, scenario_);
  }();

  std::vector<std::uint8_t> reached_now(static_cast<size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    auto& r = robots_[static_cast<size_t>(i)];
    if (active[static_cast<size_t>(i)] && norm(r.p - r.g) <= reward_.goal_tol)
      reached_now[static_cast<size_t>(i)] = 1;
  }

  StepResult res;
  res.rewards = compose_reward(prev, robots_, formation_.desired, reward_, reached_now, coll.robot);
  // robots parked on their goals are absorbing: no further reward signal
  for (int i = 0; i < n; ++i)
    if (!active[static_cast<size_t>(i)]) res.rewards[static_cast<size_t>(i)] = 0.0;

  ++step_count_;
  bool all_arrived = true;
  for (int i = 0; i < n; ++i) {
    if (reached_now[static_cast<size_t>(i)]) arrived_[static_cast<size_t>(i)] = 1;
    all_arrived = all_arrived && arrived_[static_cast<size_t>(i)] != 0;
  }
  any_collision_ = any_collision_ || coll.any;
  episode_done_ = all_arrived || coll.any || step_count_ >= scenario_.max_steps;

  res.observations = observations();
  res.collided = coll.robot;
  res.reached.assign(arrived_.begin(), arrived_.end());
  res.done.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    res.done[static_cast<size_t>(i)] =
        (arrived_[static_cast<size_t>(i)] != 0 || episode_done_) ? 1 : 0;
  res.episode_done = episode_done_;
  return res;
}

std::vector<double> Env::compose_reward(std::span<const RobotState> prev,
                                        std::span<const RobotState> next,
                                        const DistanceMatrix& desired,
                                        const RewardConfig& reward,
                                        std::span<const std::uint8_t> reached_now,
                                        std::span<const std::uint8_t> collided) {
  const int n = static_cast<int>(next.size());
  std::vector<Vec2> pos(static_cast<size_t>(n)), vel(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    pos[static_cast<size_t>(i)] = next[static_cast<size_t>(i)].p;
    vel[static_cast<size_t>(i)] = next[static_cast<size_t>(i)].q;
  }
  const double r_adapt = adaptation_reward(pos, vel, desired, reward.alpha);

  std::vector<double> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& pr = prev[static_cast<size_t>(i)];
    const auto& nx = next[static_cast<size_t>(i)];
    double r = reward.w_adapt * r_adapt;
    r += reward.w_progress * (norm(pr.p - pr.g) - norm(nx.p - nx.g));
    r += reward.w_obstacle * std::min(0.0, nx.d - reward.obstacle_margin);
    if (reached_now[static_cast<size_t>(i)]) r += reward.r_goal_bonus;
    if (collided[static_cast<size_t>(i)]) r += reward.r_collision;
    out[static_cast<size_t>(i)] = r;
  }
  return out;
}

nn::Tensor Env::observations() const {
  const int n = formation_.n;
  nn::Tensor obs = nn::Tensor::zeros({n, 7});
  for (int i = 0; i < n; ++i) {
    const RobotState& r = robots_[static_cast<size_t>(i)];
    obs.at(i, 0) = r.p.x / kPositionScale;
    obs.at(i, 1) = r.p.y / kPositionScale;
    obs.at(i, 2) = r.q.x / config_.v_max;
    obs.at(i, 3) = r.q.y / config_.v_max;
    const Vec2 goal_feat = config_.absolute_goal_obs ? r.g : r.g - r.p;
    obs.at(i, 4) = goal_feat.x / kPositionScale;
    obs.at(i, 5) = goal_feat.y / kPositionScale;
    obs.at(i, 6) = r.d / kObstacleDistanceCap;
  }
  return obs;
}

TeamGraph Env::graph() const {
  std::vector<Vec2> pos;
  pos.reserve(robots_.size());
  for (const RobotState& r : robots_) pos.push_back(r.p);
  return build_radius_graph(pos, graph_radius());
}

}  // namespace formnav
