#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "formnav/nn.hpp"
#include "formnav/team.hpp"
#include "formnav/vec2.hpp"
#include "formnav/world.hpp"

namespace formnav {

struct RobotState {
  Vec2 p;         // position (m)
  Vec2 q;         // velocity (m/s)
  Vec2 g;         // goal (m)
  double d = 0.0; // nearest obstacle distance (m), capped
};

struct RewardConfig {
  double alpha = 0.5;
  double w_adapt = 0.1;
  double w_progress = 2.0;
  double w_obstacle = 0.5;
  double r_goal_bonus = 10.0;
  double r_collision = -10.0;
  double goal_tol = 0.2;
  double obstacle_margin = 0.45;
};

struct EnvConfig {
  double dt = 0.1;
  double v_max = 1.0;
  double start_jitter = 0.05;
  bool absolute_goal_obs = false;   // raw goal coords instead of goal - p
  double graph_radius_scale = 3.0;  // graph radius = this * formation scale
};

// normalization constants for the 7-feature observation rows
inline constexpr double kPositionScale = 10.0;

class Env {
 public:
  Env(Scenario scenario, FormationSpec formation, RewardConfig reward = {},
      EnvConfig config = {});

  // places robots at the scenario starts plus per-coordinate jitter,
  // retrying up to 100 draws if a placement collides. returns [n,7] obs.
  nn::Tensor reset(std::uint64_t seed);

  struct StepResult {
    nn::Tensor observations;
    std::vector<double> rewards;
    std::vector<std::uint8_t> done;      // per robot
    bool episode_done = false;
    std::vector<std::uint8_t> collided;  // event this step
    std::vector<std::uint8_t> reached;   // cumulative goal arrivals
  };
  StepResult step(std::span<const Vec2> actions);

  nn::Tensor observations() const;
  TeamGraph graph() const;  // radius graph over current positions
  double graph_radius() const { return config_.graph_radius_scale * formation_.scale; }

  const std::vector<RobotState>& robots() const { return robots_; }
  const Scenario& scenario() const { return scenario_; }
  const FormationSpec& formation() const { return formation_; }
  const RewardConfig& reward_config() const { return reward_; }
  const EnvConfig& config() const { return config_; }
  int step_count() const { return step_count_; }
  bool episode_done() const { return episode_done_; }
  bool any_collision() const { return any_collision_; }
  std::span<const std::uint8_t> arrived() const { return arrived_; }

  // pure reward composition for one transition; event flags are passed in
  // so the term structure stays unit-testable
  static std::vector<double> compose_reward(std::span<const RobotState> prev,
                                            std::span<const RobotState> next,
                                            const DistanceMatrix& desired,
                                            const RewardConfig& reward,
                                            std::span<const std::uint8_t> reached_now,
                                            std::span<const std::uint8_t> collided);

 private:
  void refresh_distances();

  Scenario scenario_;
  FormationSpec formation_;
  RewardConfig reward_;
  EnvConfig config_;
  std::vector<RobotState> robots_;
  std::vector<std::uint8_t> arrived_;  // goal reached in this episode
  int step_count_ = 0;
  bool episode_done_ = false;
  bool any_collision_ = false;
};

}  // namespace formnav
