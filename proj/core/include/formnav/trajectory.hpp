#pragma once

#include <span>
#include <string>
#include <vector>

#include "formnav/env.hpp"
#include "formnav/vec2.hpp"

namespace formnav {

// shortest decimal representation that round-trips the exact double
std::string format_double(double v);

struct TrajectorySample {
  Vec2 p;
  Vec2 q;
  double d = 0.0;
  double reward = 0.0;
  bool done = false;
  bool collision = false;
};

struct TrajectoryStep {
  double t = 0.0;
  std::vector<TrajectorySample> robots;
};

// full episode record; step 0 is the post-reset state with zero reward
struct Trajectory {
  double dt = 0.1;
  int n_robots = 0;
  std::vector<TrajectoryStep> steps;

  void append(double t, std::span<const RobotState> robots, std::span<const double> rewards,
              std::span<const std::uint8_t> done, std::span<const std::uint8_t> collided);

  std::vector<Vec2> positions_at(size_t step) const;
  std::vector<Vec2> velocities_at(size_t step) const;
  bool any_collision() const;
};

// header: t,robot,px,py,vx,vy,d_obs,reward,done,collision
void write_trajectory_csv(const std::string& path, const Trajectory& traj);
std::string trajectory_csv_string(const Trajectory& traj);

// throws std::runtime_error on malformed input
Trajectory read_trajectory_csv(const std::string& path);
Trajectory parse_trajectory_csv(const std::string& text);

}  // namespace formnav
