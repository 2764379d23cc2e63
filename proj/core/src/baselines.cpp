#include "formnav/baselines.hpp"

#include <cmath>

namespace formnav {

RewardConfig bl_config(const RewardConfig& base) {
  RewardConfig cfg = base;
  cfg.w_adapt = 0.0;
  return cfg;
}

namespace {

Vec2 wall_repulsion(Vec2 p, const Scenario& scenario, const LeaderFollowerGains& g) {
  Vec2 push{};
  for (const Segment2& w : scenario.walls) {
    const Vec2 cp = closest_point_on_segment(p, w);
    const double d = norm(p - cp);
    if (d >= g.rep_range || d == 0.0) continue;
    push += (p - cp) * (g.k_rep * (g.rep_range - d) / d);
  }
  return push;
}

}  // namespace

std::vector<Vec2> leader_follower_step(std::span<const RobotState> states,
                                       const FormationSpec& formation,
                                       const LeaderFollowerGains& gains,
                                       const Scenario& scenario,
                                       double goal_tol, double v_max) {
  const size_t n = states.size();
  std::vector<Vec2> actions(n);
  const RobotState& leader = states[0];

  Vec2 lead_cmd{};
  const Vec2 to_goal = leader.g - leader.p;
  const double dist = norm(to_goal);
  if (dist > goal_tol) lead_cmd = to_goal * (gains.k_goal / dist);
  lead_cmd += wall_repulsion(leader.p, scenario, gains);
  actions[0] = clamp_norm(lead_cmd, v_max);

  for (size_t i = 1; i < n; ++i) {
    const Vec2 slot = formation.offsets[i] - formation.offsets[0];
    // leader-velocity feedforward: without it a pure slot-error controller
    // trails a cruising leader by k_goal/k_slot and the formation never
    // translates rigidly
    Vec2 cmd = leader.q;
    cmd += (leader.p + slot - states[i].p) * gains.k_slot;
    cmd -= (states[i].q - leader.q) * gains.k_damp;
    cmd += wall_repulsion(states[i].p, scenario, gains);
    actions[i] = clamp_norm(cmd, v_max);
  }
  return actions;
}

}  // namespace formnav
