#pragma once

#include <span>
#include <vector>

#include "formnav/env.hpp"
#include "formnav/team.hpp"
#include "formnav/world.hpp"

namespace formnav {

// ablation: identical training stack, spring-damper reward switched off
RewardConfig bl_config(const RewardConfig& base = {});

struct LeaderFollowerGains {
  double k_goal = 1.0;
  double k_rep = 2.0;
  double k_slot = 1.5;
  double k_damp = 0.5;
  double rep_range = 0.6;  // wall repulsion range (m)
};

// rigid potential-field controller. robot 0 is the leader and tracks its
// goal; followers feed forward the leader velocity, track their formation
// slot relative to the leader, and damp relative velocity. everyone is
// pushed off nearby walls. commands come back clamped to v_max.
std::vector<Vec2> leader_follower_step(std::span<const RobotState> states,
                                       const FormationSpec& formation,
                                       const LeaderFollowerGains& gains,
                                       const Scenario& scenario,
                                       double goal_tol = 0.2, double v_max = 1.0);

}  // namespace formnav
