#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "formnav/baselines.hpp"
#include "formnav/env.hpp"
#include "formnav/metrics.hpp"
#include "formnav/policy.hpp"
#include "formnav/trajectory.hpp"

namespace formnav {

// produces the next action set from the live environment state
using Controller = std::function<std::vector<Vec2>(const Env&)>;

// deterministic policy execution (gaussian mean); the policy must outlive
// the controller
Controller policy_controller(const Policy& policy);

Controller lf_controller(const LeaderFollowerGains& gains = {});

struct EvalEpisode {
  Trajectory traj;
  EpisodeMetrics metrics;
};

EvalEpisode run_episode(const Scenario& scenario, const FormationSpec& formation,
                        const Controller& controller, const RewardConfig& reward,
                        const EnvConfig& env_cfg, std::uint64_t seed);

struct EvalSummary {
  double sr_mean = 0.0;
  std::map<double, double> cfi_mean;
  double oscillation_mean = 0.0;
  std::vector<double> sr_per_seed;
  std::vector<EvalEpisode> episodes;  // seed order
};

EvalSummary evaluate(const Scenario& scenario, const FormationSpec& formation,
                     const Controller& controller, const RewardConfig& reward,
                     const EnvConfig& env_cfg, std::span<const std::uint64_t> seeds);

}  // namespace formnav
