#include "formnav/evaluation.hpp"

#include "formnav/threading.hpp"

namespace formnav {

Controller policy_controller(const Policy& policy) {
  return [&policy](const Env& env) {
    return policy.act_deterministic(env.observations(), env.graph());
  };
}

Controller lf_controller(const LeaderFollowerGains& gains) {
  return [gains](const Env& env) {
    return leader_follower_step(env.robots(), env.formation(), gains, env.scenario(),
                                env.reward_config().goal_tol, env.config().v_max);
  };
}

EvalEpisode run_episode(const Scenario& scenario, const FormationSpec& formation,
                        const Controller& controller, const RewardConfig& reward,
                        const EnvConfig& env_cfg, std::uint64_t seed) {
  Env env(scenario, formation, reward, env_cfg);
  env.reset(seed);

  EvalEpisode ep;
  ep.traj.dt = env_cfg.dt;
  ep.traj.n_robots = formation.n;
  ep.traj.append(0.0, env.robots(), {}, {}, {});
  while (!env.episode_done()) {
    const std::vector<Vec2> actions = controller(env);
    const Env::StepResult res = env.step(actions);
    ep.traj.append(env.step_count() * env_cfg.dt, env.robots(), res.rewards, res.done,
                   res.collided);
  }
  ep.metrics = episode_metrics(ep.traj, scenario, formation, reward.goal_tol);
  return ep;
}

EvalSummary evaluate(const Scenario& scenario, const FormationSpec& formation,
                     const Controller& controller, const RewardConfig& reward,
                     const EnvConfig& env_cfg, std::span<const std::uint64_t> seeds) {
  EvalSummary summary;
  summary.episodes.resize(seeds.size());
  parallel_for(static_cast<int>(seeds.size()), [&](int k) {
    summary.episodes[static_cast<size_t>(k)] =
        run_episode(scenario, formation, controller, reward, env_cfg,
                    seeds[static_cast<size_t>(k)]);
  });

  for (const EvalEpisode& ep : summary.episodes) {
    summary.sr_per_seed.push_back(ep.metrics.sr);
    summary.sr_mean += ep.metrics.sr;
    summary.oscillation_mean += ep.metrics.oscillation;
    for (const auto& [delta, v] : ep.metrics.cfi_by_delta) summary.cfi_mean[delta] += v;
  }
  const double m = static_cast<double>(seeds.size());
  if (!seeds.empty()) {
    summary.sr_mean /= m;
    summary.oscillation_mean /= m;
    for (auto& [delta, v] : summary.cfi_mean) v /= m;
  }
  return summary;
}

}  // namespace formnav
