#include <benchmark/benchmark.h>

#include "formnav/env.hpp"
#include "formnav/metrics.hpp"
#include "formnav/policy.hpp"
#include "formnav/ppo.hpp"
#include "formnav/team.hpp"
#include "formnav/world.hpp"

namespace {

using namespace formnav;

Scenario make_scenario(int n) {
  CorridorParams p;
  p.n_robots = n;
  p.kind = FormationKind::kWedge;
  return build_corridor(p);
}

void bm_env_step(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Scenario sc = make_scenario(n);
  Env env(sc, FormationSpec::make(sc.formation, n, sc.formation_scale, sc.robot_radius));
  env.reset(1);
  std::vector<Vec2> actions(n, Vec2{0.3, 0.0});
  for (auto _ : state) {
    if (env.episode_done()) env.reset(1);
    benchmark::DoNotOptimize(env.step(actions));
  }
}
BENCHMARK(bm_env_step)->Arg(5)->Arg(9);

void bm_policy_forward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Scenario sc = make_scenario(n);
  Env env(sc, FormationSpec::make(sc.formation, n, sc.formation_scale, sc.robot_radius));
  env.reset(1);
  Policy policy(PolicyConfig{}, 7);
  const nn::Tensor obs = env.observations();
  const TeamGraph graph = env.graph();
  for (auto _ : state) benchmark::DoNotOptimize(policy.forward(obs, graph));
}
BENCHMARK(bm_policy_forward)->Arg(5)->Arg(9);

void bm_gae(benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  std::vector<double> rewards(t, 0.1), values(t, 0.5);
  std::vector<std::uint8_t> dones(t, 0);
  dones.back() = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(compute_gae(rewards, values, dones, 0.0, 0.99, 0.95));
}
BENCHMARK(bm_gae)->Arg(128)->Arg(1024);

void bm_cfi(benchmark::State& state) {
  CfiConfig cfg;
  cfg.tau = 1.4;
  cfg.delta = 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(cfi(1.55, cfg, 0.93));
}
BENCHMARK(bm_cfi);

}  // namespace

BENCHMARK_MAIN();
