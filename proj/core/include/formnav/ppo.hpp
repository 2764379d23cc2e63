#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "formnav/env.hpp"
#include "formnav/policy.hpp"
#include "formnav/rng.hpp"
#include "formnav/world.hpp"

namespace formnav {

// non-finite ratio or loss during an update; training aborts and keeps the
// last good parameters
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  int minibatch_size = 256;  // robot samples
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double learning_rate = 3e-4;
  std::int64_t total_steps = 1'000'000;
  int num_envs = 8;
  int horizon = 128;        // team steps per env per iteration
  int eval_every = 10;      // iterations between deterministic evals
  int eval_episodes = 4;
  bool curriculum = true;   // resample the narrow width each episode,
                            // annealing the band toward the target width
  double early_stop_sr = -1.0;  // stop once eval SR (percent) reaches this
  double target_kl = -1.0;      // skip remaining minibatches past this kl; <0 disables
  bool lr_decay = false;        // decay the step size linearly to zero
};

// samples collected under one parameter snapshot, laid out per env stream:
// flat index ((e*horizon)+t)*n + i
struct RolloutBuffer {
  int horizon = 0;
  int num_envs = 0;
  int n_robots = 0;
  int obs_dim = 7;
  int act_dim = 2;

  std::vector<double> obs;
  std::vector<double> actions;
  std::vector<double> logprob_old;
  std::vector<double> rewards;      // truncation bootstraps already folded in
  std::vector<double> values_old;
  std::vector<std::uint8_t> dones;  // robot stream ends at this sample
  std::vector<std::uint8_t> active; // sample participates in the loss
  std::vector<std::vector<std::pair<int, int>>> edges;  // per (e, t)
  std::vector<double> bootstrap;    // [e*n + i], value at the horizon cut

  void resize(int horizon, int num_envs, int n_robots, int obs_dim, int act_dim);
  size_t idx(int e, int t, int i) const {
    return (static_cast<size_t>(e) * horizon + t) * n_robots + i;
  }
  size_t samples() const {
    return static_cast<size_t>(horizon) * num_envs * n_robots;
  }
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// one stream: delta_t = r_t + gamma*V_{t+1}*(1-done_t) - V_t with
// V_T = bootstrap, A_t = delta_t + gamma*lambda*(1-done_t)*A_{t+1}
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double bootstrap,
                      double gamma, double gae_lambda);

struct Advantages {
  std::vector<double> a;  // same flat layout as the buffer
  std::vector<double> r;
};

Advantages compute_advantages(const RolloutBuffer& buffer, double gamma, double gae_lambda);

// in-place normalization over the masked samples; returns (mean, std)
std::pair<double, double> normalize_advantages(std::vector<double>& a,
                                               std::span<const std::uint8_t> mask);

// one gradient batch: team blocks stacked row-wise, graphs merged with
// per-block node offsets
struct Minibatch {
  nn::Tensor obs;          // [M, obs_dim]
  nn::Tensor actions;      // [M, act_dim]
  nn::Tensor logprob_old;  // [M]
  nn::Tensor advantages;   // [M], already normalized
  nn::Tensor returns;      // [M]
  nn::Tensor mask;         // [M] of 0/1
  std::vector<std::pair<int, int>> edges;
};

struct PpoLossResult {
  double loss = 0.0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// clipped-surrogate objective; when backward is set, gradients are left in
// the policy's ParamStore. throws DivergenceError on non-finite ratios.
PpoLossResult ppo_loss(Policy& policy, const Minibatch& mb, const PpoConfig& cfg,
                       bool backward);

struct UpdateStats {
  double loss = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  int minibatches = 0;
};

UpdateStats update(Policy& policy, const RolloutBuffer& buffer, const PpoConfig& cfg,
                   Rng& rng);

struct TrainLogRecord {
  int iter = 0;
  std::int64_t env_steps = 0;
  double mean_return = 0.0;
  double sr_eval = -1.0;   // last deterministic eval, percent; -1 before any
  double cfi_eval = -1.0;  // cfi at delta 0.5
  double loss = 0.0;
  double clip_frac = 0.0;
  double kl = 0.0;
  double entropy = 0.0;
};

struct TrainResult {
  Policy policy;        // final parameters
  Policy best;          // best-eval parameters (by sr, then cfi)
  bool diverged = false;
  std::vector<TrainLogRecord> log;
  std::int64_t env_steps = 0;
};

// synchronized training over parallel envs. workers cycle through the
// scenario set; per-episode curriculum resamples the corridor narrow width
// in [narrow, wide] when enabled and the scenario is corridor-shaped.
TrainResult train(std::span<const Scenario> scenario_set, const PpoConfig& cfg,
                  const RewardConfig& reward, const EnvConfig& env_cfg,
                  std::uint64_t seed, const PolicyConfig& policy_cfg = {});

}  // namespace formnav
