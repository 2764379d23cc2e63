#include "formnav/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "formnav/evaluation.hpp"
#include "formnav/threading.hpp"

namespace formnav {

void RolloutBuffer::resize(int horizon_, int num_envs_, int n_robots_, int obs_dim_,
                           int act_dim_) {
  horizon = horizon_;
  num_envs = num_envs_;
  n_robots = n_robots_;
  obs_dim = obs_dim_;
  act_dim = act_dim_;
  const size_t s = samples();
  obs.assign(s * obs_dim, 0.0);
  actions.assign(s * act_dim, 0.0);
  logprob_old.assign(s, 0.0);
  rewards.assign(s, 0.0);
  values_old.assign(s, 0.0);
  dones.assign(s, 0);
  active.assign(s, 1);
  edges.assign(static_cast<size_t>(horizon) * num_envs, {});
  bootstrap.assign(static_cast<size_t>(num_envs) * n_robots, 0.0);
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double bootstrap,
                      double gamma, double gae_lambda) {
  const size_t t_len = rewards.size();
  if (values.size() != t_len || dones.size() != t_len)
    throw std::invalid_argument("compute_gae: length mismatch");
  GaeResult out;
  out.advantages.resize(t_len);
  out.returns.resize(t_len);
  double next_value = bootstrap;
  double next_adv = 0.0;
  for (size_t t = t_len; t-- > 0;) {
    const double nonterm = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * nonterm - values[t];
    const double adv = delta + gamma * gae_lambda * nonterm * next_adv;
    out.advantages[t] = adv;
    out.returns[t] = adv + values[t];
    next_value = values[t];
    next_adv = adv;
  }
  return out;
}

Advantages compute_advantages(const RolloutBuffer& buffer, double gamma, double gae_lambda) {
  Advantages out;
  out.a.resize(buffer.samples());
  out.r.resize(buffer.samples());
  for (int e = 0; e < buffer.num_envs; ++e) {
    for (int i = 0; i < buffer.n_robots; ++i) {
      double next_value = buffer.bootstrap[static_cast<size_t>(e) * buffer.n_robots + i];
      double next_adv = 0.0;
      for (int t = buffer.horizon - 1; t >= 0; --t) {
        const size_t k = buffer.idx(e, t, i);
        const double nonterm = buffer.dones[k] ? 0.0 : 1.0;
        const double delta =
            buffer.rewards[k] + gamma * next_value * nonterm - buffer.values_old[k];
        const double adv = delta + gamma * gae_lambda * nonterm * next_adv;
        out.a[k] = adv;
        out.r[k] = adv + buffer.values_old[k];
        next_value = buffer.values_old[k];
        next_adv = adv;
      }
    }
  }
  return out;
}

std::pair<double, double> normalize_advantages(std::vector<double>& a,
                                               std::span<const std::uint8_t> mask) {
  double sum = 0.0;
  size_t count = 0;
  for (size_t k = 0; k < a.size(); ++k)
    if (mask.empty() || mask[k]) {
      sum += a[k];
      ++count;
    }
  if (count == 0) return {0.0, 1.0};
  const double mean = sum / static_cast<double>(count);
  double var = 0.0;
  for (size_t k = 0; k < a.size(); ++k)
    if (mask.empty() || mask[k]) var += (a[k] - mean) * (a[k] - mean);
  const double std_dev = std::sqrt(var / static_cast<double>(count));
  for (double& v : a) v = (v - mean) / (std_dev + 1e-8);
  return {mean, std_dev};
}

PpoLossResult ppo_loss(Policy& policy, const Minibatch& mb, const PpoConfig& cfg,
                       bool backward) {
  const int m = mb.obs.rows();
  const int act_dim = mb.actions.cols();
  double mask_count = 0.0;
  for (double v : mb.mask.data) mask_count += v;
  if (mask_count <= 0.0) throw std::logic_error("ppo_loss: empty minibatch mask");

  nn::Tape tape;
  const int obs_node = tape.constant_ref(mb.obs);
  const Policy::TapeNodes net = policy.forward_tape(tape, obs_node, mb.edges, m);

  const int actions_node = tape.constant_ref(mb.actions);
  const int lp_new = tape.gaussian_logprob(actions_node, net.mu, net.log_std);
  const int ratio = tape.exp(tape.sub(lp_new, tape.constant_ref(mb.logprob_old)));

  // divergence check + clip statistics straight off the forward values
  PpoLossResult res;
  {
    const nn::Tensor& rv = tape.value(ratio);
    double clipped = 0.0, kl = 0.0;
    for (int k = 0; k < m; ++k) {
      if (mb.mask[static_cast<size_t>(k)] == 0.0) continue;
      const double r = rv[static_cast<size_t>(k)];
      if (!std::isfinite(r) || r <= 0.0)
        throw DivergenceError("ppo_loss: non-finite probability ratio");
      if (std::abs(r - 1.0) > cfg.clip) clipped += 1.0;
      kl += r - 1.0 - std::log(r);
    }
    res.clip_fraction = clipped / mask_count;
    res.approx_kl = kl / mask_count;
  }

  const int adv_node = tape.constant_ref(mb.advantages);
  const int mask_node = tape.constant_ref(mb.mask);
  const int surr1 = tape.mul(ratio, adv_node);
  const int surr2 = tape.mul(tape.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), adv_node);
  const int surrogate =
      tape.scale(tape.sum(tape.mul(tape.min(surr1, surr2), mask_node)), 1.0 / mask_count);

  const nn::Tensor returns_col({m, 1}, mb.returns.data);
  const nn::Tensor mask_col({m, 1}, mb.mask.data);
  const int vdiff = tape.sub(net.values, tape.constant_ref(returns_col));
  const int vloss = tape.scale(
      tape.sum(tape.mul(tape.mul(vdiff, vdiff), tape.constant_ref(mask_col))),
      1.0 / mask_count);

  // diag-gaussian entropy is state independent: sum(log_std) + k/2*(1+ln 2pi)
  const int entropy = tape.add_const(tape.sum(net.log_std),
                                     act_dim * 0.5 * (1.0 + std::log(2.0 * std::numbers::pi)));

  const int loss = tape.add(tape.add(tape.scale(surrogate, -1.0), tape.scale(vloss, cfg.value_coef)),
                            tape.scale(entropy, -cfg.entropy_coef));

  res.loss = tape.value(loss)[0];
  res.surrogate = tape.value(surrogate)[0];
  res.value_loss = tape.value(vloss)[0];
  res.entropy = tape.value(entropy)[0];
  if (!std::isfinite(res.loss)) throw DivergenceError("ppo_loss: non-finite loss");
  if (backward) tape.backward(loss);
  return res;
}

namespace {

// deterministic fisher-yates; std::shuffle is implementation-defined
void shuffle_indices(std::vector<int>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng.next_u64() % i]);
}

Minibatch assemble_minibatch(const RolloutBuffer& buf, const Advantages& adv,
                             std::span<const int> team_steps) {
  const int n = buf.n_robots;
  const int m = static_cast<int>(team_steps.size()) * n;
  Minibatch mb;
  mb.obs = nn::Tensor::zeros({m, buf.obs_dim});
  mb.actions = nn::Tensor::zeros({m, buf.act_dim});
  mb.logprob_old = nn::Tensor::zeros({m});
  mb.advantages = nn::Tensor::zeros({m});
  mb.returns = nn::Tensor::zeros({m});
  mb.mask = nn::Tensor::zeros({m});
  int row = 0;
  for (const int step : team_steps) {
    const int e = step / buf.horizon;
    const int t = step % buf.horizon;
    for (const auto& [a, b] : buf.edges[static_cast<size_t>(e) * buf.horizon + t])
      mb.edges.emplace_back(row + a, row + b);
    for (int i = 0; i < n; ++i, ++row) {
      const size_t k = buf.idx(e, t, i);
      for (int f = 0; f < buf.obs_dim; ++f)
        mb.obs.at(row, f) = buf.obs[k * buf.obs_dim + f];
      for (int f = 0; f < buf.act_dim; ++f)
        mb.actions.at(row, f) = buf.actions[k * buf.act_dim + f];
      mb.logprob_old[static_cast<size_t>(row)] = buf.logprob_old[k];
      mb.advantages[static_cast<size_t>(row)] = adv.a[k];
      mb.returns[static_cast<size_t>(row)] = adv.r[k];
      mb.mask[static_cast<size_t>(row)] = buf.active[k] ? 1.0 : 0.0;
    }
  }
  return mb;
}

}  // namespace

UpdateStats update(Policy& policy, const RolloutBuffer& buffer, const PpoConfig& cfg,
                   Rng& rng) {
  Advantages adv = compute_advantages(buffer, cfg.gamma, cfg.gae_lambda);
  normalize_advantages(adv.a, buffer.active);

  const int team_steps_total = buffer.horizon * buffer.num_envs;
  const int per_batch = std::max(1, cfg.minibatch_size / buffer.n_robots);
  std::vector<int> order(static_cast<size_t>(team_steps_total));
  std::iota(order.begin(), order.end(), 0);

  UpdateStats stats;
  bool kl_stop = false;
  for (int epoch = 0; epoch < cfg.epochs && !kl_stop; ++epoch) {
    shuffle_indices(order, rng);
    for (int begin = 0; begin < team_steps_total; begin += per_batch) {
      const int end = std::min(begin + per_batch, team_steps_total);
      const std::span<const int> chunk(order.data() + begin,
                                       static_cast<size_t>(end - begin));
      bool any_active = false;
      for (int step : chunk)
        for (int i = 0; i < buffer.n_robots && !any_active; ++i)
          any_active = buffer.active[buffer.idx(step / buffer.horizon,
                                                step % buffer.horizon, i)] != 0;
      if (!any_active) continue;

      const Minibatch mb = assemble_minibatch(buffer, adv, chunk);
      const PpoLossResult r = ppo_loss(policy, mb, cfg, true);
      policy.params().adam_step(cfg.learning_rate);
      policy.clamp_log_std();

      stats.loss += r.loss;
      stats.clip_fraction += r.clip_fraction;
      stats.approx_kl += r.approx_kl;
      stats.value_loss += r.value_loss;
      stats.entropy += r.entropy;
      ++stats.minibatches;

      if (cfg.target_kl > 0.0 && r.approx_kl > cfg.target_kl) {
        kl_stop = true;
        break;
      }
    }
  }
  if (stats.minibatches > 0) {
    const double mbs = stats.minibatches;
    stats.loss /= mbs;
    stats.clip_fraction /= mbs;
    stats.approx_kl /= mbs;
    stats.value_loss /= mbs;
    stats.entropy /= mbs;
  }
  return stats;
}

namespace {

struct Worker {
  Scenario base;
  std::optional<CorridorParams> corridor;
  FormationSpec formation;
  RewardConfig reward;
  EnvConfig env_cfg;
  bool curriculum = false;
  double anneal = 1.0;  // width band above the target: 1 = full range, 0 = target only
  Rng rng{0};

  std::optional<Env> env;
  nn::Tensor obs;
  double episode_return = 0.0;
  std::vector<double> finished_returns;

  void start_episode() {
    Scenario sc = base;
    if (curriculum && corridor) {
      // the band ends just below the target width (85-95% of it) so the
      // policy carries spare wall clearance at the width it is evaluated on
      CorridorParams p = *corridor;
      const double hi_end = 0.95 * p.narrow;
      const double lo_end = 0.85 * p.narrow;
      const double hi = hi_end + (p.wide - hi_end) * anneal;
      double lo = p.narrow + (lo_end - p.narrow) * (1.0 - anneal);
      lo = std::max(lo, 2.0 * p.robot_radius + 0.01);
      p.narrow = rng.uniform(lo, std::max(lo, hi));
      sc = build_corridor(p);
    }
    env.emplace(std::move(sc), formation, reward, env_cfg);
    obs = env->reset(rng.next_u64());
  }
};

void collect_worker(Worker& w, int e, const Policy& policy, const PpoConfig& cfg,
                    RolloutBuffer& buf) {
  const int n = buf.n_robots;
  for (int t = 0; t < buf.horizon; ++t) {
    const TeamGraph graph = w.env->graph();
    const PolicyOutput out = policy.forward(w.obs, graph);
    const Policy::Sample sample = policy.sample_actions(out, w.rng);
    if (!out.mu.all_finite() || !sample.actions.all_finite())
      throw DivergenceError("rollout: non-finite policy output");

    buf.edges[static_cast<size_t>(e) * buf.horizon + t] = graph.edges;
    const std::span<const std::uint8_t> arrived = w.env->arrived();
    for (int i = 0; i < n; ++i) {
      const size_t k = buf.idx(e, t, i);
      for (int f = 0; f < buf.obs_dim; ++f) buf.obs[k * buf.obs_dim + f] = w.obs.at(i, f);
      for (int f = 0; f < buf.act_dim; ++f)
        buf.actions[k * buf.act_dim + f] = sample.actions.at(i, f);
      buf.logprob_old[k] = sample.logprob[static_cast<size_t>(i)];
      buf.values_old[k] = out.values[static_cast<size_t>(i)];
      buf.active[k] = arrived[static_cast<size_t>(i)] ? 0 : 1;
    }

    std::vector<Vec2> acts(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) acts[static_cast<size_t>(i)] = {sample.actions.at(i, 0),
                                                                sample.actions.at(i, 1)};
    const Env::StepResult res = w.env->step(acts);

    double team_reward = 0.0;
    for (int i = 0; i < n; ++i) {
      buf.rewards[buf.idx(e, t, i)] = res.rewards[static_cast<size_t>(i)];
      team_reward += res.rewards[static_cast<size_t>(i)];
    }
    w.episode_return += team_reward / n;

    if (!res.episode_done) {
      for (int i = 0; i < n; ++i) buf.dones[buf.idx(e, t, i)] = res.done[static_cast<size_t>(i)];
      w.obs = res.observations;
      continue;
    }

    // episode over: collision/all-arrived are terminal; a max_steps cut is
    // a truncation, so alive robots bootstrap with V(s') folded into r
    const bool terminal = w.env->any_collision() ||
                          std::all_of(res.reached.begin(), res.reached.end(),
                                      [](std::uint8_t v) { return v != 0; });
    if (!terminal) {
      const PolicyOutput tail = policy.forward(res.observations, w.env->graph());
      for (int i = 0; i < n; ++i) {
        const size_t k = buf.idx(e, t, i);
        if (buf.active[k] && !res.reached[static_cast<size_t>(i)])
          buf.rewards[k] += cfg.gamma * tail.values[static_cast<size_t>(i)];
      }
    }
    for (int i = 0; i < n; ++i) buf.dones[buf.idx(e, t, i)] = 1;
    w.finished_returns.push_back(w.episode_return);
    w.episode_return = 0.0;
    w.start_episode();
  }

  const PolicyOutput tail = policy.forward(w.obs, w.env->graph());
  for (int i = 0; i < n; ++i)
    buf.bootstrap[static_cast<size_t>(e) * n + i] = tail.values[static_cast<size_t>(i)];
}

}  // namespace

TrainResult train(std::span<const Scenario> scenario_set, const PpoConfig& cfg,
                  const RewardConfig& reward, const EnvConfig& env_cfg,
                  std::uint64_t seed, const PolicyConfig& policy_cfg) {
  if (scenario_set.empty()) throw std::invalid_argument("train: empty scenario set");
  if (cfg.total_steps < 0 || cfg.num_envs < 1 || cfg.horizon < 1)
    throw std::invalid_argument("train: bad budget");

  TrainResult result{Policy(policy_cfg, Rng::derive(seed, 0)),
                     Policy(policy_cfg, Rng::derive(seed, 0))};
  Policy& policy = result.policy;
  Rng master(Rng::derive(seed, 1));

  const int n = scenario_set[0].n_robots;
  std::vector<Worker> workers(static_cast<size_t>(cfg.num_envs));
  for (int e = 0; e < cfg.num_envs; ++e) {
    Worker& w = workers[static_cast<size_t>(e)];
    w.base = scenario_set[static_cast<size_t>(e) % scenario_set.size()];
    if (w.base.n_robots != n) throw std::invalid_argument("train: mixed team sizes");
    w.corridor = corridor_params_from(w.base);
    w.formation = FormationSpec::make(w.base.formation, w.base.n_robots,
                                      w.base.formation_scale, w.base.robot_radius);
    w.reward = reward;
    w.env_cfg = env_cfg;
    w.curriculum = cfg.curriculum;
    w.rng = Rng(Rng::derive(seed, 100 + static_cast<std::uint64_t>(e)));
    w.start_episode();
  }

  const FormationSpec eval_formation = workers[0].formation;
  std::vector<std::uint64_t> eval_seeds;
  for (int k = 0; k < cfg.eval_episodes; ++k)
    eval_seeds.push_back(Rng::derive(seed, 5000 + static_cast<std::uint64_t>(k)));

  RolloutBuffer buf;
  buf.resize(cfg.horizon, cfg.num_envs, n, policy_cfg.obs_dim, policy_cfg.action_dim);

  double last_sr = -1.0, last_cfi = -1.0;
  double best_sr = -1.0, best_cfi = -1.0;
  bool have_best = false;
  double last_mean_return = 0.0;
  int iter = 0;

  while (result.env_steps < cfg.total_steps) {
    ++iter;
    const Policy snapshot = policy;

    // shrink the width band linearly so the last third of training sees
    // only the hardest widths; easy widths dominate early, hard ones late
    const double progress = static_cast<double>(result.env_steps) / cfg.total_steps;
    const double anneal = std::max(0.0, 1.0 - progress / 0.7);
    for (Worker& w : workers) w.anneal = anneal;

    PpoConfig iter_cfg = cfg;
    if (cfg.lr_decay)
      iter_cfg.learning_rate = cfg.learning_rate * (1.0 - progress);

    UpdateStats us;
    try {
      parallel_for(cfg.num_envs, [&](int e) {
        collect_worker(workers[static_cast<size_t>(e)], e, policy, cfg, buf);
      });
      result.env_steps += static_cast<std::int64_t>(cfg.horizon) * cfg.num_envs;
      us = update(policy, buf, iter_cfg, master);
    } catch (const DivergenceError&) {
      policy = snapshot;
      result.diverged = true;
      break;
    }

    double return_sum = 0.0;
    int return_count = 0;
    for (Worker& w : workers) {
      for (double r : w.finished_returns) {
        return_sum += r;
        ++return_count;
      }
      w.finished_returns.clear();
    }
    if (return_count > 0) last_mean_return = return_sum / return_count;

    const bool final_iter = result.env_steps >= cfg.total_steps;
    if (cfg.eval_episodes > 0 && cfg.eval_every > 0 &&
        (iter % cfg.eval_every == 0 || final_iter)) {
      const EvalSummary ev = evaluate(scenario_set[0], eval_formation,
                                      policy_controller(policy), reward, env_cfg, eval_seeds);
      last_sr = ev.sr_mean;
      last_cfi = ev.cfi_mean.count(0.5) ? ev.cfi_mean.at(0.5) : 0.0;
      if (!have_best || last_sr > best_sr || (last_sr == best_sr && last_cfi > best_cfi)) {
        have_best = true;
        best_sr = last_sr;
        best_cfi = last_cfi;
        result.best = policy;
      }
    }

    result.log.push_back({iter, result.env_steps, last_mean_return, last_sr, last_cfi,
                          us.loss, us.clip_fraction, us.approx_kl, us.entropy});

    if (cfg.early_stop_sr >= 0.0 && last_sr >= cfg.early_stop_sr) break;
  }

  if (!have_best) result.best = policy;
  return result;
}

}  // namespace formnav
