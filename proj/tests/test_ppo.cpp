#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "formnav/env.hpp"
#include "formnav/policy.hpp"
#include "formnav/ppo.hpp"
#include "formnav/rng.hpp"
#include "formnav/team.hpp"
#include "formnav/world.hpp"

using namespace formnav;

namespace {

// reference: discounted delta sum, cut at episode ends
std::vector<double> brute_gae(std::span<const double> r, std::span<const double> v,
                              std::span<const std::uint8_t> d, double bootstrap,
                              double gamma, double lam) {
  const int T = static_cast<int>(r.size());
  std::vector<double> a(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    double acc = 0.0, coef = 1.0;
    for (int l = t; l < T; ++l) {
      const double next = (l == T - 1) ? bootstrap : v[static_cast<size_t>(l) + 1];
      const double nonterm = d[static_cast<size_t>(l)] ? 0.0 : 1.0;
      acc += coef * (r[static_cast<size_t>(l)] + gamma * next * nonterm -
                     v[static_cast<size_t>(l)]);
      if (d[static_cast<size_t>(l)]) break;
      coef *= gamma * lam;
    }
    a[static_cast<size_t>(t)] = acc;
  }
  return a;
}

double manual_logprob(const Vec2& a, const Vec2& mu, double log_std) {
  const double s = std::exp(log_std);
  auto one = [&](double x, double m) {
    const double z = (x - m) / s;
    return -0.5 * z * z - log_std - 0.5 * std::log(2.0 * std::numbers::pi);
  };
  return one(a.x, mu.x) + one(a.y, mu.y);
}

// single-robot minibatch around a fixed observation
Minibatch solo_minibatch(const Policy& policy, Vec2 action_offset, double advantage,
                         double logprob_shift) {
  nn::Tensor obs = nn::Tensor::zeros({1, 7});
  for (int f = 0; f < 7; ++f) obs.at(0, f) = 0.1 * (f + 1);
  TeamGraph g;
  g.n = 1;
  const PolicyOutput out = policy.forward(obs, g);

  const Vec2 mu{out.mu.at(0, 0), out.mu.at(0, 1)};
  const Vec2 act = mu + action_offset;
  const double lp = manual_logprob(act, mu, out.log_std[0]);

  Minibatch mb;
  mb.obs = obs;
  mb.actions = nn::Tensor::zeros({1, 2});
  mb.actions.at(0, 0) = act.x;
  mb.actions.at(0, 1) = act.y;
  mb.logprob_old = nn::Tensor::zeros({1});
  mb.logprob_old[0] = lp + logprob_shift;
  mb.advantages = nn::Tensor::zeros({1});
  mb.advantages[0] = advantage;
  mb.returns = nn::Tensor::zeros({1});
  mb.mask = nn::Tensor::zeros({1});
  mb.mask[0] = 1.0;
  return mb;
}

}  // namespace

TEST_CASE("compute_gae worked example") {
  // r = {1,1}, v = {0,0}, bootstrap 0: A1 = 1, A0 = 1 + 0.99*0.95
  const std::vector<double> r{1.0, 1.0};
  const std::vector<double> v{0.0, 0.0};
  const std::vector<std::uint8_t> d{0, 0};
  const GaeResult g = compute_gae(r, v, d, 0.0, 0.99, 0.95);
  REQUIRE(g.advantages.size() == 2);
  CHECK(g.advantages[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.advantages[0] == doctest::Approx(1.9405).epsilon(1e-12));
  CHECK(g.returns[0] == doctest::Approx(g.advantages[0]).epsilon(1e-12));

  // a done at t=0 cuts the stream: A0 = r0 - v0 only
  const std::vector<std::uint8_t> d2{1, 0};
  const GaeResult g2 = compute_gae(r, v, d2, 0.0, 0.99, 0.95);
  CHECK(g2.advantages[0] == doctest::Approx(1.0).epsilon(1e-12));

  // bootstrap enters the last delta
  const GaeResult g3 = compute_gae(r, v, d, 2.0, 0.99, 0.95);
  CHECK(g3.advantages[1] == doctest::Approx(1.0 + 0.99 * 2.0).epsilon(1e-12));
}

TEST_CASE("compute_gae matches the brute-force discounted-delta sum") {
  Rng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    const int T = 40;
    std::vector<double> r(T), v(T);
    std::vector<std::uint8_t> d(T);
    for (int t = 0; t < T; ++t) {
      r[static_cast<size_t>(t)] = rng.normal();
      v[static_cast<size_t>(t)] = rng.normal();
      d[static_cast<size_t>(t)] = rng.uniform() < 0.15 ? 1 : 0;
    }
    const double bootstrap = rng.normal();
    const double gamma = rng.uniform(0.9, 0.999);
    const double lam = rng.uniform(0.8, 1.0);
    const GaeResult g = compute_gae(r, v, d, bootstrap, gamma, lam);
    const std::vector<double> ref = brute_gae(r, v, d, bootstrap, gamma, lam);
    for (int t = 0; t < T; ++t) {
      CHECK(g.advantages[static_cast<size_t>(t)] ==
            doctest::Approx(ref[static_cast<size_t>(t)]).epsilon(1e-9));
      CHECK(g.returns[static_cast<size_t>(t)] ==
            doctest::Approx(ref[static_cast<size_t>(t)] + v[static_cast<size_t>(t)])
                .epsilon(1e-9));
    }
  }
}

TEST_CASE("compute_advantages respects the buffer layout") {
  Rng rng(72);
  RolloutBuffer buf;
  buf.resize(6, 2, 3, 7, 2);
  for (double& x : buf.rewards) x = rng.normal();
  for (double& x : buf.values_old) x = rng.normal();
  for (double& x : buf.bootstrap) x = rng.normal();
  for (auto& x : buf.dones) x = rng.uniform() < 0.2 ? 1 : 0;

  const Advantages adv = compute_advantages(buf, 0.99, 0.95);
  for (int e = 0; e < 2; ++e)
    for (int i = 0; i < 3; ++i) {
      std::vector<double> r, v;
      std::vector<std::uint8_t> d;
      for (int t = 0; t < 6; ++t) {
        r.push_back(buf.rewards[buf.idx(e, t, i)]);
        v.push_back(buf.values_old[buf.idx(e, t, i)]);
        d.push_back(buf.dones[buf.idx(e, t, i)]);
      }
      const GaeResult g = compute_gae(r, v, d, buf.bootstrap[static_cast<size_t>(e) * 3 + i],
                                      0.99, 0.95);
      for (int t = 0; t < 6; ++t) {
        CHECK(adv.a[buf.idx(e, t, i)] == g.advantages[static_cast<size_t>(t)]);
        CHECK(adv.r[buf.idx(e, t, i)] == g.returns[static_cast<size_t>(t)]);
      }
    }
}

TEST_CASE("normalize_advantages uses only masked samples") {
  Rng rng(73);
  std::vector<double> a(200);
  std::vector<std::uint8_t> mask(200);
  for (size_t k = 0; k < a.size(); ++k) {
    a[k] = rng.uniform(-3.0, 5.0);
    mask[k] = rng.uniform() < 0.7 ? 1 : 0;
  }
  std::vector<double> orig = a;
  const auto [mean, stddev] = normalize_advantages(a, mask);

  double sum = 0.0, sq = 0.0;
  size_t count = 0;
  for (size_t k = 0; k < a.size(); ++k)
    if (mask[k]) {
      sum += a[k];
      sq += a[k] * a[k];
      ++count;
    }
  REQUIRE(count > 10);
  CHECK(std::abs(sum / count) < 1e-9);
  CHECK(std::abs(std::sqrt(sq / count) - 1.0) < 1e-6);

  // reported stats describe the pre-normalization masked samples
  double ref_mean = 0.0;
  for (size_t k = 0; k < orig.size(); ++k)
    if (mask[k]) ref_mean += orig[k];
  ref_mean /= static_cast<double>(count);
  CHECK(mean == doctest::Approx(ref_mean).epsilon(1e-12));
  CHECK(stddev > 0.0);

  // whole vector gets the same affine map
  for (size_t k = 0; k < a.size(); ++k)
    CHECK(a[k] == doctest::Approx((orig[k] - mean) / (stddev + 1e-8)).epsilon(1e-12));
}

TEST_CASE("clipped samples contribute exactly zero gradient") {
  PpoConfig cfg;
  cfg.value_coef = 0.0;
  cfg.entropy_coef = 0.0;

  SUBCASE("ratio above the band with positive advantage") {
    Policy policy(PolicyConfig{}, 123);
    // logprob_old = lp - ln4 -> ratio = 4 > 1.2
    const Minibatch mb = solo_minibatch(policy, {0.2, -0.1}, 1.0, -std::log(4.0));
    const PpoLossResult res = ppo_loss(policy, mb, cfg, true);
    CHECK(res.clip_fraction == 1.0);
    CHECK(res.approx_kl == doctest::Approx(4.0 - 1.0 - std::log(4.0)).epsilon(1e-6));
    for (const nn::Param& p : policy.params().all())
      for (double gr : p.grad.data) CHECK(gr == 0.0);
  }

  SUBCASE("ratio below the band with negative advantage") {
    Policy policy(PolicyConfig{}, 321);
    // logprob_old = lp + ln4 -> ratio = 0.25 < 0.8
    const Minibatch mb = solo_minibatch(policy, {-0.3, 0.15}, -2.0, std::log(4.0));
    const PpoLossResult res = ppo_loss(policy, mb, cfg, true);
    CHECK(res.clip_fraction == 1.0);
    for (const nn::Param& p : policy.params().all())
      for (double gr : p.grad.data) CHECK(gr == 0.0);
  }

  SUBCASE("unclipped sample moves the parameters") {
    Policy policy(PolicyConfig{}, 55);
    const Minibatch mb = solo_minibatch(policy, {0.2, 0.0}, 1.0, 0.0);
    const PpoLossResult res = ppo_loss(policy, mb, cfg, true);
    CHECK(res.clip_fraction == 0.0);
    double total = 0.0;
    for (const nn::Param& p : policy.params().all())
      for (double gr : p.grad.data) total += std::abs(gr);
    CHECK(total > 0.0);
  }
}

TEST_CASE("clip fraction stays in [0,1] on random batches") {
  Rng rng(91);
  Policy policy(PolicyConfig{}, 7);
  PpoConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 8;
    Minibatch mb;
    mb.obs = nn::Tensor::zeros({m, 7});
    mb.actions = nn::Tensor::zeros({m, 2});
    mb.logprob_old = nn::Tensor::zeros({m});
    mb.advantages = nn::Tensor::zeros({m});
    mb.returns = nn::Tensor::zeros({m});
    mb.mask = nn::Tensor::zeros({m});
    for (int k = 0; k < m; ++k) {
      for (int f = 0; f < 7; ++f) mb.obs.at(k, f) = rng.uniform(-1.0, 1.0);
      mb.actions.at(k, 0) = rng.uniform(-1.0, 1.0);
      mb.actions.at(k, 1) = rng.uniform(-1.0, 1.0);
      mb.logprob_old[static_cast<size_t>(k)] = rng.uniform(-4.0, 0.0);
      mb.advantages[static_cast<size_t>(k)] = rng.normal();
      mb.returns[static_cast<size_t>(k)] = rng.normal();
      mb.mask[static_cast<size_t>(k)] = rng.uniform() < 0.8 ? 1.0 : 0.0;
    }
    bool any_mask = false;
    for (double v : mb.mask.data) any_mask |= (v != 0.0);
    if (!any_mask) mb.mask[0] = 1.0;

    const PpoLossResult res = ppo_loss(policy, mb, cfg, false);
    CHECK(res.clip_fraction >= 0.0);
    CHECK(res.clip_fraction <= 1.0);
    CHECK(std::isfinite(res.loss));
  }
}

TEST_CASE("non-finite ratio raises DivergenceError") {
  Policy policy(PolicyConfig{}, 9);
  PpoConfig cfg;
  const Minibatch mb = solo_minibatch(policy, {0.1, 0.1}, 1.0, -2000.0);
  CHECK_THROWS_AS(ppo_loss(policy, mb, cfg, false), DivergenceError);
}

TEST_CASE("update moves the mean toward the advantaged action") {
  Policy policy(PolicyConfig{}, 1234);

  // two one-robot envs in the same state; +x action rewarded, -x punished
  RolloutBuffer buf;
  buf.resize(1, 2, 1, 7, 2);
  nn::Tensor obs = nn::Tensor::zeros({1, 7});
  for (int f = 0; f < 7; ++f) obs.at(0, f) = 0.05 * (f + 1);
  TeamGraph g;
  g.n = 1;
  const PolicyOutput out = policy.forward(obs, g);
  const Vec2 mu{out.mu.at(0, 0), out.mu.at(0, 1)};
  const double mu_x_before = mu.x;

  const Vec2 offsets[2] = {{0.3, 0.0}, {-0.3, 0.0}};
  const double rewards[2] = {1.0, -1.0};
  for (int e = 0; e < 2; ++e) {
    const size_t k = buf.idx(e, 0, 0);
    for (int f = 0; f < 7; ++f) buf.obs[k * 7 + f] = obs.at(0, f);
    const Vec2 act = mu + offsets[e];
    buf.actions[k * 2 + 0] = act.x;
    buf.actions[k * 2 + 1] = act.y;
    buf.logprob_old[k] = manual_logprob(act, mu, out.log_std[0]);
    buf.rewards[k] = rewards[e];
    buf.values_old[k] = 0.0;
    buf.dones[k] = 1;
    buf.active[k] = 1;
    buf.bootstrap[static_cast<size_t>(e)] = 0.0;
  }

  PpoConfig cfg;
  cfg.minibatch_size = 2;
  cfg.epochs = 8;
  cfg.learning_rate = 3e-3;
  cfg.value_coef = 0.0;  // isolate the policy direction
  Rng rng(5);
  const UpdateStats stats = update(policy, buf, cfg, rng);
  CHECK(stats.minibatches == 8);
  CHECK(std::isfinite(stats.loss));

  const PolicyOutput after = policy.forward(obs, g);
  CHECK(after.mu.at(0, 0) > mu_x_before);
}

TEST_CASE("train is bit-deterministic for a fixed seed") {
  CorridorParams p;
  p.n_robots = 2;
  p.kind = FormationKind::kLine;
  p.scale = 0.7;
  p.wide = 4.0;
  p.narrow = 3.0;
  p.length = 12.0;
  p.taper = 2.0;
  p.max_steps = 80;
  const Scenario sc = build_corridor(p);

  PpoConfig cfg;
  cfg.total_steps = 1024;
  cfg.num_envs = 2;
  cfg.horizon = 32;
  cfg.minibatch_size = 64;
  cfg.eval_every = 8;
  cfg.eval_episodes = 2;

  const std::vector<Scenario> set{sc};
  const TrainResult a = train(set, cfg, RewardConfig{}, EnvConfig{}, 99);
  const TrainResult b = train(set, cfg, RewardConfig{}, EnvConfig{}, 99);

  REQUIRE(a.log.size() == b.log.size());
  REQUIRE(!a.log.empty());
  for (size_t k = 0; k < a.log.size(); ++k) {
    CHECK(a.log[k].iter == b.log[k].iter);
    CHECK(a.log[k].env_steps == b.log[k].env_steps);
    CHECK(a.log[k].mean_return == b.log[k].mean_return);
    CHECK(a.log[k].sr_eval == b.log[k].sr_eval);
    CHECK(a.log[k].loss == b.log[k].loss);
    CHECK(a.log[k].clip_frac == b.log[k].clip_frac);
    CHECK(a.log[k].kl == b.log[k].kl);
    CHECK(a.log[k].entropy == b.log[k].entropy);
  }
  const auto& pa = a.policy.params().all();
  const auto& pb = b.policy.params().all();
  REQUIRE(pa.size() == pb.size());
  for (size_t k = 0; k < pa.size(); ++k) {
    REQUIRE(pa[k].value.data.size() == pb[k].value.data.size());
    for (size_t j = 0; j < pa[k].value.data.size(); ++j)
      CHECK(pa[k].value.data[j] == pb[k].value.data[j]);
  }
  CHECK(a.env_steps == b.env_steps);
  CHECK(a.diverged == false);

  // a different seed takes a different path
  const TrainResult c = train(set, cfg, RewardConfig{}, EnvConfig{}, 100);
  bool same = true;
  for (size_t k = 0; k < pa.size() && same; ++k)
    for (size_t j = 0; j < pa[k].value.data.size(); ++j)
      if (pa[k].value.data[j] != c.policy.params().all()[k].value.data[j]) {
        same = false;
        break;
      }
  CHECK(same == false);
}

TEST_CASE("short-range open-field task trains to full success") {
  // goals one meter ahead, no walls: the policy must learn goal capture
  Scenario sc;
  sc.axis = {1.0, 0.0};
  sc.n_robots = 3;
  sc.formation = FormationKind::kLine;
  sc.formation_scale = 1.0;
  const std::vector<Vec2> offsets = formation_offsets(FormationKind::kLine, 3, 1.0);
  sc.start_centroid = {0.0, 0.0};
  sc.goal_centroid = {1.0, 0.0};
  for (Vec2 o : offsets) {
    sc.starts.push_back(sc.start_centroid + o);
    sc.goals.push_back(sc.goal_centroid + o);
  }
  sc.width_wide = 100.0;
  sc.width_narrow = 100.0;
  sc.narrow_span = {900.0, 901.0};
  sc.max_steps = 40;

  PpoConfig cfg;
  cfg.total_steps = 200'000;
  cfg.eval_every = 3;
  cfg.eval_episodes = 3;
  cfg.early_stop_sr = 100.0;

  const std::vector<Scenario> set{sc};
  const TrainResult res = train(set, cfg, RewardConfig{}, EnvConfig{}, 7);
  CHECK(res.diverged == false);

  double best_sr = -1.0;
  for (const TrainLogRecord& rec : res.log) best_sr = std::max(best_sr, rec.sr_eval);
  CHECK(best_sr == 100.0);
  CHECK(res.env_steps <= 200'000);
}
