#include "formnav/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace formnav {

Policy::Policy(PolicyConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  Rng rng(seed);
  auto dense = [&](const std::string& name, int in, int out) {
    nn::Param& w = params_.add(name + ".W", {in, out});
    nn::init_uniform_fan_in(w.value, in, rng);
    nn::Param& b = params_.add(name + ".b", {out});
    nn::init_uniform_fan_in(b.value, in, rng);
  };
  int in = cfg_.obs_dim;
  for (int l = 1; l <= cfg_.encoder_layers; ++l) {
    dense("enc" + std::to_string(l), in, cfg_.hidden);
    in = cfg_.hidden;
  }
  for (int l = 1; l <= cfg_.gnn_layers; ++l) {
    nn::Param& w = params_.add("gnn" + std::to_string(l) + ".W", {cfg_.hidden, cfg_.hidden});
    nn::init_uniform_fan_in(w.value, cfg_.hidden, rng);
  }
  dense("act1", cfg_.hidden, cfg_.hidden);
  dense("act2", cfg_.hidden, cfg_.action_dim);
  dense("val1", cfg_.hidden, cfg_.hidden);
  dense("val2", cfg_.hidden, 1);
  params_.add("log_std", {cfg_.action_dim});
  std::fill(params_.at("log_std").value.data.begin(),
            params_.at("log_std").value.data.end(), cfg_.log_std_init);
}

Policy::TapeNodes Policy::build(nn::Tape& tape, int obs_node,
                                std::span<const std::pair<int, int>> edges, int n_nodes,
                                const LeafFn& leaf) const {
  int h = obs_node;
  for (int l = 1; l <= cfg_.encoder_layers; ++l) {
    const std::string name = "enc" + std::to_string(l);
    h = tape.relu(tape.linear(h, leaf(name + ".W"), leaf(name + ".b")));
  }
  for (int l = 1; l <= cfg_.gnn_layers; ++l)
    h = tape.gnn(h, leaf("gnn" + std::to_string(l) + ".W"), edges, n_nodes);

  const int a1 = tape.relu(tape.linear(h, leaf("act1.W"), leaf("act1.b")));
  TapeNodes out;
  out.mu = tape.linear(a1, leaf("act2.W"), leaf("act2.b"));
  const int v1 = tape.linear(h, leaf("val1.W"), leaf("val1.b"));
  out.values = tape.linear(v1, leaf("val2.W"), leaf("val2.b"));
  out.log_std = leaf("log_std");
  return out;
}

PolicyOutput Policy::forward(const nn::Tensor& obs, const TeamGraph& graph) const {
  if (!obs.all_finite()) throw std::invalid_argument("policy forward: non-finite observation");
  if (obs.cols() != cfg_.obs_dim || obs.rows() != graph.n)
    throw std::invalid_argument("policy forward: observation shape mismatch");
  nn::Tape tape;
  const int obs_node = tape.constant_ref(obs);
  const TapeNodes nodes =
      build(tape, obs_node, graph.edges, graph.n,
            [&](const std::string& name) { return tape.constant_ref(params_.at(name).value); });
  PolicyOutput out;
  out.mu = tape.value(nodes.mu);
  out.log_std = tape.value(nodes.log_std);
  const nn::Tensor& v = tape.value(nodes.values);
  out.values = nn::Tensor({graph.n}, v.data);
  return out;
}

Policy::TapeNodes Policy::forward_tape(nn::Tape& tape, int obs_node,
                                       std::span<const std::pair<int, int>> edges,
                                       int n_nodes) {
  return build(tape, obs_node, edges, n_nodes,
               [&](const std::string& name) { return tape.param(params_.at(name)); });
}

Policy::Sample Policy::sample_actions(const PolicyOutput& out, Rng& rng) const {
  const int n = out.mu.rows(), k = out.mu.cols();
  Sample s;
  s.actions = nn::Tensor::zeros({n, k});
  s.logprob.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int kk = 0; kk < k; ++kk) {
      const double sigma = std::exp(out.log_std[static_cast<size_t>(kk)]);
      s.actions.at(i, kk) = out.mu.at(i, kk) + sigma * rng.normal();
    }
    s.logprob[static_cast<size_t>(i)] = nn::gaussian_logprob_row(
        std::span(&s.actions.at(i, 0), static_cast<size_t>(k)),
        std::span(&out.mu.at(i, 0), static_cast<size_t>(k)),
        std::span(out.log_std.data.data(), static_cast<size_t>(k)));
  }
  return s;
}

std::vector<Vec2> Policy::act_deterministic(const nn::Tensor& obs, const TeamGraph& graph) const {
  const PolicyOutput out = forward(obs, graph);
  std::vector<Vec2> actions;
  actions.reserve(static_cast<size_t>(graph.n));
  for (int i = 0; i < graph.n; ++i) actions.push_back({out.mu.at(i, 0), out.mu.at(i, 1)});
  return actions;
}

void Policy::clamp_log_std() {
  for (double& v : params_.at("log_std").value.data)
    v = std::clamp(v, cfg_.log_std_min, cfg_.log_std_max);
}

}  // namespace formnav
