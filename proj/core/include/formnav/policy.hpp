#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "formnav/nn.hpp"
#include "formnav/rng.hpp"
#include "formnav/team.hpp"
#include "formnav/vec2.hpp"

namespace formnav {

struct PolicyConfig {
  int obs_dim = 7;
  int hidden = 64;
  int action_dim = 2;
  int encoder_layers = 4;
  int gnn_layers = 1;
  double log_std_init = std::log(0.5);
  double log_std_min = std::log(0.01);
  double log_std_max = std::log(2.0);
};

struct PolicyOutput {
  nn::Tensor mu;       // [n, action_dim]
  nn::Tensor log_std;  // [action_dim]
  nn::Tensor values;   // [n]
};

// hierarchical controller: per-robot encoder MLP feeding a graph
// coordination layer, with gaussian action head and value head on the
// shared embedding.
class Policy {
 public:
  Policy(PolicyConfig cfg, std::uint64_t seed);

  const PolicyConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  PolicyOutput forward(const nn::Tensor& obs, const TeamGraph& graph) const;

  struct Sample {
    nn::Tensor actions;           // [n, action_dim]
    std::vector<double> logprob;  // [n]
  };
  Sample sample_actions(const PolicyOutput& out, Rng& rng) const;

  // evaluation mode: the gaussian mean, no sampling
  std::vector<Vec2> act_deterministic(const nn::Tensor& obs, const TeamGraph& graph) const;

  struct TapeNodes {
    int mu = -1;
    int values = -1;  // [rows, 1]
    int log_std = -1;
  };
  // training-path forward: parameters become tape leaves so backward()
  // reaches them. `edges` may span several concatenated team blocks.
  TapeNodes forward_tape(nn::Tape& tape, int obs_node,
                         std::span<const std::pair<int, int>> edges, int n_nodes);

  // projects log_std back into its configured interval (applied after
  // every optimizer step rather than inside the graph, so gradients are
  // never blocked by the clamp)
  void clamp_log_std();

 private:
  using LeafFn = std::function<int(const std::string&)>;
  TapeNodes build(nn::Tape& tape, int obs_node,
                  std::span<const std::pair<int, int>> edges, int n_nodes,
                  const LeafFn& leaf) const;

  PolicyConfig cfg_;
  nn::ParamStore params_;
};

}  // namespace formnav
