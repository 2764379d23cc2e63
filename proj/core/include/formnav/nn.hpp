#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "formnav/rng.hpp"
#include "formnav/team.hpp"

namespace formnav::nn {

// dense row-major float64 tensor, rank 1 or 2
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {}

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double v);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int rows() const { return shape.empty() ? 1 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
  const double& at(int i, int j) const { return data[static_cast<size_t>(i) * cols() + j]; }
  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }

  bool all_finite() const;
};

// learnable tensor with its gradient accumulator and adam state
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
};

class ParamStore {
 public:
  // the returned reference is invalidated by the next add
  Param& add(const std::string& name, std::vector<int> shape);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }

  std::int64_t total_size() const;
  void zero_grad();

  // adam with bias correction; zeroes gradients afterwards
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  std::int64_t step_count() const { return step_count_; }
  void set_step_count(std::int64_t t) { step_count_ = t; }

 private:
  std::vector<Param> params_;  // insertion order; serialization relies on it
  std::unordered_map<std::string, size_t> index_;
  std::int64_t step_count_ = 0;
};

// reverse-mode autodiff over an eagerly evaluated op tape. leaves can
// reference external tensors (params, observation batches) without copying;
// those must outlive the tape. backward() accumulates into Param::grad.
class Tape {
 public:
  int constant(Tensor t);                  // owned copy
  int constant_ref(const Tensor& t);       // external storage, not copied
  int param(Param& p);

  // y[i,:] = x[i,:] * W + b      x: [n,in]  W: [in,out]  b: [out]
  int linear(int x, int w, int b);
  int relu(int x);

  // graph message pass: h_i = W * (z_i + sum_j (z_j - z_i)), neighbors in
  // ascending order. W is applied on the left: h[i,o] = sum_k W[o,k]*agg[i,k].
  int gnn(int z, int w, const TeamGraph& graph);
  int gnn(int z, int w, std::span<const std::pair<int, int>> edges, int n_nodes);

  // diagonal gaussian log-density per row. a,mu: [n,k], log_std: [k] -> [n]
  int gaussian_logprob(int a, int mu, int log_std);

  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);      // elementwise
  int exp(int x);
  int scale(int x, double c);
  int add_const(int x, double c);
  int min(int a, int b);      // elementwise; ties take the first argument
  int clip(int x, double lo, double hi);
  int sum(int x);             // -> scalar
  int mean(int x);            // -> scalar

  const Tensor& value(int id) const;
  const Tensor& grad(int id) const;  // valid after backward()

  // seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. loss must be
  // scalar. repeated calls keep accumulating into Param::grad.
  void backward(int loss);

  size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kConst, kParam, kLinear, kRelu, kGnn, kGaussLogProb,
    kAdd, kSub, kMul, kExp, kScale, kAddConst, kMin, kClip, kSum, kMean,
  };

  struct Node {
    Op op;
    int in0 = -1, in1 = -1, in2 = -1;
    double c0 = 0.0, c1 = 0.0;
    int graph = -1;               // index into graphs_ for kGnn
    Param* param = nullptr;       // kParam leaves
    const Tensor* ext = nullptr;  // external value storage for leaves
    Tensor val;
    Tensor aux;                   // kGnn keeps the aggregated features here
    Tensor grad;
  };

  struct GraphRef {
    std::vector<std::vector<int>> adj;  // ascending neighbor lists
  };

  const Tensor& val_of(const Node& n) const { return n.ext ? *n.ext : n.val; }
  int push(Node n);
  int gnn_impl(int z, int w, GraphRef graph);

  std::vector<Node> nodes_;
  std::vector<GraphRef> graphs_;
};

// uniform U(-sqrt(1/fan_in), sqrt(1/fan_in)) init for weights and biases
void init_uniform_fan_in(Tensor& t, int fan_in, Rng& rng);

// reference log-density used by both the tape op and action sampling, so
// stored rollout log-probs replay bit-exactly during updates
double gaussian_logprob_row(std::span<const double> a, std::span<const double> mu,
                            std::span<const double> log_std);

}  // namespace formnav::nn
