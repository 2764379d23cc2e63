#include "formnav/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace formnav::nn {

Tensor Tensor::zeros(std::vector<int> shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.data.begin(), t.data.end(), v);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Param& ParamStore::add(const std::string& name, std::vector<int> shape) {
  if (contains(name)) throw std::logic_error("duplicate parameter: " + name);
  index_[name] = params_.size();
  Param p;
  p.name = name;
  p.value = Tensor::zeros(shape);
  p.grad = Tensor::zeros(shape);
  p.adam_m = Tensor::zeros(shape);
  p.adam_v = Tensor::zeros(std::move(shape));
  params_.push_back(std::move(p));
  return params_.back();
}

Param& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return params_[it->second];
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return params_[it->second];
}

std::int64_t ParamStore::total_size() const {
  std::int64_t n = 0;
  for (const Param& p : params_) n += p.value.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (Param& p : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps) {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count_));
  for (Param& p : params_) {
    for (size_t k = 0; k < p.value.data.size(); ++k) {
      const double g = p.grad.data[k];
      double& m = p.adam_m.data[k];
      double& v = p.adam_v.data[k];
      m = beta1 * m + (1.0 - beta1) * g;
      v = beta2 * v + (1.0 - beta2) * g * g;
      p.value.data[k] -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
    }
  }
  zero_grad();
}

void init_uniform_fan_in(Tensor& t, int fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / fan_in);
  for (double& v : t.data) v = rng.uniform(-bound, bound);
}

double gaussian_logprob_row(std::span<const double> a, std::span<const double> mu,
                            std::span<const double> log_std) {
  constexpr double kLogTwoPi = 1.8378770664093454836;  // ln(2*pi)
  double lp = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    const double u = (a[k] - mu[k]) * std::exp(-log_std[k]);
    lp += -0.5 * kLogTwoPi - log_std[k] - 0.5 * u * u;
  }
  return lp;
}

// ---- tape ----

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size() - 1);
}

int Tape::constant(Tensor t) {
  Node n;
  n.op = Op::kConst;
  n.val = std::move(t);
  return push(std::move(n));
}

int Tape::constant_ref(const Tensor& t) {
  Node n;
  n.op = Op::kConst;
  n.ext = &t;
  return push(std::move(n));
}

int Tape::param(Param& p) {
  Node n;
  n.op = Op::kParam;
  n.param = &p;
  n.ext = &p.value;
  return push(std::move(n));
}

const Tensor& Tape::value(int id) const { return val_of(nodes_[static_cast<size_t>(id)]); }

const Tensor& Tape::grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }

int Tape::linear(int x, int w, int b) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  const Tensor& bv = value(b);
  const int n = xv.rows(), in = xv.cols(), out = wv.cols();
  if (wv.rows() != in || bv.numel() != out)
    throw std::logic_error("linear: shape mismatch");
  Node nd;
  nd.op = Op::kLinear;
  nd.in0 = x; nd.in1 = w; nd.in2 = b;
  nd.val = Tensor::zeros({n, out});
  for (int i = 0; i < n; ++i) {
    double* y = &nd.val.at(i, 0);
    for (int o = 0; o < out; ++o) y[o] = bv[static_cast<size_t>(o)];
    for (int k = 0; k < in; ++k) {
      const double xik = xv.at(i, k);
      const double* wr = &wv.at(k, 0);
      for (int o = 0; o < out; ++o) y[o] += xik * wr[o];
    }
  }
  return push(std::move(nd));
}

int Tape::relu(int x) {
  const Tensor& xv = value(x);
  Node nd;
  nd.op = Op::kRelu;
  nd.in0 = x;
  nd.val = xv;
  for (double& v : nd.val.data) v = std::max(0.0, v);
  return push(std::move(nd));
}

int Tape::gnn(int z, int w, const TeamGraph& graph) {
  GraphRef g;
  g.adj = graph.neighbors;
  return gnn_impl(z, w, std::move(g));
}

int Tape::gnn(int z, int w, std::span<const std::pair<int, int>> edges, int n_nodes) {
  GraphRef g;
  g.adj.assign(static_cast<size_t>(n_nodes), {});
  for (auto [i, j] : edges) {
    g.adj[static_cast<size_t>(i)].push_back(j);
    g.adj[static_cast<size_t>(j)].push_back(i);
  }
  for (auto& nb : g.adj) std::sort(nb.begin(), nb.end());
  return gnn_impl(z, w, std::move(g));
}

int Tape::gnn_impl(int z, int w, GraphRef graph) {
  const Tensor& zv = value(z);
  const Tensor& wv = value(w);
  const int n = zv.rows(), h = zv.cols();
  if (wv.rows() != h || wv.cols() != h || static_cast<int>(graph.adj.size()) != n)
    throw std::logic_error("gnn: shape mismatch");
  Node nd;
  nd.op = Op::kGnn;
  nd.in0 = z; nd.in1 = w;
  nd.graph = static_cast<int>(graphs_.size());

  // agg_i = z_i + sum_{j in N(i)} (z_j - z_i), ascending j
  nd.aux = Tensor::zeros({n, h});
  for (int i = 0; i < n; ++i) {
    double* acc = &nd.aux.at(i, 0);
    const double* zi = &zv.at(i, 0);
    for (int k = 0; k < h; ++k) acc[k] = zi[k];
    for (int j : graph.adj[static_cast<size_t>(i)]) {
      const double* zj = &zv.at(j, 0);
      for (int k = 0; k < h; ++k) acc[k] += zj[k] - zi[k];
    }
  }
  // h_i = W * agg_i (left multiplication)
  nd.val = Tensor::zeros({n, h});
  for (int i = 0; i < n; ++i) {
    const double* acc = &nd.aux.at(i, 0);
    double* out = &nd.val.at(i, 0);
    for (int o = 0; o < h; ++o) {
      const double* wr = &wv.at(o, 0);
      double s = 0.0;
      for (int k = 0; k < h; ++k) s += wr[k] * acc[k];
      out[o] = s;
    }
  }
  graphs_.push_back(std::move(graph));
  return push(std::move(nd));
}

int Tape::gaussian_logprob(int a, int mu, int log_std) {
  const Tensor& av = value(a);
  const Tensor& mv = value(mu);
  const Tensor& sv = value(log_std);
  const int n = av.rows(), k = av.cols();
  if (mv.rows() != n || mv.cols() != k || sv.numel() != k)
    throw std::logic_error("gaussian_logprob: shape mismatch");
  Node nd;
  nd.op = Op::kGaussLogProb;
  nd.in0 = a; nd.in1 = mu; nd.in2 = log_std;
  nd.val = Tensor::zeros({n});
  for (int i = 0; i < n; ++i)
    nd.val[static_cast<size_t>(i)] = gaussian_logprob_row(
        std::span(&av.at(i, 0), static_cast<size_t>(k)),
        std::span(&mv.at(i, 0), static_cast<size_t>(k)),
        std::span(sv.data.data(), static_cast<size_t>(k)));
  return push(std::move(nd));
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape != b.shape) throw std::logic_error(std::string(what) + ": shape mismatch");
}
}  // namespace

int Tape::add(int a, int b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "add");
  Node nd;
  nd.op = Op::kAdd; nd.in0 = a; nd.in1 = b;
  nd.val = av;
  for (size_t i = 0; i < nd.val.data.size(); ++i) nd.val.data[i] += bv.data[i];
  return push(std::move(nd));
}

int Tape::sub(int a, int b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "sub");
  Node nd;
  nd.op = Op::kSub; nd.in0 = a; nd.in1 = b;
  nd.val = av;
  for (size_t i = 0; i < nd.val.data.size(); ++i) nd.val.data[i] -= bv.data[i];
  return push(std::move(nd));
}

int Tape::mul(int a, int b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "mul");
  Node nd;
  nd.op = Op::kMul; nd.in0 = a; nd.in1 = b;
  nd.val = av;
  for (size_t i = 0; i < nd.val.data.size(); ++i) nd.val.data[i] *= bv.data[i];
  return push(std::move(nd));
}

int Tape::exp(int x) {
  Node nd;
  nd.op = Op::kExp; nd.in0 = x;
  nd.val = value(x);
  for (double& v : nd.val.data) v = std::exp(v);
  return push(std::move(nd));
}

int Tape::scale(int x, double c) {
  Node nd;
  nd.op = Op::kScale; nd.in0 = x; nd.c0 = c;
  nd.val = value(x);
  for (double& v : nd.val.data) v *= c;
  return push(std::move(nd));
}

int Tape::add_const(int x, double c) {
  Node nd;
  nd.op = Op::kAddConst; nd.in0 = x; nd.c0 = c;
  nd.val = value(x);
  for (double& v : nd.val.data) v += c;
  return push(std::move(nd));
}

int Tape::min(int a, int b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "min");
  Node nd;
  nd.op = Op::kMin; nd.in0 = a; nd.in1 = b;
  nd.val = av;
  for (size_t i = 0; i < nd.val.data.size(); ++i)
    nd.val.data[i] = av.data[i] <= bv.data[i] ? av.data[i] : bv.data[i];
  return push(std::move(nd));
}

int Tape::clip(int x, double lo, double hi) {
  Node nd;
  nd.op = Op::kClip; nd.in0 = x; nd.c0 = lo; nd.c1 = hi;
  nd.val = value(x);
  for (double& v : nd.val.data) v = std::clamp(v, lo, hi);
  return push(std::move(nd));
}

int Tape::sum(int x) {
  Node nd;
  nd.op = Op::kSum; nd.in0 = x;
  double s = 0.0;
  for (double v : value(x).data) s += v;
  nd.val = Tensor::scalar(s);
  return push(std::move(nd));
}

int Tape::mean(int x) {
  Node nd;
  nd.op = Op::kMean; nd.in0 = x;
  const Tensor& xv = value(x);
  if (xv.numel() == 0) throw std::logic_error("mean of empty tensor");
  double s = 0.0;
  for (double v : xv.data) s += v;
  nd.val = Tensor::scalar(s / static_cast<double>(xv.numel()));
  return push(std::move(nd));
}

void Tape::backward(int loss) {
  if (value(loss).numel() != 1) throw std::logic_error("backward needs a scalar loss");
  for (Node& n : nodes_) {
    n.grad = Tensor::zeros(val_of(n).shape);
  }
  nodes_[static_cast<size_t>(loss)].grad.data[0] = 1.0;

  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    Node& nd = nodes_[static_cast<size_t>(id)];
    const Tensor& g = nd.grad;
    switch (nd.op) {
      case Op::kConst:
        break;
      case Op::kParam:
        for (size_t i = 0; i < g.data.size(); ++i) nd.param->grad.data[i] += g.data[i];
        break;
      case Op::kLinear: {
        Node& xn = nodes_[static_cast<size_t>(nd.in0)];
        Node& wn = nodes_[static_cast<size_t>(nd.in1)];
        Node& bn = nodes_[static_cast<size_t>(nd.in2)];
        const Tensor& xv = val_of(xn);
        const Tensor& wv = val_of(wn);
        const int n = xv.rows(), in = xv.cols(), out = wv.cols();
        for (int i = 0; i < n; ++i) {
          const double* gy = &g.at(i, 0);
          double* gx = &xn.grad.at(i, 0);
          const double* xr = &xv.at(i, 0);
          for (int k = 0; k < in; ++k) {
            const double* wr = &wv.at(k, 0);
            double* gw = &wn.grad.at(k, 0);
            double acc = 0.0;
            const double xik = xr[k];
            for (int o = 0; o < out; ++o) {
              acc += gy[o] * wr[o];
              gw[o] += xik * gy[o];
            }
            gx[k] += acc;
          }
          for (int o = 0; o < out; ++o) bn.grad.data[static_cast<size_t>(o)] += gy[o];
        }
        break;
      }
      case Op::kRelu: {
        Node& xn = nodes_[static_cast<size_t>(nd.in0)];
        const Tensor& xv = val_of(xn);
        for (size_t i = 0; i < g.data.size(); ++i)
          if (xv.data[i] > 0.0) xn.grad.data[i] += g.data[i];
        break;
      }
      case Op::kGnn: {
        Node& zn = nodes_[static_cast<size_t>(nd.in0)];
        Node& wn = nodes_[static_cast<size_t>(nd.in1)];
        const Tensor& wv = val_of(wn);
        const GraphRef& gr = graphs_[static_cast<size_t>(nd.graph)];
        const int n = nd.aux.rows(), h = nd.aux.cols();
        Tensor gagg = Tensor::zeros({n, h});
        // through the left multiplication: dAgg = W^T dH, dW += dH agg^T
        for (int i = 0; i < n; ++i) {
          const double* gy = &g.at(i, 0);
          const double* acc = &nd.aux.at(i, 0);
          double* ga = &gagg.at(i, 0);
          for (int o = 0; o < h; ++o) {
            const double go = gy[o];
            if (go == 0.0) continue;
            const double* wr = &wv.at(o, 0);
            double* gw = &wn.grad.at(o, 0);
            for (int k = 0; k < h; ++k) {
              ga[k] += go * wr[k];
              gw[k] += go * acc[k];
            }
          }
        }
        // through the aggregation: self weight (1 - deg), neighbors weight 1
        for (int i = 0; i < n; ++i) {
          const auto& nb = gr.adj[static_cast<size_t>(i)];
          const double self_w = 1.0 - static_cast<double>(nb.size());
          const double* ga = &gagg.at(i, 0);
          double* gzi = &zn.grad.at(i, 0);
          for (int k = 0; k < h; ++k) gzi[k] += self_w * ga[k];
          for (int j : nb) {
            double* gzj = &zn.grad.at(j, 0);
            for (int k = 0; k < h; ++k) gzj[k] += ga[k];
          }
        }
        break;
      }
      case Op::kGaussLogProb: {
        Node& an = nodes_[static_cast<size_t>(nd.in0)];
        Node& mn = nodes_[static_cast<size_t>(nd.in1)];
        Node& sn = nodes_[static_cast<size_t>(nd.in2)];
        const Tensor& av = val_of(an);
        const Tensor& mv = val_of(mn);
        const Tensor& sv = val_of(sn);
        const int n = av.rows(), k = av.cols();
        for (int kk = 0; kk < k; ++kk) {
          const double inv_sigma = std::exp(-sv.data[static_cast<size_t>(kk)]);
          double gs = 0.0;
          for (int i = 0; i < n; ++i) {
            const double gi = g.data[static_cast<size_t>(i)];
            if (gi == 0.0) continue;
            const double u = (av.at(i, kk) - mv.at(i, kk)) * inv_sigma;
            an.grad.at(i, kk) += gi * (-u * inv_sigma);
            mn.grad.at(i, kk) += gi * (u * inv_sigma);
            gs += gi * (u * u - 1.0);
          }
          sn.grad.data[static_cast<size_t>(kk)] += gs;
        }
        break;
      }
      case Op::kAdd: {
        Node& an = nodes_[static_cast<size_t>(nd.in0)];
        Node& bn = nodes_[static_cast<size_t>(nd.in1)];
        for (size_t i = 0; i < g.data.size(); ++i) {
          an.grad.data[i] += g.data[i];
          bn.grad.data[i] += g.data[i];
        }
        break;
      }
      case Op::kSub: {
        Node& an = nodes_[static_cast<size_t>(nd.in0)];
        Node& bn = nodes_[static_cast<size_t>(nd.in1)];
        for (size_t i = 0; i < g.data.size(); ++i) {
          an.grad.data[i] += g.data[i];
          bn.grad.data[i] -= g.data[i];
        }
        break;
      }
      case Op::kMul: {
        Node& an = nodes_[static_cast<size_t>(nd.in0)];
        Node& bn = nodes_[static_cast<size_t>(nd.in1)];
        const Tensor& av = val_of(an);
        const Tensor& bv = val_of(bn);
        for (size_t i = 0; i < g.data.size(); ++i) {
          an.grad.data[i] += g.data[i] * bv.data[i];
          bn.grad.data[i] += g.data[i] * av.data[i];
        }
        break;
      }
      case Op::kExp: {
        Node& xn = nodes_[static_cast<size_t>(nd.in0)];
        for (size_t i = 0; i < g.data.size(); ++i)
          xn.grad.data[i] += g.data[i] * nd.val.data[i];
        break;
      }
      case Op::kScale: {
        Node& xn = nodes_[static_cast<size_t>(nd.in0)];
        for (size_t i = 0; i < g.data.size(); ++i) xn.grad.data[i] += g.data[i] * nd.c0;
        break;
      }
      case Op::kAddConst: {
        Node& xn = nodes_[static_cast<size_t>(nd.in0)];
        for (size_t i = 0; i < g.data.size(); ++i) xn.grad.data[i] += g.data[i];
        break;
      }
      case Op::kMin: {
        Node& an = nodes_[static_cast<size_t>(nd.in0)];
        Node& bn = nodes_[static_cast<size_t>(nd.in1)];
        const Tensor& av = val_of(an);
        const Tensor& bv = val_of(bn);
        for (size_t i = 0; i < g.data.size(); ++i) {
          if (av.data[i] <= bv.data[i])
            an.grad.data[i] += g.data[i];
          else
            bn.grad.data[i] += g.data[i];
        }
        break;
      }
      case Op::kClip: {
        Node& xn = nodes_[static_cast<size_t>(nd.in0)];
        const Tensor& xv = val_of(xn);
        for (size_t i = 0; i < g.data.size(); ++i)
          if (xv.data[i] >= nd.c0 && xv.data[i] <= nd.c1) xn.grad.data[i] += g.data[i];
        break;
      }
      case Op::kSum: {
        Node& xn = nodes_[static_cast<size_t>(nd.in0)];
        const double gs = g.data[0];
        for (double& v : xn.grad.data) v += gs;
        break;
      }
      case Op::kMean: {
        Node& xn = nodes_[static_cast<size_t>(nd.in0)];
        const double gs = g.data[0] / static_cast<double>(xn.grad.numel());
        for (double& v : xn.grad.data) v += gs;
        break;
      }
    }
  }
}

}  // namespace formnav::nn
