#include "pldp/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace pldp {

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// ===== Tensor =====

Tensor Tensor::leaf(Shape shape, std::vector<double> data, bool requires_grad, std::string name) {
  for (int d : shape)
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  if (static_cast<int64_t>(data.size()) != numel(shape))
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_str(shape));
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  n->name = std::move(name);
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> d(static_cast<size_t>(numel(shape)), 0.0);
  return leaf(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  std::vector<double> d(static_cast<size_t>(numel(shape)), v);
  return leaf(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return leaf({1}, {v}, requires_grad); }

double Tensor::scalar_value() const {
  if (size() != 1) throw RankError("scalar_value on tensor of shape " + shape_str(shape()));
  return n_->value[0];
}

std::vector<double>& Tensor::grad() const {
  if (n_->grad.empty()) n_->grad.assign(n_->value.size(), 0.0);
  return n_->grad;
}

void Tensor::zero_grad() const { n_->grad.assign(n_->value.size(), 0.0); }

// ===== GradSink =====

std::vector<double>& GradSink::of(const Tensor& t) {
  TensorNode* n = t.node();
  if (map_ != nullptr && !g_->produced_here(n)) {
    auto& buf = (*map_)[n];
    if (buf.empty()) buf.assign(n->value.size(), 0.0);
    return buf;
  }
  if (n->grad.empty()) n->grad.assign(n->value.size(), 0.0);
  return n->grad;
}

// ===== Graph plumbing =====

Tensor Graph::fresh(Shape out_shape, const std::vector<Tensor>& inputs) {
  bool req = false;
  for (const auto& t : inputs) req = req || t.requires_grad();
  return Tensor::zeros(std::move(out_shape), req);
}

Tensor Graph::push(std::vector<Tensor> inputs, Tensor out, std::function<void()> fwd,
                   std::function<void(GradSink&)> bwd) {
  Op op;
  op.inputs = std::move(inputs);
  op.output = out;
  op.forward = std::move(fwd);
  op.backward = std::move(bwd);
  op.forward();
  producer_[out.node()] = ops_.size();
  ops_.push_back(std::move(op));
  return out;
}

void Graph::replay_forward() {
  for (auto& op : ops_) op.forward();
}

std::vector<Tensor> Graph::leaf_inputs() const {
  std::vector<Tensor> out;
  std::unordered_map<const TensorNode*, bool> seen;
  for (const auto& op : ops_)
    for (const auto& t : op.inputs)
      if (!produced_here(t.node()) && !seen[t.node()]) {
        seen[t.node()] = true;
        out.push_back(t);
      }
  return out;
}

void Graph::backward(const Tensor& loss) { backward_impl(loss, nullptr); }
void Graph::backward(const Tensor& loss, GradMap& leaf_grads) { backward_impl(loss, &leaf_grads); }

void Graph::backward_impl(const Tensor& loss, GradMap* sink_map) {
  if (!loss.defined() || loss.size() != 1)
    throw RankError("backward: loss must be a scalar, got shape " +
                    (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  auto it = producer_.find(loss.node());
  if (it == producer_.end())
    throw GraphError("backward: loss tensor was not produced by this graph");
  if (!loss.requires_grad())
    throw GraphError("backward: loss does not depend on any tensor requiring gradients");

  // Mark ops that influence the loss through grad-requiring paths.
  std::vector<char> active(ops_.size(), 0);
  std::unordered_map<const TensorNode*, char> needed;
  needed[loss.node()] = 1;
  for (size_t i = it->second + 1; i-- > 0;) {
    const Op& op = ops_[i];
    if (!op.output.requires_grad()) continue;
    auto f = needed.find(op.output.node());
    if (f == needed.end() || !f->second) continue;
    active[i] = 1;
    for (const auto& in : op.inputs)
      if (in.requires_grad()) needed[in.node()] = 1;
  }

  // Fresh zero grads for every active output (intermediates are per-pass);
  // leaf grads accumulate across passes by design.
  for (size_t i = 0; i < ops_.size(); ++i)
    if (active[i]) ops_[i].output.zero_grad();

  GradSink sink(this, sink_map);
  loss.node()->grad[0] = 1.0;
  for (size_t i = ops_.size(); i-- > 0;)
    if (active[i]) ops_[i].backward(sink);
}

// ===== local helpers =====

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

void check_rank(const char* op, const Tensor& t, int rank) {
  if (t.rank() != rank)
    throw RankError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                    shape_str(t.shape()));
}

inline int64_t ceil_div(int64_t a, int64_t b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }
inline int64_t floor_div(int64_t a, int64_t b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

}  // namespace

// ===== elementwise binary =====

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out = fresh(a.shape(), {a, b});
  auto fwd = [a, b, out]() {
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.node()->value;
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  };
  auto bwd = [a, b, out](GradSink& s) {
    const auto& g = out.node()->grad;
    if (a.requires_grad()) {
      auto& ga = s.of(a);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto& gb = s.of(b);
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  };
  return push({a, b}, out, fwd, bwd);
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out = fresh(a.shape(), {a, b});
  auto fwd = [a, b, out]() {
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.node()->value;
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  };
  auto bwd = [a, b, out](GradSink& s) {
    const auto& g = out.node()->grad;
    if (a.requires_grad()) {
      auto& ga = s.of(a);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto& gb = s.of(b);
      for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  };
  return push({a, b}, out, fwd, bwd);
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  Tensor out = fresh(a.shape(), {a, b});
  auto fwd = [a, b, out]() {
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.node()->value;
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  };
  auto bwd = [a, b, out](GradSink& s) {
    const auto& g = out.node()->grad;
    const auto& av = a.values();
    const auto& bv = b.values();
    if (a.requires_grad()) {
      auto& ga = s.of(a);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (b.requires_grad()) {
      auto& gb = s.of(b);
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  };
  return push({a, b}, out, fwd, bwd);
}

Tensor Graph::div(const Tensor& a, const Tensor& b) {
  check_same_shape("div", a, b);
  Tensor out = fresh(a.shape(), {a, b});
  auto fwd = [a, b, out]() {
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.node()->value;
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] / bv[i];
  };
  auto bwd = [a, b, out](GradSink& s) {
    const auto& g = out.node()->grad;
    const auto& av = a.values();
    const auto& bv = b.values();
    if (a.requires_grad()) {
      auto& ga = s.of(a);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bv[i];
    }
    if (b.requires_grad()) {
      auto& gb = s.of(b);
      for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * av[i] / (bv[i] * bv[i]);
    }
  };
  return push({a, b}, out, fwd, bwd);
}

// ===== scalar broadcast =====

Tensor Graph::add_scalar(const Tensor& a, double c) {
  Tensor out = fresh(a.shape(), {a});
  auto fwd = [a, out, c]() {
    const auto& av = a.values();
    auto& ov = out.node()->value;
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + c;
  };
  auto bwd = [a, out](GradSink& s) {
    if (!a.requires_grad()) return;
    const auto& g = out.node()->grad;
    auto& ga = s.of(a);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  };
  return push({a}, out, fwd, bwd);
}

Tensor Graph::mul_scalar(const Tensor& a, double c) {
  Tensor out = fresh(a.shape(), {a});
  auto fwd = [a, out, c]() {
    const auto& av = a.values();
    auto& ov = out.node()->value;
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * c;
  };
  auto bwd = [a, out, c](GradSink& s) {
    if (!a.requires_grad()) return;
    const auto& g = out.node()->grad;
    auto& ga = s.of(a);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
  };
  return push({a}, out, fwd, bwd);
}

Tensor Graph::clamp_min(const Tensor& a, double lo) {
  Tensor out = fresh(a.shape(), {a});
  auto fwd = [a, out, lo]() {
    const auto& av = a.values();
    auto& ov = out.node()->value;
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] < lo ? lo : av[i];
  };
  auto bwd = [a, out, lo](GradSink& s) {
    if (!a.requires_grad()) return;
    const auto& g = out.node()->grad;
    const auto& av = a.values();
    auto& ga = s.of(a);
    for (size_t i = 0; i < g.size(); ++i)
      if (av[i] >= lo) ga[i] += g[i];
  };
  return push({a}, out, fwd, bwd);
}

// ===== unary nonlinear =====

Tensor Graph::exp(const Tensor& a) {
  Tensor out = fresh(a.shape(), {a});
  auto fwd = [a, out]() {
    const auto& av = a.values();
    auto& ov = out.node()->value;
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = std::exp(av[i]);
  };
  auto bwd = [a, out](GradSink& s) {
    if (!a.requires_grad()) return;
    const auto& g = out.node()->grad;
    const auto& ov = out.values();
    auto& ga = s.of(a);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * ov[i];
  };
  return push({a}, out, fwd, bwd);
}

Tensor Graph::log(const Tensor& a) {
  Tensor out = fresh(a.shape(), {a});
  auto fwd = [a, out]() {
    const auto& av = a.values();
    auto& ov = out.node()->value;
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = std::log(av[i]);
  };
  auto bwd = [a, out](GradSink& s) {
    if (!a.requires_grad()) return;
    const auto& g = out.node()->grad;
    const auto& av = a.values();
    auto& ga = s.of(a);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / av[i];
  };
  return push({a}, out, fwd, bwd);
}

Tensor Graph::relu(const Tensor& a) {
  Tensor out = fresh(a.shape(), {a});
  auto fwd = [a, out]() {
    const auto& av = a.values();
    auto& ov = out.node()->value;
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] > 0.0 ? av[i] : 0.0;
  };
  auto bwd = [a, out](GradSink& s) {
    if (!a.requires_grad()) return;
    const auto& g = out.node()->grad;
    const auto& av = a.values();
    auto& ga = s.of(a);
    for (size_t i = 0; i < g.size(); ++i)
      if (av[i] > 0.0) ga[i] += g[i];
  };
  return push({a}, out, fwd, bwd);
}

Tensor Graph::sigmoid(const Tensor& a) {
  Tensor out = fresh(a.shape(), {a});
  auto fwd = [a, out]() {
    const auto& av = a.values();
    auto& ov = out.node()->value;
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = 1.0 / (1.0 + std::exp(-av[i]));
  };
  auto bwd = [a, out](GradSink& s) {
    if (!a.requires_grad()) return;
    const auto& g = out.node()->grad;
    const auto& ov = out.values();
    auto& ga = s.of(a);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * ov[i] * (1.0 - ov[i]);
  };
  return push({a}, out, fwd, bwd);
}

// ===== reductions / vector ops =====

Tensor Graph::sum(const Tensor& a) {
  Tensor out = fresh({1}, {a});
  auto fwd = [a, out]() {
    const auto& av = a.values();
    double acc = 0.0;
    for (double v : av) acc += v;
    out.node()->value[0] = acc;
  };
  auto bwd = [a, out](GradSink& s) {
    if (!a.requires_grad()) return;
    const double g = out.node()->grad[0];
    auto& ga = s.of(a);
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  };
  return push({a}, out, fwd, bwd);
}

Tensor Graph::mean(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.size());
  Tensor out = fresh({1}, {a});
  auto fwd = [a, out, inv]() {
    const auto& av = a.values();
    double acc = 0.0;
    for (double v : av) acc += v;
    out.node()->value[0] = acc * inv;
  };
  auto bwd = [a, out, inv](GradSink& s) {
    if (!a.requires_grad()) return;
    const double g = out.node()->grad[0] * inv;
    auto& ga = s.of(a);
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  };
  return push({a}, out, fwd, bwd);
}

Tensor Graph::dot(const Tensor& a, const Tensor& b) {
  check_same_shape("dot", a, b);
  Tensor out = fresh({1}, {a, b});
  auto fwd = [a, b, out]() {
    const auto& av = a.values();
    const auto& bv = b.values();
    double acc = 0.0;
    for (size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
    out.node()->value[0] = acc;
  };
  auto bwd = [a, b, out](GradSink& s) {
    const double g = out.node()->grad[0];
    const auto& av = a.values();
    const auto& bv = b.values();
    if (a.requires_grad()) {
      auto& ga = s.of(a);
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g * bv[i];
    }
    if (b.requires_grad()) {
      auto& gb = s.of(b);
      for (size_t i = 0; i < gb.size(); ++i) gb[i] += g * av[i];
    }
  };
  return push({a, b}, out, fwd, bwd);
}

Tensor Graph::softmax(const Tensor& v) {
  check_rank("softmax", v, 1);
  Tensor out = fresh(v.shape(), {v});
  auto fwd = [v, out]() {
    const auto& x = v.values();
    auto& y = out.node()->value;
    double mx = x[0];
    for (double e : x) mx = std::max(mx, e);
    double z = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      y[i] = std::exp(x[i] - mx);
      z += y[i];
    }
    for (auto& e : y) e /= z;
  };
  auto bwd = [v, out](GradSink& s) {
    if (!v.requires_grad()) return;
    const auto& g = out.node()->grad;
    const auto& y = out.values();
    double gy = 0.0;
    for (size_t i = 0; i < g.size(); ++i) gy += g[i] * y[i];
    auto& gv = s.of(v);
    for (size_t i = 0; i < g.size(); ++i) gv[i] += y[i] * (g[i] - gy);
  };
  return push({v}, out, fwd, bwd);
}

Tensor Graph::l2_normalize(const Tensor& v) {
  check_rank("l2_normalize", v, 1);
  Tensor out = fresh(v.shape(), {v});
  auto fwd = [v, out]() {
    const auto& x = v.values();
    double n2 = 0.0;
    for (double e : x) n2 += e * e;
    const double n = std::sqrt(n2);
    if (n <= 1e-12)
      throw DegenerateVectorError("l2_normalize: vector norm " + std::to_string(n) +
                                  " below 1e-12");
    auto& y = out.node()->value;
    for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] / n;
  };
  auto bwd = [v, out](GradSink& s) {
    if (!v.requires_grad()) return;
    const auto& g = out.node()->grad;
    const auto& x = v.values();
    const auto& y = out.values();
    double n2 = 0.0;
    for (double e : x) n2 += e * e;
    const double n = std::sqrt(n2);
    double yg = 0.0;
    for (size_t i = 0; i < g.size(); ++i) yg += y[i] * g[i];
    auto& gv = s.of(v);
    for (size_t i = 0; i < g.size(); ++i) gv[i] += (g[i] - y[i] * yg) / n;
  };
  return push({v}, out, fwd, bwd);
}

Tensor Graph::cosine_similarity(const Tensor& a, const Tensor& b) {
  check_rank("cosine_similarity", a, 1);
  check_same_shape("cosine_similarity", a, b);
  Tensor out = fresh({1}, {a, b});
  auto fwd = [a, b, out]() {
    const auto& x = a.values();
    const auto& y = b.values();
    double na2 = 0.0, nb2 = 0.0, d = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      na2 += x[i] * x[i];
      nb2 += y[i] * y[i];
      d += x[i] * y[i];
    }
    const double na = std::sqrt(na2), nb = std::sqrt(nb2);
    if (na <= 1e-12 || nb <= 1e-12)
      throw DegenerateVectorError("cosine_similarity: degenerate input vector (norms " +
                                  std::to_string(na) + ", " + std::to_string(nb) + ")");
    double c = d / (na * nb);
    out.node()->value[0] = std::clamp(c, -1.0, 1.0);
  };
  auto bwd = [a, b, out](GradSink& s) {
    const double g = out.node()->grad[0];
    const auto& x = a.values();
    const auto& y = b.values();
    double na2 = 0.0, nb2 = 0.0, d = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      na2 += x[i] * x[i];
      nb2 += y[i] * y[i];
      d += x[i] * y[i];
    }
    const double na = std::sqrt(na2), nb = std::sqrt(nb2);
    const double c = d / (na * nb);
    if (a.requires_grad()) {
      auto& ga = s.of(a);
      for (size_t i = 0; i < x.size(); ++i)
        ga[i] += g * (y[i] / (na * nb) - c * x[i] / na2);
    }
    if (b.requires_grad()) {
      auto& gb = s.of(b);
      for (size_t i = 0; i < y.size(); ++i)
        gb[i] += g * (x[i] / (na * nb) - c * y[i] / nb2);
    }
  };
  return push({a, b}, out, fwd, bwd);
}

Tensor Graph::pick(const Tensor& v, int index) {
  check_rank("pick", v, 1);
  if (index < 0 || index >= v.shape()[0])
    throw IndexError("pick: index " + std::to_string(index) + " out of range for shape " +
                     shape_str(v.shape()));
  Tensor out = fresh({1}, {v});
  auto fwd = [v, out, index]() { out.node()->value[0] = v.values()[static_cast<size_t>(index)]; };
  auto bwd = [v, out, index](GradSink& s) {
    if (!v.requires_grad()) return;
    s.of(v)[static_cast<size_t>(index)] += out.node()->grad[0];
  };
  return push({v}, out, fwd, bwd);
}

Tensor Graph::concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  int total = 0;
  for (const auto& p : parts) {
    check_rank("concat", p, 1);
    total += p.shape()[0];
  }
  Tensor out = fresh({total}, parts);
  auto fwd = [parts, out]() {
    auto& y = out.node()->value;
    size_t off = 0;
    for (const auto& p : parts) {
      const auto& x = p.values();
      std::copy(x.begin(), x.end(), y.begin() + static_cast<long>(off));
      off += x.size();
    }
  };
  auto bwd = [parts, out](GradSink& s) {
    const auto& g = out.node()->grad;
    size_t off = 0;
    for (const auto& p : parts) {
      const size_t n = p.values().size();
      if (p.requires_grad()) {
        auto& gp = s.of(p);
        for (size_t i = 0; i < n; ++i) gp[i] += g[off + i];
      }
      off += n;
    }
  };
  return push(parts, out, fwd, bwd);
}

Tensor Graph::reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size())
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str(shape));
  Tensor out = fresh(std::move(shape), {a});
  auto fwd = [a, out]() { out.node()->value = a.values(); };
  auto bwd = [a, out](GradSink& s) {
    if (!a.requires_grad()) return;
    const auto& g = out.node()->grad;
    auto& ga = s.of(a);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  };
  return push({a}, out, fwd, bwd);
}

// ===== matmul / conv =====

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  check_rank("matmul", a, 2);
  check_rank("matmul", b, 2);
  if (a.shape()[1] != b.shape()[0])
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  const int M = a.shape()[0], K = a.shape()[1], N = b.shape()[1];
  Tensor out = fresh({M, N}, {a, b});
  auto fwd = [a, b, out, M, K, N]() {
    const double* A = a.values().data();
    const double* B = b.values().data();
    double* Y = out.node()->value.data();
    std::fill(Y, Y + static_cast<size_t>(M) * N, 0.0);
    for (int i = 0; i < M; ++i)
      for (int k = 0; k < K; ++k) {
        const double av = A[i * K + k];
        const double* Br = B + static_cast<size_t>(k) * N;
        double* Yr = Y + static_cast<size_t>(i) * N;
        for (int j = 0; j < N; ++j) Yr[j] += av * Br[j];
      }
  };
  auto bwd = [a, b, out, M, K, N](GradSink& s) {
    const double* A = a.values().data();
    const double* B = b.values().data();
    const double* G = out.node()->grad.data();
    if (a.requires_grad()) {
      double* GA = s.of(a).data();
      for (int i = 0; i < M; ++i)
        for (int k = 0; k < K; ++k) {
          const double* Gr = G + static_cast<size_t>(i) * N;
          const double* Br = B + static_cast<size_t>(k) * N;
          double acc = 0.0;
          for (int j = 0; j < N; ++j) acc += Gr[j] * Br[j];
          GA[i * K + k] += acc;
        }
    }
    if (b.requires_grad()) {
      double* GB = s.of(b).data();
      for (int k = 0; k < K; ++k)
        for (int i = 0; i < M; ++i) {
          const double av = A[i * K + k];
          const double* Gr = G + static_cast<size_t>(i) * N;
          double* GBr = GB + static_cast<size_t>(k) * N;
          for (int j = 0; j < N; ++j) GBr[j] += av * Gr[j];
        }
    }
  };
  return push({a, b}, out, fwd, bwd);
}

Tensor Graph::conv2d(const Tensor& x, const Tensor& k, int stride, int padding) {
  check_rank("conv2d", x, 3);
  check_rank("conv2d", k, 4);
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  if (padding < 0) throw ConfigError("conv2d: padding must be >= 0");
  const int Ci = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  const int Co = k.shape()[0], KH = k.shape()[2], KW = k.shape()[3];
  if (k.shape()[1] != Ci)
    throw DimensionError("conv2d: kernel expects " + std::to_string(k.shape()[1]) +
                         " input channels, input has " + std::to_string(Ci));
  if (KH > H + 2 * padding || KW > W + 2 * padding)
    throw DimensionError("conv2d: kernel " + std::to_string(KH) + "x" + std::to_string(KW) +
                         " larger than padded input " + std::to_string(H + 2 * padding) + "x" +
                         std::to_string(W + 2 * padding));
  const int Ho = (H + 2 * padding - KH) / stride + 1;
  const int Wo = (W + 2 * padding - KW) / stride + 1;
  Tensor out = fresh({Co, Ho, Wo}, {x, k});

  // Valid output-column range for one (kernel column, output row) pair.
  auto col_range = [=](int kw, int& lo, int& hi) {
    lo = static_cast<int>(std::max<int64_t>(0, ceil_div(padding - kw, stride)));
    hi = static_cast<int>(std::min<int64_t>(Wo - 1, floor_div(W - 1 + padding - kw, stride)));
  };

  auto fwd = [x, k, out, Ci, H, W, Co, KH, KW, Ho, Wo, stride, padding, col_range]() {
    const double* X = x.values().data();
    const double* K = k.values().data();
    double* Y = out.node()->value.data();
    std::fill(Y, Y + static_cast<size_t>(Co) * Ho * Wo, 0.0);
    for (int co = 0; co < Co; ++co)
      for (int ci = 0; ci < Ci; ++ci)
        for (int kh = 0; kh < KH; ++kh)
          for (int kw = 0; kw < KW; ++kw) {
            const double w = K[((static_cast<size_t>(co) * Ci + ci) * KH + kh) * KW + kw];
            int lo, hi;
            col_range(kw, lo, hi);
            for (int oh = 0; oh < Ho; ++oh) {
              const int ih = oh * stride - padding + kh;
              if (ih < 0 || ih >= H) continue;
              const double* Xr = X + (static_cast<size_t>(ci) * H + ih) * W - padding + kw;
              double* Yr = Y + (static_cast<size_t>(co) * Ho + oh) * Wo;
              if (stride == 1) {
                for (int ow = lo; ow <= hi; ++ow) Yr[ow] += w * Xr[ow];
              } else {
                for (int ow = lo; ow <= hi; ++ow) Yr[ow] += w * Xr[ow * stride];
              }
            }
          }
  };
  auto bwd = [x, k, out, Ci, H, W, Co, KH, KW, Ho, Wo, stride, padding, col_range](GradSink& s) {
    const double* X = x.values().data();
    const double* K = k.values().data();
    const double* G = out.node()->grad.data();
    if (x.requires_grad()) {
      double* GX = s.of(x).data();
      for (int co = 0; co < Co; ++co)
        for (int ci = 0; ci < Ci; ++ci)
          for (int kh = 0; kh < KH; ++kh)
            for (int kw = 0; kw < KW; ++kw) {
              const double w = K[((static_cast<size_t>(co) * Ci + ci) * KH + kh) * KW + kw];
              int lo, hi;
              col_range(kw, lo, hi);
              for (int oh = 0; oh < Ho; ++oh) {
                const int ih = oh * stride - padding + kh;
                if (ih < 0 || ih >= H) continue;
                double* GXr = GX + (static_cast<size_t>(ci) * H + ih) * W - padding + kw;
                const double* Gr = G + (static_cast<size_t>(co) * Ho + oh) * Wo;
                if (stride == 1) {
                  for (int ow = lo; ow <= hi; ++ow) GXr[ow] += w * Gr[ow];
                } else {
                  for (int ow = lo; ow <= hi; ++ow) GXr[ow * stride] += w * Gr[ow];
                }
              }
            }
    }
    if (k.requires_grad()) {
      double* GK = s.of(k).data();
      for (int co = 0; co < Co; ++co)
        for (int ci = 0; ci < Ci; ++ci)
          for (int kh = 0; kh < KH; ++kh)
            for (int kw = 0; kw < KW; ++kw) {
              int lo, hi;
              col_range(kw, lo, hi);
              double acc = 0.0;
              for (int oh = 0; oh < Ho; ++oh) {
                const int ih = oh * stride - padding + kh;
                if (ih < 0 || ih >= H) continue;
                const double* Xr = X + (static_cast<size_t>(ci) * H + ih) * W - padding + kw;
                const double* Gr = G + (static_cast<size_t>(co) * Ho + oh) * Wo;
                for (int ow = lo; ow <= hi; ++ow) acc += Gr[ow] * Xr[ow * stride];
              }
              GK[((static_cast<size_t>(co) * Ci + ci) * KH + kh) * KW + kw] += acc;
            }
    }
  };
  return push({x, k}, out, fwd, bwd);
}

// ===== spatial ops on [C×H×W] =====

Tensor Graph::max_pool2d(const Tensor& x, int kernel, int stride) {
  check_rank("max_pool2d", x, 3);
  if (kernel < 1 || stride < 1) throw ConfigError("max_pool2d: kernel and stride must be >= 1");
  const int C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  if (kernel > H || kernel > W)
    throw DimensionError("max_pool2d: kernel " + std::to_string(kernel) + " exceeds input " +
                         std::to_string(H) + "x" + std::to_string(W));
  const int Ho = (H - kernel) / stride + 1;
  const int Wo = (W - kernel) / stride + 1;
  Tensor out = fresh({C, Ho, Wo}, {x});
  auto argmax = std::make_shared<std::vector<int>>(static_cast<size_t>(C) * Ho * Wo);
  auto fwd = [x, out, argmax, C, H, W, Ho, Wo, kernel, stride]() {
    const double* X = x.values().data();
    double* Y = out.node()->value.data();
    int* A = argmax->data();
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          const int h0 = oh * stride, w0 = ow * stride;
          double best = -1e300;
          int besti = -1;
          for (int dh = 0; dh < kernel; ++dh)
            for (int dw = 0; dw < kernel; ++dw) {
              const int idx = (c * H + h0 + dh) * W + w0 + dw;
              if (X[idx] > best) {  // first max wins on ties
                best = X[idx];
                besti = idx;
              }
            }
          Y[(c * Ho + oh) * Wo + ow] = best;
          A[(c * Ho + oh) * Wo + ow] = besti;
        }
  };
  auto bwd = [x, out, argmax](GradSink& s) {
    if (!x.requires_grad()) return;
    const auto& g = out.node()->grad;
    auto& gx = s.of(x);
    const int* A = argmax->data();
    for (size_t i = 0; i < g.size(); ++i) gx[static_cast<size_t>(A[i])] += g[i];
  };
  return push({x}, out, fwd, bwd);
}

Tensor Graph::avg_pool2d(const Tensor& x, int kernel, int stride) {
  check_rank("avg_pool2d", x, 3);
  if (kernel < 1 || stride < 1) throw ConfigError("avg_pool2d: kernel and stride must be >= 1");
  const int C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  if (kernel > H || kernel > W)
    throw DimensionError("avg_pool2d: kernel " + std::to_string(kernel) + " exceeds input " +
                         std::to_string(H) + "x" + std::to_string(W));
  const int Ho = (H - kernel) / stride + 1;
  const int Wo = (W - kernel) / stride + 1;
  const double inv = 1.0 / (static_cast<double>(kernel) * kernel);
  Tensor out = fresh({C, Ho, Wo}, {x});
  auto fwd = [x, out, C, H, W, Ho, Wo, kernel, stride, inv]() {
    const double* X = x.values().data();
    double* Y = out.node()->value.data();
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          const int h0 = oh * stride, w0 = ow * stride;
          double acc = 0.0;
          for (int dh = 0; dh < kernel; ++dh)
            for (int dw = 0; dw < kernel; ++dw) acc += X[(c * H + h0 + dh) * W + w0 + dw];
          Y[(c * Ho + oh) * Wo + ow] = acc * inv;
        }
  };
  auto bwd = [x, out, C, H, W, Ho, Wo, kernel, stride, inv](GradSink& s) {
    if (!x.requires_grad()) return;
    const double* G = out.node()->grad.data();
    auto& gx = s.of(x);
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          const double g = G[(c * Ho + oh) * Wo + ow] * inv;
          const int h0 = oh * stride, w0 = ow * stride;
          for (int dh = 0; dh < kernel; ++dh)
            for (int dw = 0; dw < kernel; ++dw) gx[(c * H + h0 + dh) * W + w0 + dw] += g;
        }
  };
  return push({x}, out, fwd, bwd);
}

Tensor Graph::global_avg_pool(const Tensor& x) {
  check_rank("global_avg_pool", x, 3);
  const int C = x.shape()[0], HW = x.shape()[1] * x.shape()[2];
  const double inv = 1.0 / static_cast<double>(HW);
  Tensor out = fresh({C}, {x});
  auto fwd = [x, out, C, HW, inv]() {
    const double* X = x.values().data();
    double* Y = out.node()->value.data();
    for (int c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int i = 0; i < HW; ++i) acc += X[c * HW + i];
      Y[c] = acc * inv;
    }
  };
  auto bwd = [x, out, C, HW, inv](GradSink& s) {
    if (!x.requires_grad()) return;
    const double* G = out.node()->grad.data();
    auto& gx = s.of(x);
    for (int c = 0; c < C; ++c) {
      const double g = G[c] * inv;
      for (int i = 0; i < HW; ++i) gx[static_cast<size_t>(c) * HW + i] += g;
    }
  };
  return push({x}, out, fwd, bwd);
}

Tensor Graph::global_max_pool(const Tensor& x) {
  check_rank("global_max_pool", x, 3);
  const int C = x.shape()[0], HW = x.shape()[1] * x.shape()[2];
  Tensor out = fresh({C}, {x});
  auto argmax = std::make_shared<std::vector<int>>(static_cast<size_t>(C));
  auto fwd = [x, out, argmax, C, HW]() {
    const double* X = x.values().data();
    double* Y = out.node()->value.data();
    for (int c = 0; c < C; ++c) {
      double best = -1e300;
      int besti = -1;
      for (int i = 0; i < HW; ++i)
        if (X[c * HW + i] > best) {
          best = X[c * HW + i];
          besti = c * HW + i;
        }
      Y[c] = best;
      (*argmax)[static_cast<size_t>(c)] = besti;
    }
  };
  auto bwd = [x, out, argmax, C](GradSink& s) {
    if (!x.requires_grad()) return;
    const auto& g = out.node()->grad;
    auto& gx = s.of(x);
    for (int c = 0; c < C; ++c) gx[static_cast<size_t>((*argmax)[static_cast<size_t>(c)])] += g[c];
  };
  return push({x}, out, fwd, bwd);
}

Tensor Graph::add_channel_bias(const Tensor& x, const Tensor& bias) {
  check_rank("add_channel_bias", x, 3);
  check_rank("add_channel_bias", bias, 1);
  if (bias.shape()[0] != x.shape()[0])
    throw DimensionError("add_channel_bias: bias " + shape_str(bias.shape()) +
                         " does not match channels of " + shape_str(x.shape()));
  const int C = x.shape()[0], HW = x.shape()[1] * x.shape()[2];
  Tensor out = fresh(x.shape(), {x, bias});
  auto fwd = [x, bias, out, C, HW]() {
    const double* X = x.values().data();
    const double* B = bias.values().data();
    double* Y = out.node()->value.data();
    for (int c = 0; c < C; ++c) {
      const double b = B[c];
      for (int i = 0; i < HW; ++i) Y[c * HW + i] = X[c * HW + i] + b;
    }
  };
  auto bwd = [x, bias, out, C, HW](GradSink& s) {
    const double* G = out.node()->grad.data();
    if (x.requires_grad()) {
      auto& gx = s.of(x);
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += G[i];
    }
    if (bias.requires_grad()) {
      auto& gb = s.of(bias);
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int i = 0; i < HW; ++i) acc += G[c * HW + i];
        gb[static_cast<size_t>(c)] += acc;
      }
    }
  };
  return push({x, bias}, out, fwd, bwd);
}

Tensor Graph::scale_channels(const Tensor& x, const Tensor& sc) {
  check_rank("scale_channels", x, 3);
  check_rank("scale_channels", sc, 1);
  if (sc.shape()[0] != x.shape()[0])
    throw DimensionError("scale_channels: scale " + shape_str(sc.shape()) +
                         " does not match channels of " + shape_str(x.shape()));
  const int C = x.shape()[0], HW = x.shape()[1] * x.shape()[2];
  Tensor out = fresh(x.shape(), {x, sc});
  auto fwd = [x, sc, out, C, HW]() {
    const double* X = x.values().data();
    const double* S = sc.values().data();
    double* Y = out.node()->value.data();
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < HW; ++i) Y[c * HW + i] = X[c * HW + i] * S[c];
  };
  auto bwd = [x, sc, out, C, HW](GradSink& s) {
    const double* G = out.node()->grad.data();
    const double* X = x.values().data();
    const double* S = sc.values().data();
    if (x.requires_grad()) {
      auto& gx = s.of(x);
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < HW; ++i) gx[static_cast<size_t>(c) * HW + i] += G[c * HW + i] * S[c];
    }
    if (sc.requires_grad()) {
      auto& gs = s.of(sc);
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int i = 0; i < HW; ++i) acc += G[c * HW + i] * X[c * HW + i];
        gs[static_cast<size_t>(c)] += acc;
      }
    }
  };
  return push({x, sc}, out, fwd, bwd);
}

Tensor Graph::scale_spatial(const Tensor& x, const Tensor& m) {
  check_rank("scale_spatial", x, 3);
  check_rank("scale_spatial", m, 3);
  if (m.shape()[0] != 1 || m.shape()[1] != x.shape()[1] || m.shape()[2] != x.shape()[2])
    throw DimensionError("scale_spatial: map " + shape_str(m.shape()) + " does not match " +
                         shape_str(x.shape()));
  const int C = x.shape()[0], HW = x.shape()[1] * x.shape()[2];
  Tensor out = fresh(x.shape(), {x, m});
  auto fwd = [x, m, out, C, HW]() {
    const double* X = x.values().data();
    const double* Mp = m.values().data();
    double* Y = out.node()->value.data();
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < HW; ++i) Y[c * HW + i] = X[c * HW + i] * Mp[i];
  };
  auto bwd = [x, m, out, C, HW](GradSink& s) {
    const double* G = out.node()->grad.data();
    const double* X = x.values().data();
    const double* Mp = m.values().data();
    if (x.requires_grad()) {
      auto& gx = s.of(x);
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < HW; ++i) gx[static_cast<size_t>(c) * HW + i] += G[c * HW + i] * Mp[i];
    }
    if (m.requires_grad()) {
      auto& gm = s.of(m);
      for (int i = 0; i < HW; ++i) {
        double acc = 0.0;
        for (int c = 0; c < C; ++c) acc += G[c * HW + i] * X[c * HW + i];
        gm[static_cast<size_t>(i)] += acc;
      }
    }
  };
  return push({x, m}, out, fwd, bwd);
}

Tensor Graph::channel_mean_map(const Tensor& x) {
  check_rank("channel_mean_map", x, 3);
  const int C = x.shape()[0], HW = x.shape()[1] * x.shape()[2];
  const double inv = 1.0 / static_cast<double>(C);
  Tensor out = fresh({1, x.shape()[1], x.shape()[2]}, {x});
  auto fwd = [x, out, C, HW, inv]() {
    const double* X = x.values().data();
    double* Y = out.node()->value.data();
    for (int i = 0; i < HW; ++i) {
      double acc = 0.0;
      for (int c = 0; c < C; ++c) acc += X[c * HW + i];
      Y[i] = acc * inv;
    }
  };
  auto bwd = [x, out, C, HW, inv](GradSink& s) {
    if (!x.requires_grad()) return;
    const double* G = out.node()->grad.data();
    auto& gx = s.of(x);
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < HW; ++i) gx[static_cast<size_t>(c) * HW + i] += G[i] * inv;
  };
  return push({x}, out, fwd, bwd);
}

Tensor Graph::channel_max_map(const Tensor& x) {
  check_rank("channel_max_map", x, 3);
  const int C = x.shape()[0], HW = x.shape()[1] * x.shape()[2];
  Tensor out = fresh({1, x.shape()[1], x.shape()[2]}, {x});
  auto argmax = std::make_shared<std::vector<int>>(static_cast<size_t>(HW));
  auto fwd = [x, out, argmax, C, HW]() {
    const double* X = x.values().data();
    double* Y = out.node()->value.data();
    for (int i = 0; i < HW; ++i) {
      double best = -1e300;
      int bc = -1;
      for (int c = 0; c < C; ++c)
        if (X[c * HW + i] > best) {
          best = X[c * HW + i];
          bc = c;
        }
      Y[i] = best;
      (*argmax)[static_cast<size_t>(i)] = bc;
    }
  };
  auto bwd = [x, out, argmax, HW](GradSink& s) {
    if (!x.requires_grad()) return;
    const double* G = out.node()->grad.data();
    auto& gx = s.of(x);
    for (int i = 0; i < HW; ++i)
      gx[static_cast<size_t>((*argmax)[static_cast<size_t>(i)]) * HW + i] += G[i];
  };
  return push({x}, out, fwd, bwd);
}

Tensor Graph::concat_channels(const Tensor& a, const Tensor& b) {
  check_rank("concat_channels", a, 3);
  check_rank("concat_channels", b, 3);
  if (a.shape()[1] != b.shape()[1] || a.shape()[2] != b.shape()[2])
    throw DimensionError("concat_channels: spatial dims differ, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  const int Ca = a.shape()[0], Cb = b.shape()[0];
  Tensor out = fresh({Ca + Cb, a.shape()[1], a.shape()[2]}, {a, b});
  auto fwd = [a, b, out]() {
    auto& y = out.node()->value;
    const auto& av = a.values();
    const auto& bv = b.values();
    std::copy(av.begin(), av.end(), y.begin());
    std::copy(bv.begin(), bv.end(), y.begin() + static_cast<long>(av.size()));
  };
  auto bwd = [a, b, out](GradSink& s) {
    const auto& g = out.node()->grad;
    const size_t na = a.values().size();
    if (a.requires_grad()) {
      auto& ga = s.of(a);
      for (size_t i = 0; i < na; ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto& gb = s.of(b);
      for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
    }
  };
  return push({a, b}, out, fwd, bwd);
}

}  // namespace pldp
