#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "pldp/error.hpp"

namespace pldp {

using Shape = std::vector<int>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

// One value node. Tensors are cheap handles onto these; identity (the node
// address) is what the graph tracks.
struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first used
  bool requires_grad = false;
  std::string name;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Shape shape, std::vector<double> data, bool requires_grad = false,
                     std::string name = "");
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int rank() const { return static_cast<int>(n_->shape.size()); }
  int64_t size() const { return static_cast<int64_t>(n_->value.size()); }

  std::vector<double>& values() { return n_->value; }
  const std::vector<double>& values() const { return n_->value; }
  double scalar_value() const;

  bool has_grad() const { return !n_->grad.empty(); }
  std::vector<double>& grad() const;  // allocates zeros on first access
  void zero_grad() const;
  bool requires_grad() const { return n_->requires_grad; }

  const std::string& name() const { return n_->name; }

  TensorNode* node() const { return n_.get(); }

  bool same_node(const Tensor& o) const { return n_.get() == o.n_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> n) : n_(std::move(n)) {}
  std::shared_ptr<TensorNode> n_;
};

// Leaf gradients routed away from the nodes themselves (used when several
// graphs over the same parameters must not race on the shared buffers).
using GradMap = std::unordered_map<const TensorNode*, std::vector<double>>;

class Graph;

// Resolves where an input's gradient accumulates during one backward pass.
class GradSink {
 public:
  std::vector<double>& of(const Tensor& t);

 private:
  friend class Graph;
  GradSink(const Graph* g, GradMap* map) : g_(g), map_(map) {}
  const Graph* g_;
  GradMap* map_;
};

// Insertion-ordered op tape. Building an op runs it immediately; the record
// keeps closures for bitwise-identical forward replay and for the backward
// sweep. Topological order is insertion order by construction.
class Graph {
 public:
  // ----- binary / elementwise -----
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor div(const Tensor& a, const Tensor& b);
  Tensor add_scalar(const Tensor& a, double c);
  Tensor mul_scalar(const Tensor& a, double c);
  Tensor clamp_min(const Tensor& a, double lo);
  Tensor exp(const Tensor& a);
  Tensor log(const Tensor& a);
  Tensor relu(const Tensor& a);
  Tensor sigmoid(const Tensor& a);

  // ----- reductions / vectors -----
  Tensor sum(const Tensor& a);
  Tensor mean(const Tensor& a);
  Tensor dot(const Tensor& a, const Tensor& b);
  Tensor softmax(const Tensor& v);
  Tensor l2_normalize(const Tensor& v);
  Tensor cosine_similarity(const Tensor& a, const Tensor& b);
  Tensor pick(const Tensor& v, int index);
  Tensor concat(const std::vector<Tensor>& parts);

  // ----- shape -----
  Tensor reshape(const Tensor& a, Shape shape);

  // ----- linear algebra / conv -----
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor conv2d(const Tensor& x, const Tensor& k, int stride, int padding);

  // ----- spatial (tensors are [C×H×W]) -----
  Tensor max_pool2d(const Tensor& x, int kernel, int stride);
  Tensor avg_pool2d(const Tensor& x, int kernel, int stride);
  Tensor global_avg_pool(const Tensor& x);
  Tensor global_max_pool(const Tensor& x);
  Tensor add_channel_bias(const Tensor& x, const Tensor& bias);
  Tensor scale_channels(const Tensor& x, const Tensor& s);
  Tensor scale_spatial(const Tensor& x, const Tensor& m);
  Tensor channel_mean_map(const Tensor& x);
  Tensor channel_max_map(const Tensor& x);
  Tensor concat_channels(const Tensor& a, const Tensor& b);

  // ----- execution -----
  void backward(const Tensor& loss);             // leaf grads land on the nodes
  void backward(const Tensor& loss, GradMap& leaf_grads);
  void replay_forward();                         // recompute every op in order
  size_t op_count() const { return ops_.size(); }
  bool produced_here(const TensorNode* n) const { return producer_.count(n) > 0; }

  // Distinct leaf tensors consumed by ops, in first-use order.
  std::vector<Tensor> leaf_inputs() const;

 private:
  friend class GradSink;
  struct Op {
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void()> forward;
    std::function<void(GradSink&)> backward;
  };

  Tensor fresh(Shape out_shape, const std::vector<Tensor>& inputs);
  Tensor push(std::vector<Tensor> inputs, Tensor out, std::function<void()> fwd,
              std::function<void(GradSink&)> bwd);
  void backward_impl(const Tensor& loss, GradMap* sink);

  std::vector<Op> ops_;
  std::unordered_map<const TensorNode*, size_t> producer_;
};

}  // namespace pldp
