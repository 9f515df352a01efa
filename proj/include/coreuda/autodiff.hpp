#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "coreuda/tensor.hpp"

namespace coreuda {

// Reverse-mode autodiff over whole tensors. Graphs are built per forward
// pass; parameters are long-lived leaf nodes whose gradients accumulate
// until zeroed by the optimizer.
struct Node {
  Tensor value;
  Tensor grad;  // always allocated with value's shape, zero-initialized
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // pushes this->grad into parents
  const char* op = "leaf";
};

using NodePtr = std::shared_ptr<Node>;

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  static Var leaf(Tensor value, bool requires_grad = false);
  static Var constant(Tensor value) { return leaf(std::move(value), false); }
  static Var scalar(double v) { return leaf(Tensor(Shape{1}, v), false); }

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  Tensor& grad() { return node_->grad; }
  const Tensor& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const NodePtr& node() const { return node_; }
  double item() const { return node_->value[0]; }

 private:
  NodePtr node_;
};

// Seeds root with ones and propagates gradients through the graph in
// reverse topological order.
void backward(const Var& root);

// Elementwise (shapes must match exactly).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var sqrt_v(const Var& a);
Var softplus(const Var& a);  // log(1 + e^x), numerically stable

// x: N x In, w: Out x In, bias: Out (optional, pass undefined Var to skip).
Var linear(const Var& x, const Var& w, const Var& bias);

// x: N x Cin x H x W, w: Cout x Cin x kh x kw; zero padding.
Var conv2d(const Var& x, const Var& w, int stride, int pad);

// Batch normalization over N (and spatial dims when 4-d input).
// x: N x C or N x C x H x W; gamma/beta: C (beta optional).
// In training mode batch statistics are used and running stats updated;
// in eval mode running stats are used.
Var batchnorm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
              Tensor& running_var, bool training, double momentum = 0.1, double eps = 1e-5);

// N x C x H x W -> N x C.
Var gap2d(const Var& x);
Var spatial_max(const Var& x);

// Height slice rows [r0, r1) of an N x C x H x W map.
Var slice_rows(const Var& x, int r0, int r1);

// Concatenate N x Di feature matrices along dim 1.
Var concat_features(const std::vector<Var>& parts);

// map: N x C x H x W scaled per channel by attn: N x C.
Var channel_scale(const Var& map, const Var& attn);

// Row-wise L2 normalization of N x D (rows with tiny norms raise ZeroMeanFeature).
Var l2norm_rows(const Var& x);

// Select rows of an N x D matrix.
Var gather_rows(const Var& x, const std::vector<int>& idx);

// N x D -> N (sum over each row).
Var rowsum(const Var& x);

Var sum_all(const Var& x);
Var mean_all(const Var& x);

// Mean over batch of -log softmax(logits)[label]; logits: N x M.
Var cross_entropy(const Var& logits, const std::vector<int>& labels);

}  // namespace coreuda
