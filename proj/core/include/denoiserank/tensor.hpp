#pragma once

// Reverse-mode automatic differentiation over dense row-major tensors.
//
// A Tensor is a cheap handle to a graph node. Every op records its inputs and
// a backward closure while gradient recording is enabled and at least one
// input requires a gradient; `backward(loss)` then walks the recorded graph in
// reverse topological order. The graph below a loss is consumed by backward:
// closures and intermediate gradients are released, leaf gradients accumulate
// until `zero_grad`. Calling backward twice on the same loss is an error.
//
// Only rank 0, 1 and 2 tensors are used by the model. Binary elementwise ops
// accept exactly matching shapes, a scalar right-hand side, or a rank-1
// right-hand side broadcast over the rows of a rank-2 left-hand side.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "denoiserank/random.hpp"

namespace denoiserank::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;
// Reads the output node's gradient and accumulates into its parents.
using BackwardFn = std::function<void(Node& out)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches the node
  bool requires_grad = false;
  bool is_leaf = true;
  bool consumed = false;
  const char* op = "leaf";
  std::vector<NodePtr> parents;
  BackwardFn backward_fn;

  std::vector<double>& ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value);

  // Builds the output of a user-defined op. `backward` is only retained when
  // recording is enabled and some input requires a gradient.
  static Tensor from_op(const char* name, Shape shape, std::vector<double> values,
                        const std::vector<Tensor>& inputs, BackwardFn backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  const char* op_name() const { return node_->op; }

  std::span<const double> data() const { return node_->value; }
  // Direct write access, meant for optimizers and finite-difference probes.
  std::span<double> mutable_data() { return node_->value; }
  double item() const;
  double operator[](std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad();

  // Same values, no history.
  Tensor detach() const;

  const NodePtr& node() const { return node_; }

 private:
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}
  NodePtr node_;
};

// Computes d(loss)/d(leaf) for every leaf that requires a gradient.
// `loss` must hold exactly one element.
void backward(const Tensor& loss);

bool grad_enabled();

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t length);
Tensor reshape(const Tensor& a, Shape shape);

Tensor softplus(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor reciprocal(const Tensor& a);

// Softmax over the last axis.
Tensor softmax(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Reduces a rank-2 tensor over `axis` (0: rows collapse, 1: columns collapse).
Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);

// Normalizes each row of `x` to zero mean, unit variance, then applies the
// per-column affine `gamma`, `beta`.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// Inverted dropout. Identity when !training or p == 0.
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

// Gathers rows of a rank-2 table (or elements of a rank-1 one).
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> indices);

// out[i][j] = v[j] - v[i] for a rank-1 `v`.
Tensor pairwise_diff(const Tensor& v);

}  // namespace denoiserank::ad
