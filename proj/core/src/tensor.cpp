#include "denoiserank/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "denoiserank/error.hpp"

namespace denoiserank::ad {

namespace {

thread_local bool g_grad_enabled = true;

enum class Broadcast { kSame, kScalar, kRow };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.numel() == 1 && b.rank() <= 1) return Broadcast::kScalar;
  if (a.rank() == 2 && b.rank() == 1 && b.shape()[0] == a.shape()[1]) return Broadcast::kRow;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                   " and " + shape_string(b.shape()));
}

std::size_t broadcast_index(Broadcast kind, std::size_t i, std::size_t row_len) {
  switch (kind) {
    case Broadcast::kSame:
      return i;
    case Broadcast::kScalar:
      return 0;
    case Broadcast::kRow:
      return i % row_len;
  }
  return i;
}

// Applies f elementwise; backward multiplies the incoming gradient by df(x, y).
template <typename F, typename DF>
Tensor unary(const char* name, const Tensor& a, F f, DF df) {
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  return Tensor::from_op(name, a.shape(), std::move(out), {a}, [df](Node& o) {
    Node& in = *o.parents[0];
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * df(in.value[i], o.value[i]);
  });
}

void require_rank2(const char* op, const Tensor& a) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " + shape_string(a.shape()));
  }
}

// Row view of a rank-1 or rank-2 tensor: (rows, cols).
std::pair<std::size_t, std::size_t> as_rows(const char* op, const Tensor& a) {
  if (a.rank() == 1) return {1, a.shape()[0]};
  if (a.rank() == 2) return {a.shape()[0], a.shape()[1]};
  throw ShapeError(std::string(op) + ": expected rank 1 or 2, got " + shape_string(a.shape()));
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::vector<double>& Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor of shape " + shape_string(shape) + " cannot hold " +
                     std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  Tensor t = constant(std::move(shape), std::vector<double>(n, 0.0));
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value) { return constant({}, {value}); }

Tensor Tensor::from_op(const char* name, Shape shape, std::vector<double> values,
                       const std::vector<Tensor>& inputs, BackwardFn backward) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->op = name;
  t.node_->is_leaf = false;
  if (!g_grad_enabled) return t;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& x) { return x.requires_grad(); });
  if (!any) return t;
  t.node_->requires_grad = true;
  t.node_->parents.reserve(inputs.size());
  for (const auto& x : inputs) t.node_->parents.push_back(x.node_);
  t.node_->backward_fn = std::move(backward);
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows() of tensor with shape " + shape_string(shape()));
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols() of tensor with shape " + shape_string(shape()));
  return shape()[1];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() of tensor with shape " + shape_string(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return constant(shape(), node_->value); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " +
                        (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
  }
  Node* root = loss.node().get();
  if (root->consumed) throw ContractError("backward() called twice on the same graph");
  if (!root->requires_grad) {
    throw ContractError("backward(): loss does not depend on any tensor requiring a gradient");
  }

  // Iterative post-order DFS gives a topological order (inputs before outputs).
  // `order` owns its nodes: releasing parents below must not free anything
  // that is still waiting for its backward pass.
  std::vector<NodePtr> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<NodePtr, std::size_t>> stack{{loss.node(), 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const NodePtr& parent = node->parents[next++];
      if (parent->requires_grad && visited.insert(parent.get()).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(std::move(node));
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = it->get();
    if (node->is_leaf) continue;
    if (node->backward_fn) node->backward_fn(*node);
    node->backward_fn = nullptr;
    node->parents.clear();
    node->consumed = true;
    if (node != root) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  // Rank-1 a is a row vector, rank-1 b a column vector.
  const bool a_vec = a.rank() == 1;
  const bool b_vec = b.rank() == 1;
  if ((a.rank() != 1 && a.rank() != 2) || (b.rank() != 1 && b.rank() != 2) || (a_vec && b_vec)) {
    throw ShapeError("matmul: unsupported shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  const std::size_t m = a_vec ? 1 : a.shape()[0];
  const std::size_t k = a_vec ? a.shape()[0] : a.shape()[1];
  const std::size_t kb = b.shape()[0];
  const std::size_t n = b_vec ? 1 : b.shape()[1];
  if (k != kb) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  Shape shape = a_vec ? Shape{n} : (b_vec ? Shape{m} : Shape{m, n});
  return Tensor::from_op("matmul", std::move(shape), std::move(out), {a, b},
                         [m, k, n](Node& o) {
    Node& na = *o.parents[0];
    Node& nb = *o.parents[1];
    const double* G = o.grad.data();
    if (na.requires_grad) {
      auto& ga = na.ensure_grad();
      const double* B = nb.value.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = B + p * n;
          const double* grow = G + i * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (nb.requires_grad) {
      auto& gb = nb.ensure_grad();
      const double* A = na.value.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          if (aip == 0.0) continue;
          double* gbrow = gb.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank2("transpose", a);
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  const auto x = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return Tensor::from_op("transpose", {n, m}, std::move(out), {a}, [m, n](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += o.grad[j * m + i];
  });
}

namespace {

template <typename F, typename DA, typename DB>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  const Broadcast kind = broadcast_kind(name, a, b);
  const std::size_t row_len = kind == Broadcast::kRow ? a.shape()[1] : 1;
  std::vector<double> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i], y[broadcast_index(kind, i, row_len)]);
  return Tensor::from_op(name, a.shape(), std::move(out), {a, b},
                         [kind, row_len, da, db](Node& o) {
    Node& na = *o.parents[0];
    Node& nb = *o.parents[1];
    if (na.requires_grad) {
      auto& ga = na.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) {
        ga[i] += o.grad[i] * da(na.value[i], nb.value[broadcast_index(kind, i, row_len)]);
      }
    }
    if (nb.requires_grad) {
      auto& gb = nb.ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        const std::size_t j = broadcast_index(kind, i, row_len);
        gb[j] += o.grad[i] * db(na.value[i], nb.value[j]);
      }
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(
      "add_scalar", a, [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  // Rank-1 parts are treated as single columns.
  const std::size_t m = parts[0].rank() == 2 ? parts[0].shape()[0] : parts[0].shape().at(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    std::size_t rows = 0, w = 0;
    if (p.rank() == 2) {
      rows = p.shape()[0];
      w = p.shape()[1];
    } else if (p.rank() == 1) {
      rows = p.shape()[0];
      w = 1;
    } else {
      throw ShapeError("concat_cols: unsupported shape " + shape_string(p.shape()));
    }
    if (rows != m) {
      throw ShapeError("concat_cols: row counts differ, " + shape_string(parts[0].shape()) +
                       " and " + shape_string(p.shape()));
    }
    widths.push_back(w);
    total += w;
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t q = 0; q < parts.size(); ++q) {
    const auto x = parts[q].data();
    const std::size_t w = widths[q];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) out[i * total + offset + j] = x[i * w + j];
    offset += w;
  }
  return Tensor::from_op("concat_cols", {m, total}, std::move(out), parts,
                         [m, total, widths](Node& o) {
    std::size_t offset = 0;
    for (std::size_t q = 0; q < o.parents.size(); ++q) {
      Node& in = *o.parents[q];
      const std::size_t w = widths[q];
      if (in.requires_grad) {
        auto& g = in.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j) g[i * w + j] += o.grad[i * total + offset + j];
      }
      offset += w;
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t length) {
  require_rank2("slice_cols", a);
  const std::size_t m = a.rows(), n = a.cols();
  if (start + length > n || length == 0) {
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") out of " + shape_string(a.shape()));
  }
  std::vector<double> out(m * length);
  const auto x = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < length; ++j) out[i * length + j] = x[i * n + start + j];
  return Tensor::from_op("slice_cols", {m, length}, std::move(out), {a},
                         [m, n, start, length](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < length; ++j) g[i * n + start + j] += o.grad[i * length + j];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                     shape_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return Tensor::from_op("reshape", std::move(shape), std::move(out), {a}, [](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor softplus(const Tensor& a) {
  return unary(
      "softplus", a,
      [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double x : a.data()) {
    if (!(x > 0.0)) throw DomainError("log: non-positive input " + std::to_string(x));
  }
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  for (double x : a.data()) {
    if (!(x >= 0.0)) throw DomainError("sqrt: negative input " + std::to_string(x));
  }
  return unary(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Tensor reciprocal(const Tensor& a) {
  for (double x : a.data()) {
    if (x == 0.0) throw DomainError("reciprocal: zero input");
  }
  return unary(
      "reciprocal", a, [](double x) { return 1.0 / x; },
      [](double, double y) { return -y * y; });
}

Tensor softmax(const Tensor& a) {
  const auto [m, n] = as_rows("softmax", a);
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.data() + i * n;
    double* y = out.data() + i * n;
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    if (!std::isfinite(mx)) throw DomainError("softmax: non-finite input");
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(row[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= z;
  }
  return Tensor::from_op("softmax", a.shape(), std::move(out), {a}, [m, n](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = o.value.data() + i * n;
      const double* gy = o.grad.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  return Tensor::from_op("sum", {}, {s}, {a}, [](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (auto& v : g) v += o.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor sum(const Tensor& a, std::size_t axis) {
  if (a.rank() == 1 && axis == 0) return sum(a);
  require_rank2("sum(axis)", a);
  if (axis > 1) throw ShapeError("sum: axis " + std::to_string(axis) + " out of range");
  const std::size_t m = a.rows(), n = a.cols();
  const auto x = a.data();
  std::vector<double> out(axis == 0 ? n : m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[axis == 0 ? j : i] += x[i * n + j];
  Shape shape{out.size()};
  return Tensor::from_op("sum_axis", std::move(shape), std::move(out), {a}, [m, n, axis](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += o.grad[axis == 0 ? j : i];
  });
}

Tensor mean(const Tensor& a, std::size_t axis) {
  if (a.rank() == 1 && axis == 0) return mean(a);
  require_rank2("mean(axis)", a);
  const double count = static_cast<double>(axis == 0 ? a.rows() : a.cols());
  return scale(sum(a, axis), 1.0 / count);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const auto [m, n] = as_rows("layer_norm", x);
  if (gamma.shape() != Shape{n} || beta.shape() != Shape{n}) {
    throw ShapeError("layer_norm: affine parameters " + shape_string(gamma.shape()) + "/" +
                     shape_string(beta.shape()) + " do not match input " + shape_string(x.shape()));
  }
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(m);
  const auto xv = x.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mu) * inv_std[i];
      out[i * n + j] = gv[j] * xhat[i * n + j] + bv[j];
    }
  }
  return Tensor::from_op("layer_norm", x.shape(), std::move(out), {x, gamma, beta},
                         [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& o) {
    Node& nx = *o.parents[0];
    Node& ng = *o.parents[1];
    Node& nb = *o.parents[2];
    if (ng.requires_grad || nb.requires_grad) {
      auto& gg = ng.ensure_grad();
      auto& gb = nb.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          gg[j] += o.grad[i * n + j] * xhat[i * n + j];
          gb[j] += o.grad[i * n + j];
        }
      }
    }
    if (nx.requires_grad) {
      auto& gx = nx.ensure_grad();
      std::vector<double> dxhat(n);
      for (std::size_t i = 0; i < m; ++i) {
        double mean_d = 0.0, mean_dx = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          dxhat[j] = o.grad[i * n + j] * ng.value[j];
          mean_d += dxhat[j];
          mean_dx += dxhat[j] * xhat[i * n + j];
        }
        mean_d /= static_cast<double>(n);
        mean_dx /= static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
          gx[i * n + j] += inv_std[i] * (dxhat[j] - mean_d - xhat[i * n + j] * mean_dx);
        }
      }
    }
  });
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw DomainError("dropout: p must be in [0, 1)");
  if (!training || p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  std::vector<double> mask(x.numel());
  for (auto& v : mask) v = keep(rng) ? s : 0.0;
  std::vector<double> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return Tensor::from_op("dropout", x.shape(), std::move(out), {x},
                         [mask = std::move(mask)](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * mask[i];
  });
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> indices) {
  const auto [rows, width] = [&]() -> std::pair<std::size_t, std::size_t> {
    if (table.rank() == 1) return {table.shape()[0], 1};
    if (table.rank() == 2) return {table.shape()[0], table.shape()[1]};
    throw ShapeError("embedding_lookup: unsupported table shape " + shape_string(table.shape()));
  }();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  for (auto i : idx) {
    if (i >= rows) {
      throw IndexError("embedding_lookup: index " + std::to_string(i) + " out of " +
                       std::to_string(rows) + " rows");
    }
  }
  std::vector<double> out(idx.size() * width);
  const auto t = table.data();
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t j = 0; j < width; ++j) out[r * width + j] = t[idx[r] * width + j];
  Shape shape = table.rank() == 1 ? Shape{idx.size()} : Shape{idx.size(), width};
  return Tensor::from_op("embedding_lookup", std::move(shape), std::move(out), {table},
                         [idx = std::move(idx), width](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < width; ++j) g[idx[r] * width + j] += o.grad[r * width + j];
  });
}

Tensor pairwise_diff(const Tensor& v) {
  if (v.rank() != 1) throw ShapeError("pairwise_diff: expected rank 1, got " + shape_string(v.shape()));
  const std::size_t n = v.shape()[0];
  std::vector<double> out(n * n);
  const auto x = v.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[j] - x[i];
  return Tensor::from_op("pairwise_diff", {n, n}, std::move(out), {v}, [n](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        g[j] += o.grad[i * n + j];
        g[i] -= o.grad[i * n + j];
      }
    }
  });
}

}  // namespace denoiserank::ad
