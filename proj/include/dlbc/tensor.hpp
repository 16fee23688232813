#ifndef DLBC_TENSOR_HPP_
#define DLBC_TENSOR_HPP_

// Small reverse-mode automatic differentiation over dense 2-D matrices.
//
// A Tensor is a handle to a graph node. Operations on tensors that require
// gradients record a closure that propagates the node's gradient to its
// parents; Tensor::backward() on a 1x1 result runs those closures in reverse
// topological order and accumulates into every parameter's grad().

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dlbc/diversity.hpp"
#include "dlbc/error.hpp"

namespace dlbc::nn {

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;

  void accumulate(const Matrix& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() : node_(std::make_shared<detail::Node>()) {}

  static Tensor constant(Matrix value) {
    Tensor t;
    t.node_->value = std::move(value);
    return t;
  }

  static Tensor parameter(Matrix value) {
    Tensor t = constant(std::move(value));
    t.node_->requires_grad = true;
    return t;
  }

  static Tensor scalar(double v) { return constant(Matrix::Constant(1, 1, v)); }

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }

  // Gradient accumulated by backward(); zeros if none has been accumulated.
  Matrix grad() const {
    if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
    return node_->grad;
  }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  std::vector<Eigen::Index> shape() const { return {rows(), cols()}; }
  bool requires_grad() const { return node_->requires_grad; }

  double item() const {
    require(rows() == 1 && cols() == 1, "Tensor::item: tensor is not 1x1");
    return node_->value(0, 0);
  }

  Tensor detach() const { return constant(node_->value); }

  void backward() const {
    require(rows() == 1 && cols() == 1, "backward: loss must be a scalar");
    require(requires_grad(), "backward: loss does not depend on parameters");
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    topo_sort(node_.get(), visited, order);
    node_->accumulate(Matrix::Ones(1, 1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      detail::Node* n = *it;
      if (n->backprop && n->grad.size() != 0) n->backprop(*n);
    }
    for (auto* n : order) {
      if (!n->is_leaf) n->grad.resize(0, 0);
    }
  }

  // Builds an interior node. `backprop` receives the node and must push
  // node.grad into the parents that require gradients.
  static Tensor make(Matrix value, std::vector<Tensor> inputs,
                     std::function<void(detail::Node&)> backprop) {
    Tensor t;
    t.node_->value = std::move(value);
    t.node_->is_leaf = false;
    for (const auto& in : inputs) {
      if (in.requires_grad()) t.node_->requires_grad = true;
    }
    if (t.node_->requires_grad) {
      for (auto& in : inputs) t.node_->parents.push_back(in.node_);
      t.node_->backprop = std::move(backprop);
    }
    return t;
  }

  detail::Node* node() const { return node_.get(); }

 private:
  static void topo_sort(detail::Node* n, std::unordered_set<detail::Node*>& visited,
                        std::vector<detail::Node*>& order) {
    if (!visited.insert(n).second) return;
    for (auto& p : n->parents) {
      if (p->requires_grad) topo_sort(p.get(), visited, order);
    }
    order.push_back(n);
  }

  std::shared_ptr<detail::Node> node_;
};

namespace detail {

inline void push(Node& self, std::size_t parent, const Matrix& g) {
  auto& p = self.parents[parent];
  if (p->requires_grad) p->accumulate(g);
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          std::string(op) + ": shape mismatch");
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix out = a.value() * b.value();
  return Tensor::make(std::move(out), {a, b}, [a, b](detail::Node& n) {
    if (a.requires_grad()) detail::push(n, 0, n.grad * b.value().transpose());
    if (b.requires_grad()) detail::push(n, 1, a.value().transpose() * n.grad);
  });
}

// x + bias where bias is 1 x cols, broadcast over rows.
inline Tensor add_row(const Tensor& x, const Tensor& bias) {
  require(bias.rows() == 1 && bias.cols() == x.cols(),
          "add_row: bias must be 1 x cols");
  Matrix out = x.value().rowwise() + bias.value().row(0);
  return Tensor::make(std::move(out), {x, bias}, [x, bias](detail::Node& n) {
    if (x.requires_grad()) detail::push(n, 0, n.grad);
    if (bias.requires_grad()) detail::push(n, 1, n.grad.colwise().sum());
  });
}

// Repeats a 1 x cols tensor over `rows` rows.
inline Tensor broadcast_rows(const Tensor& row, Eigen::Index rows) {
  require(row.rows() == 1, "broadcast_rows: input must have one row");
  Matrix out = row.value().replicate(rows, 1);
  return Tensor::make(std::move(out), {row}, [](detail::Node& n) {
    detail::push(n, 0, n.grad.colwise().sum());
  });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "add");
  Matrix out = a.value() + b.value();
  return Tensor::make(std::move(out), {a, b}, [](detail::Node& n) {
    detail::push(n, 0, n.grad);
    detail::push(n, 1, n.grad);
  });
}

inline Tensor operator-(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "sub");
  Matrix out = a.value() - b.value();
  return Tensor::make(std::move(out), {a, b}, [](detail::Node& n) {
    detail::push(n, 0, n.grad);
    detail::push(n, 1, -n.grad);
  });
}

inline Tensor operator-(const Tensor& a) {
  Matrix out = -a.value();
  return Tensor::make(std::move(out), {a},
                      [](detail::Node& n) { detail::push(n, 0, -n.grad); });
}

// Elementwise product.
inline Tensor operator*(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return Tensor::make(std::move(out), {a, b}, [a, b](detail::Node& n) {
    if (a.requires_grad()) detail::push(n, 0, n.grad.cwiseProduct(b.value()));
    if (b.requires_grad()) detail::push(n, 1, n.grad.cwiseProduct(a.value()));
  });
}

inline Tensor operator*(const Tensor& a, double c) {
  Matrix out = a.value() * c;
  return Tensor::make(std::move(out), {a},
                      [c](detail::Node& n) { detail::push(n, 0, n.grad * c); });
}

inline Tensor operator*(double c, const Tensor& a) { return a * c; }

inline Tensor operator+(const Tensor& a, double c) {
  Matrix out = a.value().array() + c;
  return Tensor::make(std::move(out), {a},
                      [](detail::Node& n) { detail::push(n, 0, n.grad); });
}

inline Tensor tanh(const Tensor& a) {
  Matrix out = a.value().array().tanh();
  return Tensor::make(out, {a}, [out](detail::Node& n) {
    detail::push(n, 0,
                 (n.grad.array() * (1.0 - out.array().square())).matrix());
  });
}

inline Tensor exp(const Tensor& a) {
  Matrix out = a.value().array().exp();
  return Tensor::make(out, {a}, [out](detail::Node& n) {
    detail::push(n, 0, n.grad.cwiseProduct(out));
  });
}

inline Tensor square(const Tensor& a) {
  Matrix out = a.value().array().square();
  return Tensor::make(std::move(out), {a}, [a](detail::Node& n) {
    detail::push(n, 0, 2.0 * n.grad.cwiseProduct(a.value()));
  });
}

inline Tensor sum(const Tensor& a) {
  Matrix out = Matrix::Constant(1, 1, a.value().sum());
  const auto r = a.rows(), c = a.cols();
  return Tensor::make(std::move(out), {a}, [r, c](detail::Node& n) {
    detail::push(n, 0, Matrix::Constant(r, c, n.grad(0, 0)));
  });
}

inline Tensor mean(const Tensor& a) {
  require(a.value().size() > 0, "mean: empty tensor");
  return sum(a) * (1.0 / static_cast<double>(a.value().size()));
}

// Sums each row: (rows x cols) -> (rows x 1).
inline Tensor row_sum(const Tensor& a) {
  Matrix out = a.value().rowwise().sum();
  const auto c = a.cols();
  return Tensor::make(std::move(out), {a}, [c](detail::Node& n) {
    detail::push(n, 0, n.grad.replicate(1, c));
  });
}

// Elementwise minimum; ties route the gradient to the first argument.
inline Tensor minimum(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "minimum");
  Matrix out = a.value().cwiseMin(b.value());
  Matrix pick_a = (a.value().array() <= b.value().array()).cast<double>();
  return Tensor::make(std::move(out), {a, b}, [pick_a](detail::Node& n) {
    detail::push(n, 0, n.grad.cwiseProduct(pick_a));
    detail::push(n, 1, (n.grad.array() * (1.0 - pick_a.array())).matrix());
  });
}

// Clamps into [lo, hi]; the gradient is zero where clamping is active.
inline Tensor clamp(const Tensor& a, double lo, double hi) {
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  Matrix inside =
      ((a.value().array() >= lo) && (a.value().array() <= hi)).cast<double>();
  return Tensor::make(std::move(out), {a}, [inside](detail::Node& n) {
    detail::push(n, 0, n.grad.cwiseProduct(inside));
  });
}

}  // namespace dlbc::nn

#endif  // DLBC_TENSOR_HPP_
