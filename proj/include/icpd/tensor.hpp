// Minimal dense-tensor engine with reverse-mode differentiation. A
// ComputationRecord is an explicit per-forward-pass tape; tensors detached
// from any record are plain immutable values. Double precision throughout.
#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace icpd {

// Raised when a forward primitive produces NaN/Inf or a run hits a
// non-finite loss. Maps to CLI exit code 2.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  int node = -1;  // id in the active record, -1 when detached

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> v);

  static Tensor zeros(std::vector<std::size_t> s);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor full(std::vector<std::size_t> s, double v);

  std::size_t numel() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  // scalar means every extent is 1
  bool is_scalar() const;
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }

  double& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }

  Tensor detached() const;
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

std::string shape_str(const std::vector<std::size_t>& s);

enum class Op {
  Leaf,
  Matmul,
  Add,
  Subtract,
  Multiply,
  Relu,
  Tanh,
  Exp,
  Log,
  MeanReduce,
  SumReduce,
  BiasAdd,
  Softmax,
  Square,
};

const char* op_name(Op op);

class GradientMap {
 public:
  explicit GradientMap(std::vector<Tensor> grads) : grads_(std::move(grads)) {}

  const Tensor& at_node(int id) const;
  // gradient with respect to a tensor that participated in the record
  const Tensor& wrt(const Tensor& t) const;
  std::size_t size() const { return grads_.size(); }

 private:
  std::vector<Tensor> grads_;
};

class ComputationRecord {
 public:
  ComputationRecord() = default;
  ComputationRecord(const ComputationRecord&) = delete;
  ComputationRecord& operator=(const ComputationRecord&) = delete;

  // Registers a value as a differentiable leaf; returns it with node set.
  Tensor leaf(const Tensor& t);
  // Same node kind; the name documents intent at call sites (fixed targets,
  // masks, loss mixing coefficients). Always enters detached values.
  Tensor constant(const Tensor& t) { return leaf(t.detached()); }

  // Generic primitive application; validates shapes, computes the forward
  // value, checks it is finite, and records the node.
  Tensor apply(Op op, const std::vector<Tensor>& inputs);

  Tensor matmul(const Tensor& a, const Tensor& b) { return apply(Op::Matmul, {a, b}); }
  Tensor add(const Tensor& a, const Tensor& b) { return apply(Op::Add, {a, b}); }
  Tensor subtract(const Tensor& a, const Tensor& b) { return apply(Op::Subtract, {a, b}); }
  Tensor multiply(const Tensor& a, const Tensor& b) { return apply(Op::Multiply, {a, b}); }
  Tensor relu(const Tensor& x) { return apply(Op::Relu, {x}); }
  Tensor tanh(const Tensor& x) { return apply(Op::Tanh, {x}); }
  Tensor exp(const Tensor& x) { return apply(Op::Exp, {x}); }
  Tensor log(const Tensor& x) { return apply(Op::Log, {x}); }
  Tensor mean_reduce(const Tensor& x) { return apply(Op::MeanReduce, {x}); }
  Tensor sum_reduce(const Tensor& x) { return apply(Op::SumReduce, {x}); }
  Tensor bias_add(const Tensor& x, const Tensor& b) { return apply(Op::BiasAdd, {x, b}); }
  Tensor softmax(const Tensor& x) { return apply(Op::Softmax, {x}); }
  Tensor square(const Tensor& x) { return apply(Op::Square, {x}); }

  // Reverse traversal from a scalar root. Returns the gradient of root with
  // respect to every recorded node (zeros where the root does not depend on
  // a node).
  GradientMap backward(const Tensor& root) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    std::array<int, 2> in{-1, -1};
    Tensor value;
  };
  std::vector<Node> nodes_;

  int require_attached(const Tensor& t, const char* what) const;
};

// Convenience: backward then pick one entry. target must have participated
// in the same record as loss.
Tensor gradient_wrt(const ComputationRecord& rec, const Tensor& loss, const Tensor& target);

// Central-difference gradient of a scalar function, (f(x+h e_i) - f(x-h e_i)) / 2h.
// Test oracle; independent of the reverse-mode path.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& x, double h);

}  // namespace icpd
