#include "icpd/tensor.hpp"

#include <cmath>
#include <numeric>

#include "icpd/kernels.hpp"

namespace icpd {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

void check_finite(const Tensor& t, Op op) {
  for (double v : t.values) {
    if (!std::isfinite(v)) {
      throw numeric_error(std::string("non-finite value produced by primitive '") +
                          op_name(op) + "'");
    }
  }
}

[[noreturn]] void shape_fail(Op op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op_name(op)) + ": incompatible shapes " +
                              shape_str(a.shape) + " and " + shape_str(b.shape));
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> v)
    : shape(std::move(s)), values(std::move(v)) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must be non-empty");
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("tensor value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> s) {
  std::size_t n = shape_numel(s);
  return Tensor(std::move(s), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> s, double v) {
  std::size_t n = shape_numel(s);
  return Tensor(std::move(s), std::vector<double>(n, v));
}

bool Tensor::is_scalar() const {
  for (std::size_t e : shape)
    if (e != 1) return false;
  return true;
}

Tensor Tensor::detached() const {
  Tensor t;
  t.shape = shape;
  t.values = values;
  return t;
}

std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Matmul: return "matmul";
    case Op::Add: return "add";
    case Op::Subtract: return "subtract";
    case Op::Multiply: return "elementwise-multiply";
    case Op::Relu: return "relu";
    case Op::Tanh: return "tanh";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::MeanReduce: return "mean-reduce";
    case Op::SumReduce: return "sum-reduce";
    case Op::BiasAdd: return "broadcast-add-bias";
    case Op::Softmax: return "softmax";
    case Op::Square: return "square";
  }
  return "?";
}

const Tensor& GradientMap::at_node(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= grads_.size()) {
    throw std::invalid_argument("gradient requested for node " + std::to_string(id) +
                                " which is not in the record");
  }
  return grads_[static_cast<std::size_t>(id)];
}

const Tensor& GradientMap::wrt(const Tensor& t) const { return at_node(t.node); }

int ComputationRecord::require_attached(const Tensor& t, const char* what) const {
  if (t.node < 0 || static_cast<std::size_t>(t.node) >= nodes_.size()) {
    throw std::invalid_argument(std::string(what) + " is not attached to this record");
  }
  return t.node;
}

Tensor ComputationRecord::leaf(const Tensor& t) {
  Node n;
  n.op = Op::Leaf;
  n.value = t.detached();
  nodes_.push_back(std::move(n));
  Tensor out = nodes_.back().value;
  out.node = static_cast<int>(nodes_.size()) - 1;
  return out;
}

Tensor ComputationRecord::apply(Op op, const std::vector<Tensor>& inputs) {
  if (op == Op::Leaf) throw std::invalid_argument("apply: use leaf() to register leaves");

  // Auto-register detached inputs so plain values can enter an expression.
  std::vector<Tensor> in;
  in.reserve(inputs.size());
  for (const Tensor& t : inputs) in.push_back(t.node < 0 ? leaf(t) : t);
  for (const Tensor& t : in) require_attached(t, "primitive input");

  auto expect_arity = [&](std::size_t k) {
    if (in.size() != k) {
      throw std::invalid_argument(std::string(op_name(op)) + ": expects " +
                                  std::to_string(k) + " inputs, got " +
                                  std::to_string(in.size()));
    }
  };

  Tensor out;
  switch (op) {
    case Op::Matmul: {
      expect_arity(2);
      const Tensor& a = in[0];
      const Tensor& b = in[1];
      if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) shape_fail(op, a, b);
      out = Tensor::zeros({a.rows(), b.cols()});
      kernels::matmul(a.rows(), a.cols(), b.cols(), a.values.data(), b.values.data(),
                      out.values.data());
      break;
    }
    case Op::Add:
    case Op::Subtract:
    case Op::Multiply: {
      expect_arity(2);
      const Tensor& a = in[0];
      const Tensor& b = in[1];
      if (!a.same_shape(b)) shape_fail(op, a, b);
      out = Tensor::zeros(a.shape);
      if (op == Op::Add)
        kernels::add(a.numel(), a.values.data(), b.values.data(), out.values.data());
      else if (op == Op::Subtract)
        kernels::sub(a.numel(), a.values.data(), b.values.data(), out.values.data());
      else
        kernels::mul(a.numel(), a.values.data(), b.values.data(), out.values.data());
      break;
    }
    case Op::Relu:
    case Op::Tanh:
    case Op::Exp:
    case Op::Log:
    case Op::Square: {
      expect_arity(1);
      const Tensor& x = in[0];
      out = Tensor::zeros(x.shape);
      if (op == Op::Relu)
        kernels::relu(x.numel(), x.values.data(), out.values.data());
      else if (op == Op::Tanh)
        kernels::tanh_op(x.numel(), x.values.data(), out.values.data());
      else if (op == Op::Exp)
        kernels::exp_op(x.numel(), x.values.data(), out.values.data());
      else if (op == Op::Log)
        kernels::log_op(x.numel(), x.values.data(), out.values.data());
      else
        kernels::square(x.numel(), x.values.data(), out.values.data());
      break;
    }
    case Op::MeanReduce:
    case Op::SumReduce: {
      expect_arity(1);
      const Tensor& x = in[0];
      double s = kernels::sum(x.numel(), x.values.data());
      if (op == Op::MeanReduce) s /= static_cast<double>(x.numel());
      out = Tensor::scalar(s);
      break;
    }
    case Op::BiasAdd: {
      expect_arity(2);
      const Tensor& x = in[0];
      const Tensor& b = in[1];
      if (x.rank() != 2 || b.rank() != 1 || b.shape[0] != x.cols()) shape_fail(op, x, b);
      out = Tensor::zeros(x.shape);
      kernels::bias_add(x.rows(), x.cols(), x.values.data(), b.values.data(),
                        out.values.data());
      break;
    }
    case Op::Softmax: {
      expect_arity(1);
      const Tensor& x = in[0];
      if (x.rank() != 2) {
        throw std::invalid_argument(std::string("softmax: expects a rank-2 tensor, got ") +
                                    shape_str(x.shape));
      }
      out = Tensor::zeros(x.shape);
      kernels::softmax_rows(x.rows(), x.cols(), x.values.data(), out.values.data());
      break;
    }
    case Op::Leaf:
      break;  // unreachable
  }

  check_finite(out, op);

  Node n;
  n.op = op;
  n.in[0] = in.empty() ? -1 : in[0].node;
  n.in[1] = in.size() > 1 ? in[1].node : -1;
  n.value = out;
  nodes_.push_back(std::move(n));
  out.node = static_cast<int>(nodes_.size()) - 1;
  return out;
}

GradientMap ComputationRecord::backward(const Tensor& root) const {
  const int root_id = require_attached(root, "backward root");
  if (!nodes_[static_cast<std::size_t>(root_id)].value.is_scalar()) {
    throw std::invalid_argument(
        "backward: root must be scalar-valued, got shape " +
        shape_str(nodes_[static_cast<std::size_t>(root_id)].value.shape));
  }

  std::vector<Tensor> grads(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) grads[i] = Tensor::zeros(nodes_[i].value.shape);
  grads[static_cast<std::size_t>(root_id)].values[0] = 1.0;

  for (int id = root_id; id >= 0; --id) {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.op == Op::Leaf) continue;
    const Tensor& g = grads[static_cast<std::size_t>(id)];

    auto gin = [&](int slot) -> Tensor& {
      return grads[static_cast<std::size_t>(node.in[static_cast<std::size_t>(slot)])];
    };
    auto vin = [&](int slot) -> const Tensor& {
      return nodes_[static_cast<std::size_t>(node.in[static_cast<std::size_t>(slot)])].value;
    };

    switch (node.op) {
      case Op::Matmul: {
        const Tensor& a = vin(0);
        const Tensor& b = vin(1);
        kernels::matmul_acc_nt(a.rows(), a.cols(), b.cols(), g.values.data(),
                               b.values.data(), gin(0).values.data());
        kernels::matmul_acc_tn(a.rows(), a.cols(), b.cols(), a.values.data(),
                               g.values.data(), gin(1).values.data());
        break;
      }
      case Op::Add:
        kernels::acc(g.numel(), gin(0).values.data(), g.values.data());
        kernels::acc(g.numel(), gin(1).values.data(), g.values.data());
        break;
      case Op::Subtract:
        kernels::acc(g.numel(), gin(0).values.data(), g.values.data());
        kernels::acc_scaled(g.numel(), gin(1).values.data(), g.values.data(), -1.0);
        break;
      case Op::Multiply:
        kernels::acc_mul(g.numel(), gin(0).values.data(), g.values.data(),
                         vin(1).values.data());
        kernels::acc_mul(g.numel(), gin(1).values.data(), g.values.data(),
                         vin(0).values.data());
        break;
      case Op::Relu:
        kernels::acc_relu_grad(g.numel(), gin(0).values.data(), vin(0).values.data(),
                               g.values.data());
        break;
      case Op::Tanh:
        kernels::acc_tanh_grad(g.numel(), gin(0).values.data(), node.value.values.data(),
                               g.values.data());
        break;
      case Op::Exp:
        kernels::acc_mul(g.numel(), gin(0).values.data(), g.values.data(),
                         node.value.values.data());
        break;
      case Op::Log:
        kernels::acc_log_grad(g.numel(), gin(0).values.data(), vin(0).values.data(),
                              g.values.data());
        break;
      case Op::MeanReduce:
        kernels::acc_scalar(gin(0).numel(), gin(0).values.data(),
                            g.values[0] / static_cast<double>(gin(0).numel()));
        break;
      case Op::SumReduce:
        kernels::acc_scalar(gin(0).numel(), gin(0).values.data(), g.values[0]);
        break;
      case Op::BiasAdd: {
        const Tensor& x = vin(0);
        kernels::acc(g.numel(), gin(0).values.data(), g.values.data());
        kernels::col_sum_acc(x.rows(), x.cols(), g.values.data(), gin(1).values.data());
        break;
      }
      case Op::Softmax: {
        const Tensor& y = node.value;
        kernels::softmax_grad_rows(y.rows(), y.cols(), y.values.data(), g.values.data(),
                                   gin(0).values.data());
        break;
      }
      case Op::Square:
        kernels::acc_square_grad(g.numel(), gin(0).values.data(), vin(0).values.data(),
                                 g.values.data());
        break;
      case Op::Leaf:
        break;
    }
  }

  return GradientMap(std::move(grads));
}

Tensor gradient_wrt(const ComputationRecord& rec, const Tensor& loss, const Tensor& target) {
  if (target.node < 0) {
    throw std::invalid_argument("gradient_wrt: target did not participate in the record");
  }
  return rec.backward(loss).wrt(target);
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: h must be > 0");
  Tensor grad = Tensor::zeros(x.shape);
  Tensor probe = x.detached();
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double orig = probe.values[i];
    probe.values[i] = orig + h;
    const double fp = f(probe);
    probe.values[i] = orig - h;
    const double fm = f(probe);
    probe.values[i] = orig;
    grad.values[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace icpd
