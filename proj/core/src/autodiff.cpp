#include "matchnet/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "matchnet/detail/activations.hpp"
#include "matchnet/error.hpp"

namespace matchnet::ad {

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw ValidationError("variable does not belong to this tape");
  }
  return nodes_[v.id];
}

Var Tape::push(Node n) {
  if (backward_done_) {
    throw std::logic_error("cannot record onto a tape after backward()");
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::check_same_shape(Var a, Var b, const char* op) const {
  const auto& x = node(a).value;
  const auto& y = node(b).value;
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw ValidationError(std::string(op) + ": operand shapes differ");
  }
}

Var Tape::leaf(Matrix value) {
  Node n;
  n.kind = OpKind::Leaf;
  n.needs_grad = true;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(Matrix value) {
  Node n;
  n.kind = OpKind::Leaf;
  n.needs_grad = false;
  n.value = std::move(value);
  return push(std::move(n));
}

namespace {

template <typename F>
Matrix map_values(const Matrix& x, F f) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) out.data()[i] = f(x.data()[i]);
  return out;
}

}  // namespace

Var Tape::matmul_t(Var a, Var b) {
  const auto& x = node(a);
  const auto& y = node(b);
  if (x.value.cols() != y.value.cols()) {
    throw ValidationError("matmul_t: inner dimensions differ");
  }
  Node n;
  n.kind = OpKind::MatMulT;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = x.needs_grad || y.needs_grad;
  n.value = x.value * y.value.transpose();
  return push(std::move(n));
}

Var Tape::add_row_bias(Var x, Var bias) {
  const auto& v = node(x);
  const auto& c = node(bias);
  if (c.value.rows() != 1 || c.value.cols() != v.value.cols()) {
    throw ValidationError("add_row_bias: bias must be 1 x cols");
  }
  Node n;
  n.kind = OpKind::AddRowBias;
  n.a = x.id;
  n.b = bias.id;
  n.needs_grad = v.needs_grad || c.needs_grad;
  n.value = v.value;
  n.value.rowwise() += c.value.row(0);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Node n;
  n.kind = OpKind::Add;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value + node(b).value;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Node n;
  n.kind = OpKind::Sub;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value - node(b).value;
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  Node n;
  n.kind = OpKind::Mul;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value.cwiseProduct(node(b).value);
  return push(std::move(n));
}

Var Tape::mul_const(Var a, Matrix k) {
  const auto& x = node(a);
  if (x.value.rows() != k.rows() || x.value.cols() != k.cols()) {
    throw ValidationError("mul_const: operand shapes differ");
  }
  Node n;
  n.kind = OpKind::MulConst;
  n.a = a.id;
  n.needs_grad = x.needs_grad;
  n.value = x.value.cwiseProduct(k);
  n.aux = std::move(k);
  return push(std::move(n));
}

Var Tape::div(Var a, Var b) {
  check_same_shape(a, b, "div");
  Node n;
  n.kind = OpKind::Div;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value.cwiseQuotient(node(b).value);
  return push(std::move(n));
}

Var Tape::min(Var a, Var b) {
  check_same_shape(a, b, "min");
  const auto& x = node(a).value;
  const auto& y = node(b).value;
  Node n;
  n.kind = OpKind::Min;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    n.value.data()[i] = x.data()[i] <= y.data()[i] ? x.data()[i] : y.data()[i];
  }
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  Node n;
  n.kind = OpKind::Relu;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = map_values(node(a).value, [](double x) { return x > 0.0 ? x : 0.0; });
  return push(std::move(n));
}

Var Tape::leaky_relu(Var a, double slope) {
  Node n;
  n.kind = OpKind::LeakyRelu;
  n.a = a.id;
  n.param = slope;
  n.needs_grad = node(a).needs_grad;
  if (!(slope >= 0.0 && slope < 1.0)) {
    throw ValidationError("leaky_relu: slope must lie in [0, 1)");
  }
  n.value = detail::leaky_relu(node(a).value, slope);
  return push(std::move(n));
}

Var Tape::softplus(Var a) {
  Node n;
  n.kind = OpKind::Softplus;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = detail::softplus(node(a).value);
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  Node n;
  n.kind = OpKind::Scale;
  n.a = a.id;
  n.param = c;
  n.needs_grad = node(a).needs_grad;
  n.value = c * node(a).value;
  return push(std::move(n));
}

Var Tape::linear(Var a, const ColumnMap& map) {
  const auto& x = node(a).value;
  if (x.cols() != map.in_cols) {
    throw ValidationError("linear: column map expects a different input width");
  }
  Node n;
  n.kind = OpKind::ColumnLinear;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = Matrix::Zero(x.rows(), map.out_cols);
  for (const auto& t : map.terms) {
    if (t.out_col < 0 || t.out_col >= map.out_cols || t.in_col < 0 ||
        t.in_col >= map.in_cols) {
      throw ValidationError("linear: column map term out of range");
    }
  }
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (const auto& t : map.terms) n.value(r, t.out_col) += t.coef * x(r, t.in_col);
  }
  n.map_index = column_maps_.size();
  column_maps_.push_back(map);
  return push(std::move(n));
}

Var Tape::linear(Var a, const SparseMap& map) {
  const auto& x = node(a).value;
  Node n;
  n.kind = OpKind::SparseLinear;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  if (map.offset.size() > 0) {
    if (map.offset.rows() != map.out_rows || map.offset.cols() != map.out_cols) {
      throw ValidationError("linear: offset shape differs from the output shape");
    }
    n.value = map.offset;
  } else {
    n.value = Matrix::Zero(map.out_rows, map.out_cols);
  }
  for (const auto& t : map.terms) {
    if (t.out_row < 0 || t.out_row >= map.out_rows || t.out_col < 0 ||
        t.out_col >= map.out_cols || t.in_row < 0 || t.in_row >= x.rows() ||
        t.in_col < 0 || t.in_col >= x.cols()) {
      throw ValidationError("linear: sparse map term out of range");
    }
    n.value(t.out_row, t.out_col) += t.coef * x(t.in_row, t.in_col);
  }
  n.map_index = sparse_maps_.size();
  sparse_maps_.push_back(map);
  sparse_maps_.back().offset.resize(0, 0);
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.kind = OpKind::Sum;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = Matrix::Constant(1, 1, node(a).value.sum());
  return push(std::move(n));
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

double Tape::scalar(Var v) const {
  const auto& x = node(v).value;
  if (x.size() != 1) throw ValidationError("scalar: node is not 1 x 1");
  return x(0, 0);
}

const Matrix& Tape::grad(Var v) const {
  const auto& n = node(v);
  if (!backward_done_) {
    throw std::logic_error("grad requested before backward()");
  }
  return n.grad;
}

OpKind Tape::kind(Var v) const { return node(v).kind; }

void Tape::backward(Var output) {
  if (backward_done_) {
    throw std::logic_error("backward() already ran on this tape");
  }
  if (node(output).value.size() != 1) {
    throw ValidationError("backward() needs a 1 x 1 output");
  }
  backward_done_ = true;
  for (auto& n : nodes_) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  nodes_[output.id].grad(0, 0) = 1.0;

  for (int id = output.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.kind == OpKind::Leaf) continue;
    const Matrix& g = n.grad;
    Node* a = n.a >= 0 ? &nodes_[n.a] : nullptr;
    Node* b = n.b >= 0 ? &nodes_[n.b] : nullptr;
    switch (n.kind) {
      case OpKind::Leaf:
        break;
      case OpKind::MatMulT:
        if (a->needs_grad) a->grad.noalias() += g * b->value;
        if (b->needs_grad) b->grad.noalias() += g.transpose() * a->value;
        break;
      case OpKind::AddRowBias:
        if (a->needs_grad) a->grad += g;
        if (b->needs_grad) b->grad += g.colwise().sum();
        break;
      case OpKind::Add:
        if (a->needs_grad) a->grad += g;
        if (b->needs_grad) b->grad += g;
        break;
      case OpKind::Sub:
        if (a->needs_grad) a->grad += g;
        if (b->needs_grad) b->grad -= g;
        break;
      case OpKind::Mul:
        if (a->needs_grad) a->grad += g.cwiseProduct(b->value);
        if (b->needs_grad) b->grad += g.cwiseProduct(a->value);
        break;
      case OpKind::MulConst:
        if (a->needs_grad) a->grad += g.cwiseProduct(n.aux);
        break;
      case OpKind::Div:
        if (a->needs_grad) a->grad += g.cwiseQuotient(b->value);
        if (b->needs_grad) {
          b->grad -= g.cwiseProduct(a->value)
                         .cwiseQuotient(b->value.cwiseProduct(b->value));
        }
        break;
      case OpKind::Min:
        for (Eigen::Index i = 0; i < g.size(); ++i) {
          const bool first = a->value.data()[i] <= b->value.data()[i];
          if (first && a->needs_grad) a->grad.data()[i] += g.data()[i];
          if (!first && b->needs_grad) b->grad.data()[i] += g.data()[i];
        }
        break;
      case OpKind::Relu:
        for (Eigen::Index i = 0; i < g.size(); ++i) {
          if (a->value.data()[i] > 0.0) a->grad.data()[i] += g.data()[i];
        }
        break;
      case OpKind::LeakyRelu:
        for (Eigen::Index i = 0; i < g.size(); ++i) {
          a->grad.data()[i] += a->value.data()[i] > 0.0 ? g.data()[i] : n.param * g.data()[i];
        }
        break;
      case OpKind::Softplus:
        for (Eigen::Index i = 0; i < g.size(); ++i) {
          a->grad.data()[i] += g.data()[i] * detail::logistic(a->value.data()[i]);
        }
        break;
      case OpKind::Scale:
        a->grad += n.param * g;
        break;
      case OpKind::ColumnLinear: {
        const auto& map = column_maps_[n.map_index];
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          for (const auto& t : map.terms) a->grad(r, t.in_col) += t.coef * g(r, t.out_col);
        }
        break;
      }
      case OpKind::SparseLinear: {
        const auto& map = sparse_maps_[n.map_index];
        for (const auto& t : map.terms) {
          a->grad(t.in_row, t.in_col) += t.coef * g(t.out_row, t.out_col);
        }
        break;
      }
      case OpKind::Sum:
        a->grad.array() += g(0, 0);
        break;
    }
  }
}

// --- Optimizer ---------------------------------------------------------------

void adam_step(OptimizerState& state, Eigen::Ref<Eigen::VectorXd> params,
               const Eigen::Ref<const Eigen::VectorXd>& grads, double lr) {
  if (params.size() != grads.size()) {
    throw ValidationError("adam_step: parameter and gradient sizes differ");
  }
  if (!grads.allFinite()) {
    throw NumericError("adam_step: non-finite gradient");
  }
  if (state.first_moment.size() == 0) {
    state.first_moment = Eigen::VectorXd::Zero(params.size());
    state.second_moment = Eigen::VectorXd::Zero(params.size());
  } else if (state.first_moment.size() != params.size()) {
    throw ValidationError("adam_step: optimizer state has the wrong size");
  }
  const auto& cfg = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);

  params *= 1.0 - lr * cfg.weight_decay;
  state.first_moment = cfg.beta1 * state.first_moment + (1.0 - cfg.beta1) * grads;
  state.second_moment =
      cfg.beta2 * state.second_moment + (1.0 - cfg.beta2) * grads.cwiseProduct(grads);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double m_hat = state.first_moment(i) / bias1;
    const double v_hat = state.second_moment(i) / bias2;
    params(i) -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

double lr_schedule(double base_lr, long long iteration,
                   std::span<const long long> milestones) {
  double lr = base_lr;
  for (long long milestone : milestones) {
    if (milestone <= iteration) lr *= 0.5;
  }
  return lr;
}

}  // namespace matchnet::ad
